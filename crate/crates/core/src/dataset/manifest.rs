use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// One labelled image. `path` is stored as written; relative paths are resolved
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: String,
    pub label: bool,
    pub source: String,
    pub split: Option<Split>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    path: String,
    label: String,
    source: String,
    split: Option<Split>,
}

/// Rows plus the directory relative paths are resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn rows_in(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == Some(split))
    }
}

/// Reads a `path,label,source,split` CSV, checking labels, path uniqueness and that
/// every file exists.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| DatasetError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut manifest = Manifest {
        base_dir,
        rows: Vec::new(),
    };
    let mut seen = HashSet::new();
    for (i, rec) in reader.deserialize::<Record>().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(csv_err)?;
        let label = match rec.label.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(DatasetError::BadLabel {
                    row: row_no,
                    value: other.to_string(),
                })
            }
        };
        if !seen.insert(rec.path.clone()) {
            return Err(DatasetError::DuplicatePath { row: row_no, path: rec.path });
        }
        let row = ManifestRow {
            path: rec.path,
            label,
            source: rec.source,
            split: rec.split,
        };
        let full = manifest.resolve(&row);
        if !full.is_file() {
            return Err(DatasetError::MissingFile {
                row: row_no,
                path: full.display().to_string(),
            });
        }
        manifest.rows.push(row);
    }
    Ok(manifest)
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| DatasetError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(Record {
            path: r.path.clone(),
            label: if r.label { "1" } else { "0" }.to_string(),
            source: r.source.clone(),
            split: r.split,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"x").unwrap();
    }

    #[test]
    fn round_trip_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        touch(dir.path(), "b.png");
        let rows = vec![
            ManifestRow {
                path: "a.png".into(),
                label: true,
                source: "s1".into(),
                split: Some(Split::Val),
            },
            ManifestRow {
                path: "b.png".into(),
                label: false,
                source: "s2".into(),
                split: None,
            },
        ];
        let p = dir.path().join("m.csv");
        write_manifest(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "path,label,source,split\na.png,1,s1,val\nb.png,0,s2,\n");
        let m = read_manifest(&p).unwrap();
        assert_eq!(m.rows, rows);
        assert_eq!(m.resolve(&m.rows[0]), dir.path().join("a.png"));
    }

    #[test]
    fn row_errors_carry_context() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "path,label,source,split\na.png,2,s,\n").unwrap();
        assert_eq!(
            read_manifest(&p).unwrap_err(),
            DatasetError::BadLabel {
                row: 1,
                value: "2".into()
            }
        );
        std::fs::write(&p, "path,label,source,split\na.png,1,s,\na.png,0,s,\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(DatasetError::DuplicatePath { row: 2, .. })));
        std::fs::write(&p, "path,label,source,split\nmissing.png,1,s,\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(DatasetError::MissingFile { row: 1, .. })));
    }
}
