use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Manifest, Split};
use crate::imagecore::{load_png, BilinearResize, FloatImage, GrayImage8};
use crate::nn::{NnError, Samples};
use crate::preprocess::{augment, exterior_exclusion, AugmentParams, CropParams};

/// Images loaded once, resized to the model input and scaled to `[0, 1]`.
///
/// With augmentation enabled, training draws for `(epoch, index)` first pick the
/// exterior-excluded variant with probability `exterior_exclusion_prob`, then apply
/// [`augment`]. Evaluation draws are never augmented.
#[derive(Debug, Clone)]
pub struct ImageSet {
    paths: Vec<PathBuf>,
    labels: Vec<bool>,
    images: Vec<FloatImage>,
    excluded: Vec<FloatImage>,
    augment: Option<AugmentParams>,
}

fn to_input(img: &GrayImage8, width: usize, height: usize) -> FloatImage {
    img.to_unit_interval().resize_bilinear(width, height)
}

impl ImageSet {
    pub fn load(items: &[(PathBuf, bool)], width: usize, height: usize) -> Result<Self, DatasetError> {
        Self::load_with(items, width, height, None)
    }

    /// Loads `items`, preparing exterior-excluded variants when `augmentation` asks
    /// for them.
    pub fn load_with(
        items: &[(PathBuf, bool)],
        width: usize,
        height: usize,
        augmentation: Option<(&AugmentParams, &CropParams)>,
    ) -> Result<Self, DatasetError> {
        let mut set = ImageSet {
            paths: Vec::with_capacity(items.len()),
            labels: Vec::with_capacity(items.len()),
            images: Vec::with_capacity(items.len()),
            excluded: Vec::new(),
            augment: augmentation.map(|(a, _)| a.clone()),
        };
        for (path, label) in items {
            let gray = read_gray(path)?;
            if let Some((a, crop)) = augmentation {
                if a.exterior_exclusion_prob > 0.0 {
                    set.excluded.push(to_input(&exterior_exclusion(&gray, crop), width, height));
                }
            }
            set.images.push(to_input(&gray, width, height));
            set.paths.push(path.clone());
            set.labels.push(*label);
        }
        Ok(set)
    }

    /// Rows of `split` from a manifest.
    pub fn from_manifest(
        manifest: &Manifest,
        split: Split,
        width: usize,
        height: usize,
        augmentation: Option<(&AugmentParams, &CropParams)>,
    ) -> Result<Self, DatasetError> {
        let items: Vec<_> = manifest.rows_in(split).map(|r| (manifest.resolve(r), r.label)).collect();
        Self::load_with(&items, width, height, augmentation)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn image(&self, index: usize) -> &FloatImage {
        &self.images[index]
    }

    fn draw(&self, index: usize, epoch: usize, params: &AugmentParams) -> FloatImage {
        let sample = ((epoch as u64) << 32) | index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(params.seed, "exclusion", sample));
        let base = if !self.excluded.is_empty() && rng.gen::<f64>() < params.exterior_exclusion_prob {
            &self.excluded[index]
        } else {
            &self.images[index]
        };
        augment(base, params, sample)
    }
}

pub(super) fn read_gray(path: &Path) -> Result<GrayImage8, DatasetError> {
    load_png(path).map_err(|e| DatasetError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl Samples for ImageSet {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn label(&self, index: usize) -> bool {
        self.labels[index]
    }

    fn input(&self, index: usize, epoch: Option<usize>) -> Result<FloatImage, NnError> {
        if index >= self.images.len() {
            return Err(NnError::Sample {
                index,
                message: "index out of range".into(),
            });
        }
        Ok(match (epoch, &self.augment) {
            (Some(e), Some(p)) => self.draw(index, e, p),
            _ => self.images[index].clone(),
        })
    }
}
