use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{write_manifest, DatasetError, ManifestRow};
use crate::imagecore::{save_png, GrayImage8};
use crate::seed::derive;

/// Parameters of the synthetic chest-slice generator.
///
/// Lengths are fractions of `size`; intensities are 8-bit gray levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub count_per_class: usize,
    pub size: usize,
    pub lesion_count: [usize; 2],
    pub lesion_radius: [f64; 2],
    pub lesion_intensity: [f64; 2],
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            count_per_class: 150,
            size: 224,
            lesion_count: [4, 8],
            lesion_radius: [0.07, 0.12],
            lesion_intensity: [150.0, 220.0],
            noise_sigma: 6.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.to_string()));
        if self.size < 32 {
            return bad("size must be at least 32");
        }
        if self.lesion_count[0] == 0 || self.lesion_count[0] > self.lesion_count[1] {
            return bad("lesion_count must be a non-empty range starting at 1 or more");
        }
        let [r0, r1] = self.lesion_radius;
        if !(r0 > 0.0 && r0 <= r1 && r1 < 0.2) {
            return bad("lesion_radius must satisfy 0 < min <= max < 0.2");
        }
        let [i0, i1] = self.lesion_intensity;
        if !(0.0..=255.0).contains(&i0) || !(i0..=255.0).contains(&i1) {
            return bad("lesion_intensity must be an ordered range within [0, 255]");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        Ok(())
    }
}

/// Axis-aligned ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    /// Whether the centre of pixel `(x, y)` lies inside.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 - self.cx) / self.rx;
        let dy = (y as f64 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// A rendered slice with the geometry it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: GrayImage8,
    pub label: bool,
    pub body: Ellipse,
    pub lungs: [Ellipse; 2],
}

impl Phantom {
    pub fn in_lungs(&self, x: usize, y: usize) -> bool {
        self.lungs.iter().any(|l| l.contains(x, y))
    }
}

fn jitter(rng: &mut ChaCha8Rng, center: f64, half: f64) -> f64 {
    center + half * (2.0 * rng.gen::<f64>() - 1.0)
}

/// Renders phantom `index` of the given class.
///
/// A normal and a positive phantom with the same index share anatomy and noise, and
/// differ only inside the lungs, where the positive one carries bright textured blobs.
pub fn render_phantom(spec: &PhantomSpec, index: u64, label: bool) -> Phantom {
    let s = spec.size as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "phantom-anatomy", index));
    let body = Ellipse {
        cx: jitter(&mut rng, s / 2.0, 0.02 * s),
        cy: jitter(&mut rng, 0.48 * s, 0.02 * s),
        rx: jitter(&mut rng, 0.40 * s, 0.03 * s),
        ry: jitter(&mut rng, 0.30 * s, 0.03 * s),
    };
    let body_level = jitter(&mut rng, 180.0, 8.0);
    let lung_level = jitter(&mut rng, 50.0, 5.0);
    let mut lungs = [body; 2];
    for (side, lung) in [-1.0, 1.0].into_iter().zip(lungs.iter_mut()) {
        *lung = Ellipse {
            cx: body.cx + side * jitter(&mut rng, 0.17 * s, 0.01 * s),
            cy: jitter(&mut rng, body.cy, 0.01 * s),
            rx: jitter(&mut rng, 0.11 * s, 0.01 * s),
            ry: jitter(&mut rng, 0.19 * s, 0.015 * s),
        };
    }
    let bed_y = (body.cy + body.ry + 0.06 * s).round() as usize;
    let bed_x = ((0.15 * s) as usize, (0.85 * s) as usize);

    let n = spec.size;
    let mut level = vec![0.0f64; n * n];
    for y in 0..n {
        for x in 0..n {
            level[y * n + x] = if lungs.iter().any(|l| l.contains(x, y)) {
                lung_level
            } else if body.contains(x, y) {
                body_level
            } else if (bed_y..bed_y + 3).contains(&y) && (bed_x.0..bed_x.1).contains(&x) {
                110.0
            } else {
                0.0
            };
        }
    }

    if label {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "phantom-lesion", index));
        let count = rng.gen_range(spec.lesion_count[0]..=spec.lesion_count[1]);
        for _ in 0..count {
            let lung = lungs[rng.gen_range(0..2)];
            let (cx, cy) = loop {
                let px = jitter(&mut rng, lung.cx, lung.rx);
                let py = jitter(&mut rng, lung.cy, lung.ry);
                let (dx, dy) = ((px - lung.cx) / lung.rx, (py - lung.cy) / lung.ry);
                if dx * dx + dy * dy <= 0.7 {
                    break (px, py);
                }
            };
            let r = rng.gen_range(spec.lesion_radius[0]..=spec.lesion_radius[1]) * s;
            let intensity = rng.gen_range(spec.lesion_intensity[0]..=spec.lesion_intensity[1]);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let lobes = rng.gen_range(2..=5) as f64;
            let reach = 1.35 * r;
            let x0 = (cx - reach).floor().max(0.0) as usize;
            let y0 = (cy - reach).floor().max(0.0) as usize;
            let x1 = ((cx + reach).ceil() as usize).min(n - 1);
            let y1 = ((cy + reach).ceil() as usize).min(n - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let texture = 30.0 * (2.0 * rng.gen::<f64>() - 1.0);
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let edge = r * (1.0 + 0.3 * (lobes * dy.atan2(dx) + phase).sin());
                    if dx.hypot(dy) <= edge && lungs.iter().any(|l| l.contains(x, y)) {
                        let v = intensity + texture;
                        let i = y * n + x;
                        level[i] = level[i].max(v);
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "phantom-noise", index));
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    for v in level.iter_mut() {
        let e = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        *v += e;
    }
    let image = GrayImage8::from_fn(n, n, |x, y| crate::imagecore::quantize_u8(level[y * n + x]));
    Phantom {
        image,
        label,
        body,
        lungs,
    }
}

/// Writes `count_per_class` normal and positive phantoms under `out_dir` together
/// with `manifest.csv` (paths relative to `out_dir`, source `phantom`, no split).
pub fn generate_phantoms(spec: &PhantomSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestRow>, DatasetError> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let mut rows = Vec::with_capacity(2 * spec.count_per_class);
    for (label, class) in [(false, "normal"), (true, "positive")] {
        let dir = out_dir.join(class);
        std::fs::create_dir_all(&dir).map_err(|e| DatasetError::io(&dir, e))?;
        for i in 0..spec.count_per_class {
            let name = format!("{class}/{class}_{i:04}.png");
            let path = out_dir.join(&name);
            let phantom = render_phantom(spec, i as u64, label);
            save_png(&path, &phantom.image).map_err(|e| DatasetError::io(&path, e))?;
            rows.push(ManifestRow {
                path: name,
                label,
                source: "phantom".into(),
                split: None,
            });
        }
    }
    write_manifest(out_dir.join("manifest.csv"), &rows)?;
    Ok(rows)
}
