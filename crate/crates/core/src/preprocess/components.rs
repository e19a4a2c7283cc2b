use serde::{Deserialize, Serialize};

use super::{BinaryMask, PreprocessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Pixels of the largest connected component, plus its bounding box.
///
/// Ties on area go to the component whose first pixel comes first in raster order.
pub fn largest_component(mask: &BinaryMask, connectivity: Connectivity) -> Result<(BinaryMask, Rect), PreprocessError> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![u32::MAX; w * h];
    let mut best: Option<(usize, u32, Rect)> = None;
    let mut stack = Vec::new();
    let mut next = 0u32;

    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };

    for start in 0..w * h {
        if !mask.bits()[start] || label[start] != u32::MAX {
            continue;
        }
        let id = next;
        next += 1;
        label[start] = id;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0usize;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for &(dx, dy) in offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && label[j] == u32::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        let rect = Rect {
            x: x0,
            y: y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
        };
        if best.is_none_or(|(a, _, _)| area > a) {
            best = Some((area, id, rect));
        }
    }

    let (_, id, rect) = best.ok_or(PreprocessError::EmptyMask)?;
    let bits = label.iter().map(|&l| l == id).collect();
    Ok((BinaryMask::new(w, h, bits), rect))
}

/// Tight bounding box of the largest connected component.
pub fn largest_component_bbox(mask: &BinaryMask, connectivity: Connectivity) -> Result<Rect, PreprocessError> {
    largest_component(mask, connectivity).map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(m: &mut BinaryMask, x: usize, y: usize, w: usize, h: usize) {
        for yy in y..y + h {
            for xx in x..x + w {
                m.set(xx, yy, true);
            }
        }
    }

    #[test]
    fn larger_blob_wins() {
        let mut m = BinaryMask::empty(12, 12);
        blob(&mut m, 0, 0, 2, 2);
        blob(&mut m, 6, 5, 3, 3);
        assert_eq!(
            largest_component_bbox(&m, Connectivity::Eight).unwrap(),
            Rect { x: 6, y: 5, w: 3, h: 3 }
        );
    }

    #[test]
    fn full_mask_is_full_image() {
        let m = BinaryMask::from_fn(7, 4, |_, _| true);
        assert_eq!(
            largest_component_bbox(&m, Connectivity::Four).unwrap(),
            Rect { x: 0, y: 0, w: 7, h: 4 }
        );
    }

    #[test]
    fn empty_mask_errors() {
        assert_eq!(
            largest_component_bbox(&BinaryMask::empty(3, 3), Connectivity::Eight),
            Err(PreprocessError::EmptyMask)
        );
    }

    #[test]
    fn diagonal_connectivity() {
        let m = BinaryMask::from_fn(3, 3, |x, y| x == y);
        assert_eq!(largest_component_bbox(&m, Connectivity::Eight).unwrap().w, 3);
        assert_eq!(largest_component_bbox(&m, Connectivity::Four).unwrap(), Rect { x: 0, y: 0, w: 1, h: 1 });
    }

    #[test]
    fn tie_goes_to_first_in_scan_order() {
        let mut m = BinaryMask::empty(10, 10);
        blob(&mut m, 6, 1, 2, 2);
        blob(&mut m, 1, 5, 2, 2);
        assert_eq!(largest_component_bbox(&m, Connectivity::Eight).unwrap(), Rect { x: 6, y: 1, w: 2, h: 2 });
    }
}
