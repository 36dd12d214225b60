use std::collections::VecDeque;

use super::{BinaryMask, LabeledRegions, MultiChannelRaster};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(isize, isize); 8] =
            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Labels the connected set pixels of `mask`. Labels are assigned in
/// raster-scan order of each region's first pixel, starting at 1.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabeledRegions {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    LabeledRegions { width: w, height: h, labels, region_count: next as usize }
}

/// Weighted center of mass of `region`, using pixel centers as coordinates
/// and channel 0 of `weights` as the mass.
pub fn weighted_centroid(
    region: &[(usize, usize)],
    weights: &MultiChannelRaster,
) -> Result<(f64, f64)> {
    if region.is_empty() {
        return Err(Error::InvalidArgument("empty region".into()));
    }
    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in region {
        let w = weights.get(x, y, 0) as f64;
        if w < 0.0 {
            return Err(Error::InvalidArgument(format!("negative weight at ({x}, {y})")));
        }
        sw += w;
        sx += w * x as f64;
        sy += w * y as f64;
    }
    if sw <= 0.0 {
        return Err(Error::MasslessRegion);
    }
    Ok((sx / sw, sy / sw))
}
