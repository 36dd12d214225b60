use super::MultiChannelRaster;
use crate::error::{Error, Result};

/// Exact Euclidean distance from every pixel to the nearest seed point.
///
/// Two separable passes over squared distances: a 1-D nearest-seed scan along
/// each row, then a lower envelope of parabolas down each column. Squared
/// distances are integers, so the result is exact up to the final `f32`
/// rounding of the square root.
pub fn distance_transform(
    points: &[(usize, usize)],
    width: usize,
    height: usize,
) -> Result<MultiChannelRaster> {
    if points.is_empty() {
        return Err(Error::NoSeps);
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| x >= width || y >= height) {
        return Err(Error::InvalidArgument(format!(
            "point ({x}, {y}) outside {width}x{height} raster"
        )));
    }

    let mut seed = vec![false; width * height];
    for &(x, y) in points {
        seed[y * width + x] = true;
    }

    // Row pass: squared horizontal distance to the nearest seed in the row.
    let mut row_sq = vec![f64::INFINITY; width * height];
    for y in 0..height {
        let row = &seed[y * width..(y + 1) * width];
        let out = &mut row_sq[y * width..(y + 1) * width];
        let mut last: Option<usize> = None;
        for x in 0..width {
            if row[x] {
                last = Some(x);
            }
            if let Some(s) = last {
                let d = (x - s) as f64;
                out[x] = d * d;
            }
        }
        last = None;
        for x in (0..width).rev() {
            if row[x] {
                last = Some(x);
            }
            if let Some(s) = last {
                let d = (s - x) as f64;
                out[x] = out[x].min(d * d);
            }
        }
    }

    // Column pass: lower envelope of parabolas (y - q)^2 + f(q).
    let mut result = vec![0.0f32; width * height];
    let mut f = vec![0.0f64; height];
    let mut sites = vec![0usize; height];
    let mut bounds = vec![0.0f64; height + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = row_sq[y * width + x];
        }
        let envelope = lower_envelope(&f, &mut sites, &mut bounds);
        let mut k = 0;
        for y in 0..height {
            while k + 1 < envelope && bounds[k + 1] < y as f64 {
                k += 1;
            }
            let q = sites[k];
            let dy = y as f64 - q as f64;
            result[y * width + x] = (dy * dy + f[q]).sqrt() as f32;
        }
    }

    MultiChannelRaster::new(width, height, 1, result)
}

/// Builds the lower envelope of the parabolas with finite `f`, returning the
/// number of parabolas in it. `sites[k]` is the k-th parabola's vertex and
/// `bounds[k]..bounds[k + 1]` the interval where it is minimal.
fn lower_envelope(f: &[f64], sites: &mut [usize], bounds: &mut [f64]) -> usize {
    let mut k: isize = -1;
    for q in 0..f.len() {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                sites[0] = q;
                bounds[0] = f64::NEG_INFINITY;
                bounds[1] = f64::INFINITY;
                break;
            }
            let p = sites[k as usize];
            let s = intersection(f, p, q);
            if s <= bounds[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            sites[k as usize] = q;
            bounds[k as usize] = s;
            bounds[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    (k + 1) as usize
}

#[inline]
fn intersection(f: &[f64], p: usize, q: usize) -> f64 {
    let (pf, qf) = (p as f64, q as f64);
    ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
}
