use super::MultiChannelRaster;
use crate::error::{Error, Result};

pub const DEFAULT_OTSU_BINS: usize = 256;

/// Otsu threshold of a single-channel raster.
///
/// Values are binned into `bins` uniform bins over `[min, max]`; bin `i` holds
/// `min + i * w <= v < min + (i + 1) * w` (the top bin is closed). The split
/// maximizing the between-class variance `w0 * w1 * (m0 - m1)^2`, with bin
/// indices as class values, is chosen, the lowest split on ties. The returned
/// threshold is the upper edge of the last background bin, so the foreground
/// is every value `>= threshold`.
pub fn otsu_threshold(map: &MultiChannelRaster, bins: usize) -> Result<f32> {
    map.require_single_channel()?;
    if map.is_empty() {
        return Err(Error::InvalidArgument("empty map".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("otsu needs at least 2 bins".into()));
    }
    let (lo, hi) = min_max(map.data());
    if lo >= hi {
        return Err(Error::DegenerateHistogram);
    }

    let hist = histogram(map.data(), lo, hi, bins);
    let total: f64 = hist.iter().sum();
    let total_mass: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h).sum();

    let mut best: Option<(usize, f64)> = None;
    let (mut w0, mut mass0) = (0.0f64, 0.0f64);
    for (k, &h) in hist.iter().enumerate().take(bins - 1) {
        w0 += h;
        mass0 += k as f64 * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = mass0 / w0;
        let m1 = (total_mass - mass0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    let (k, _) = best.ok_or(Error::DegenerateHistogram)?;
    Ok(bin_edge(lo, hi, bins, k + 1))
}

pub(crate) fn min_max(values: &[f32]) -> (f32, f32) {
    values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[inline]
pub(crate) fn bin_index(v: f32, lo: f32, hi: f32, bins: usize) -> usize {
    let t = ((v as f64 - lo as f64) / (hi as f64 - lo as f64) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

pub(crate) fn bin_edge(lo: f32, hi: f32, bins: usize, edge: usize) -> f32 {
    (lo as f64 + (hi as f64 - lo as f64) * edge as f64 / bins as f64) as f32
}

fn histogram(values: &[f32], lo: f32, hi: f32, bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0f64; bins];
    for &v in values {
        hist[bin_index(v, lo, hi, bins)] += 1.0;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_threshold_separates_modes() {
        let mut data = vec![0.1f32; 100];
        data.extend(std::iter::repeat_n(0.9f32, 20));
        let map = MultiChannelRaster::new(120, 1, 1, data).unwrap();
        let t = otsu_threshold(&map, 256).unwrap();
        assert!(t > 0.1 && t < 0.9, "threshold {t}");
        // Lowest maximizing split: every split between the two modes has the
        // same variance, so the edge right above the low mode wins.
        assert!((t - bin_edge(0.1, 0.9, 256, 1)).abs() < 1e-7);
    }

    #[test]
    fn constant_map_is_degenerate() {
        let map = MultiChannelRaster::new(4, 4, 1, vec![0.5; 16]).unwrap();
        assert!(matches!(otsu_threshold(&map, 256), Err(Error::DegenerateHistogram)));
    }

    #[test]
    fn multichannel_is_rejected() {
        let map = MultiChannelRaster::zeros(2, 2, 3);
        assert!(otsu_threshold(&map, 256).is_err());
    }

    #[test]
    fn top_value_lands_in_last_bin() {
        assert_eq!(bin_index(1.0, 0.0, 1.0, 256), 255);
        assert_eq!(bin_index(0.0, 0.0, 1.0, 256), 0);
    }
}
