//! Deterministic data augmentation: eight rotations, two mirrors and random
//! crops, applied identically to an image and its likelihood target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::MultiChannelRaster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub crop_count: usize,
    /// Crop (width, height) in pixels.
    pub crop_size: (usize, usize),
}

impl AugmentConfig {
    pub fn new(crop_count: usize, crop_size: (usize, usize)) -> Self {
        Self { crop_count, crop_size }
    }
}

/// Returns the 8 rotations (multiples of 45 degrees, starting with the
/// identity), the horizontal and vertical mirrors, then `crop_count` random
/// crops. The crop corners depend only on `seed`.
pub fn augment(
    image: &MultiChannelRaster,
    target: &MultiChannelRaster,
    config: &AugmentConfig,
    seed: u64,
) -> Result<Vec<(MultiChannelRaster, MultiChannelRaster)>> {
    if (image.width(), image.height()) != (target.width(), target.height()) {
        return Err(Error::Shape(format!(
            "image {}x{} and target {}x{} differ",
            image.width(),
            image.height(),
            target.width(),
            target.height()
        )));
    }
    let (cw, ch) = config.crop_size;
    if config.crop_count > 0 && (cw == 0 || ch == 0 || cw > image.width() || ch > image.height()) {
        return Err(Error::InvalidArgument(format!(
            "crop {cw}x{ch} does not fit a {}x{} image",
            image.width(),
            image.height()
        )));
    }

    let mut out = Vec::with_capacity(10 + config.crop_count);
    for eighths in 0..8 {
        out.push((rotate_eighths(image, eighths), rotate_eighths(target, eighths)));
    }
    out.push((mirror_horizontal(image), mirror_horizontal(target)));
    out.push((mirror_vertical(image), mirror_vertical(target)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.crop_count {
        let x0 = rng.random_range(0..=image.width() - cw);
        let y0 = rng.random_range(0..=image.height() - ch);
        out.push((crop(image, x0, y0, cw, ch), crop(target, x0, y0, cw, ch)));
    }
    Ok(out)
}

/// Rotation by `eighths * 45` degrees about the image center, turning the
/// +x axis towards +y. Quarter turns are exact index permutations (swapping
/// width and height for odd quarters); the diagonal angles resample with
/// nearest neighbor inside the original frame and fill uncovered pixels
/// with 0.
pub fn rotate_eighths(img: &MultiChannelRaster, eighths: u32) -> MultiChannelRaster {
    let eighths = eighths % 8;
    let (w, h) = (img.width(), img.height());
    if eighths.is_multiple_of(2) {
        let quarter = eighths / 2;
        let (ow, oh) = if quarter % 2 == 1 { (h, w) } else { (w, h) };
        return remap(img, ow, oh, |x, y| {
            Some(match quarter {
                0 => (x, y),
                1 => (y, h - 1 - x),
                2 => (w - 1 - x, h - 1 - y),
                _ => (w - 1 - y, x),
            })
        });
    }
    let angle = eighths as f64 * std::f64::consts::FRAC_PI_4;
    let (s, c) = angle.sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    remap(img, w, h, |x, y| {
        // inverse rotation of the output pixel back into the source
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = (cx + c * dx + s * dy).round();
        let sy = (cy - s * dx + c * dy).round();
        (sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < h as f64)
            .then_some((sx as usize, sy as usize))
    })
}

pub fn mirror_horizontal(img: &MultiChannelRaster) -> MultiChannelRaster {
    let w = img.width();
    remap(img, w, img.height(), |x, y| Some((w - 1 - x, y)))
}

pub fn mirror_vertical(img: &MultiChannelRaster) -> MultiChannelRaster {
    let h = img.height();
    remap(img, img.width(), h, |x, y| Some((x, h - 1 - y)))
}

fn crop(img: &MultiChannelRaster, x0: usize, y0: usize, w: usize, h: usize) -> MultiChannelRaster {
    remap(img, w, h, |x, y| Some((x0 + x, y0 + y)))
}

/// Builds a `w` x `h` raster whose pixel (x, y) copies source pixel
/// `source(x, y)`, or zeros when it is `None`.
fn remap(
    img: &MultiChannelRaster,
    w: usize,
    h: usize,
    source: impl Fn(usize, usize) -> Option<(usize, usize)>,
) -> MultiChannelRaster {
    let c = img.channels();
    let mut data = vec![0.0f32; w * h * c];
    for y in 0..h {
        for x in 0..w {
            if let Some((sx, sy)) = source(x, y) {
                let dst = (y * w + x) * c;
                data[dst..dst + c].copy_from_slice(img.pixel(sx, sy));
            }
        }
    }
    MultiChannelRaster::new(w, h, c, data).expect("remap preserves shape and finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> MultiChannelRaster {
        MultiChannelRaster::from_fn(w, h, |x, y| (y * w + x) as f32)
    }

    fn argmax(img: &MultiChannelRaster) -> (usize, usize) {
        let i = img
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        (i % img.width(), i / img.width())
    }

    #[test]
    fn default_counts() {
        let img = MultiChannelRaster::zeros(16, 16, 4);
        let gt = MultiChannelRaster::zeros(16, 16, 1);
        let out = augment(&img, &gt, &AugmentConfig::new(4, (12, 12)), 7).unwrap();
        assert_eq!(out.len(), 14);
        assert!(out[10..].iter().all(|(i, g)| i.width() == 12 && g.height() == 12));
    }

    #[test]
    fn mirror_is_an_involution() {
        let img = ramp(5, 3);
        assert_eq!(mirror_horizontal(&mirror_horizontal(&img)), img);
        assert_eq!(mirror_vertical(&mirror_vertical(&img)), img);
    }

    #[test]
    fn quarter_turn_moves_peak() {
        // non-square to catch swapped axes
        let (w, h) = (9, 6);
        let (px, py) = (2, 1);
        let img = MultiChannelRaster::from_fn(w, h, |x, y| if (x, y) == (px, py) { 1.0 } else { 0.0 });
        let rot = rotate_eighths(&img, 2);
        assert_eq!((rot.width(), rot.height()), (h, w));
        assert_eq!(argmax(&rot), (h - 1 - py, px));
    }

    #[test]
    fn four_quarter_turns_is_identity() {
        let img = ramp(7, 4);
        let mut r = img.clone();
        for _ in 0..4 {
            r = rotate_eighths(&r, 2);
        }
        assert_eq!(r, img);
        assert_eq!(rotate_eighths(&rotate_eighths(&img, 2), 4), rotate_eighths(&img, 6));
    }

    #[test]
    fn diagonal_rotation_keeps_center_and_fills_corners() {
        let img = MultiChannelRaster::from_fn(9, 9, |_, _| 1.0);
        let r = rotate_eighths(&img, 1);
        assert_eq!(r.get(4, 4, 0), 1.0);
        assert_eq!(r.get(0, 0, 0), 0.0);
    }

    #[test]
    fn oversized_crop_is_rejected() {
        let img = MultiChannelRaster::zeros(8, 8, 1);
        assert!(augment(&img, &img, &AugmentConfig::new(1, (9, 4)), 0).is_err());
    }

    #[test]
    fn crops_are_seed_deterministic() {
        let img = ramp(20, 20);
        let cfg = AugmentConfig::new(4, (8, 8));
        let a = augment(&img, &img, &cfg, 11).unwrap();
        let b = augment(&img, &img, &cfg, 11).unwrap();
        assert_eq!(a, b);
        for (i, g) in &a[10..] {
            assert_eq!(i, g);
        }
    }
}
