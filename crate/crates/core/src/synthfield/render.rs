//! Flat-shaded rendering of the field as seen from the nadir camera.
//! Channels are R, G, B, NIR in `[0, 1]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{stream_rng, FieldTruth, Plant, PlantForm, Stream, TrueStep};
use crate::error::Result;
use crate::extraction::Detection;
use crate::geomap::{project_detection, world_to_pixel, CameraConfig, Pose2D};
use crate::groundtruth::{Annotation, EmergenceRegion, SepPoint, Species};
use crate::raster::MultiChannelRaster;

pub const CHANNELS: usize = 4;

/// One rendered frame with its exact annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub image: MultiChannelRaster,
    pub annotation: Annotation,
    pub frame: usize,
    pub timestamp: f64,
}

type Rgbn = [f32; 4];

const SOIL: Rgbn = [0.42, 0.33, 0.24, 0.25];
const CROP_LEAF: Rgbn = [0.18, 0.50, 0.14, 0.85];
const CROP_HEART: Rgbn = [0.45, 0.75, 0.30, 0.90];
const WEED_LEAF: Rgbn = [0.27, 0.55, 0.22, 0.80];
const WEED_HEART: Rgbn = [0.50, 0.68, 0.32, 0.85];
const BLADE: Rgbn = [0.33, 0.60, 0.22, 0.75];
const GRASS_BASE: Rgbn = [0.30, 0.40, 0.18, 0.60];

/// 2x2 supersampling offsets within a pixel.
const SAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

/// Tileable two-octave value noise for the soil, in world millimeters.
struct Soil {
    lattice: Vec<f32>,
}

const SOIL_TILE: usize = 128;

impl Soil {
    fn new(seed: u64, epoch: u32) -> Self {
        let mut rng = stream_rng(seed, Stream::Soil { epoch });
        Self { lattice: (0..SOIL_TILE * SOIL_TILE).map(|_| rng.random_range(-1.0f32..1.0)).collect() }
    }

    fn octave(&self, x: f64, y: f64) -> f32 {
        let (fx, fy) = (x.floor(), y.floor());
        let (tx, ty) = ((x - fx) as f32, (y - fy) as f32);
        let wrap = |v: f64| (v as i64).rem_euclid(SOIL_TILE as i64) as usize;
        let (x0, y0) = (wrap(fx), wrap(fy));
        let (x1, y1) = ((x0 + 1) % SOIL_TILE, (y0 + 1) % SOIL_TILE);
        let at = |x: usize, y: usize| self.lattice[y * SOIL_TILE + x];
        let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    fn value(&self, p: (f64, f64)) -> f32 {
        0.65 * self.octave(p.0 / 4.0, p.1 / 4.0) + 0.35 * self.octave(p.0 / 16.0 + 57.0, p.1 / 16.0 + 31.0)
    }
}

pub fn render_views(field: &FieldTruth, run_label: &str) -> Result<Vec<View>> {
    let soil = Soil::new(field.config.rng_seed, field.epoch);
    field
        .trajectory
        .iter()
        .enumerate()
        .map(|(i, step)| render_with(field, &soil, i, step, &format!("{run_label}_{i:05}")))
        .collect()
}

/// Renders frame `frame` of the field's trajectory.
pub fn render_view(field: &FieldTruth, frame: usize, image_id: &str) -> Result<View> {
    let soil = Soil::new(field.config.rng_seed, field.epoch);
    let step = field.trajectory.get(frame).ok_or_else(|| {
        crate::error::Error::InvalidArgument(format!("frame {frame} beyond trajectory of {}", field.trajectory.len()))
    })?;
    render_with(field, &soil, frame, step, image_id)
}

fn render_with(field: &FieldTruth, soil: &Soil, frame: usize, step: &TrueStep, image_id: &str) -> Result<View> {
    let cfg = &field.config;
    let cam = cfg.camera();
    let pose = Pose2D::exact(step.x, step.y, step.theta);
    let (w, h) = (cfg.image_width, cfg.image_height);

    let center = pixel_world(&cam, &pose, cam.principal_point.0, cam.principal_point.1)?;
    let half_diag = 0.5 * ((w * w + h * h) as f64).sqrt() * cam.mm_per_px() + 1.0;
    let nearby: Vec<&Plant> = field
        .plants
        .iter()
        .filter(|p| (p.sep.0 - center.0).hypot(p.sep.1 - center.1) <= half_diag + p.extent)
        .collect();

    let mut rng = stream_rng(cfg.rng_seed, Stream::Frame { epoch: field.epoch, frame });
    let gain: f32 = rng.random_range(0.92..1.08);
    let noise = Normal::new(0.0f32, 0.01).expect("valid sigma");
    let mut data = Vec::with_capacity(w * h * CHANNELS);
    for py in 0..h {
        for px in 0..w {
            let mut acc = [0.0f32; CHANNELS];
            for (ox, oy) in SAMPLES {
                let p = pixel_world(&cam, &pose, px as f64 + ox, py as f64 + oy)?;
                let c = shade(p, &nearby, soil);
                for k in 0..CHANNELS {
                    acc[k] += 0.25 * c[k];
                }
            }
            for a in acc {
                data.push((a * gain + noise.sample(&mut rng)).clamp(0.0, 1.0));
            }
        }
    }
    let image = MultiChannelRaster::new(w, h, CHANNELS, data)?;
    let annotation = annotate(field, &nearby, &cam, &pose, image_id)?;
    Ok(View { image, annotation, frame, timestamp: step.timestamp })
}

fn pixel_world(cam: &CameraConfig, pose: &Pose2D, x: f64, y: f64) -> Result<(f64, f64)> {
    project_detection(&Detection { x, y, confidence: 1.0 }, pose, cam)
}

/// Color of the topmost surface at world point `p`; later plants paint over
/// earlier ones.
fn shade(p: (f64, f64), plants: &[&Plant], soil: &Soil) -> Rgbn {
    let mut color = None;
    for plant in plants {
        let (dx, dy) = (p.0 - plant.sep.0, p.1 - plant.sep.1);
        if dx * dx + dy * dy > plant.extent * plant.extent {
            continue;
        }
        if let Some(c) = plant_color(plant, (dx, dy)) {
            color = Some(c);
        }
    }
    color.unwrap_or_else(|| {
        let n = 1.0 + 0.12 * soil.value(p);
        SOIL.map(|v| v * n)
    })
}

fn plant_color(plant: &Plant, (dx, dy): (f64, f64)) -> Option<Rgbn> {
    let crop = plant.species == Species::Crop;
    match &plant.form {
        PlantForm::Rosette { leaves, heart_radius } => {
            if dx * dx + dy * dy <= heart_radius * heart_radius {
                return Some(if crop { CROP_HEART } else { WEED_HEART });
            }
            let base = if crop { CROP_LEAF } else { WEED_LEAF };
            for leaf in leaves {
                let (s, c) = leaf.angle.sin_cos();
                let a = 0.5 * leaf.length;
                let b = 0.5 * leaf.width;
                let u = dx * c + dy * s - a;
                let v = -dx * s + dy * c;
                let r = (u / a).powi(2) + (v / b).powi(2);
                if r <= 1.0 {
                    // brighter midrib
                    let k = (leaf.shade * (0.85 + 0.15 * (1.0 - (v / b).abs()))) as f32;
                    return Some(tint(base, k));
                }
            }
            None
        }
        PlantForm::Grass { region, blades } => {
            if point_in_polygon((dx, dy), region) {
                return Some(GRASS_BASE);
            }
            for blade in blades {
                let (s, c) = blade.angle.sin_cos();
                let (qx, qy) = (dx - blade.start.0, dy - blade.start.1);
                let t = (qx * c + qy * s).clamp(0.0, blade.length);
                let (ex, ey) = (qx - t * c, qy - t * s);
                // blades taper towards the tip
                let half = 0.5 * blade.width * (1.0 - 0.6 * t / blade.length);
                if ex * ex + ey * ey <= half * half {
                    return Some(tint(BLADE, blade.shade as f32));
                }
            }
            None
        }
    }
}

fn tint(c: Rgbn, k: f32) -> Rgbn {
    [c[0] * k, c[1] * k, c[2] * k, c[3] * k]
}

fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Every plant whose SEP falls inside the image. Grasses carry their
/// emergence polygon unless it is clipped by the border, in which case the
/// centroid is given as a point.
fn annotate(
    field: &FieldTruth,
    plants: &[&Plant],
    cam: &CameraConfig,
    pose: &Pose2D,
    image_id: &str,
) -> Result<Annotation> {
    let (w, h) = (field.config.image_width as f64, field.config.image_height as f64);
    let inside = |(x, y): (f64, f64)| x >= -0.5 && y >= -0.5 && x <= w - 0.5 && y <= h - 0.5;
    let mut ann = Annotation { image_id: image_id.to_string(), seps: Vec::new(), regions: Vec::new() };
    for plant in plants {
        let px = world_to_pixel(plant.sep, pose, cam)?;
        if !inside(px) {
            continue;
        }
        if let Some(region) = plant.world_region() {
            let poly = region.iter().map(|&q| world_to_pixel(q, pose, cam)).collect::<Result<Vec<_>>>()?;
            if poly.iter().all(|&q| inside(q)) {
                ann.regions.push(EmergenceRegion { polygon: poly, species: plant.species });
                continue;
            }
        }
        ann.seps.push(SepPoint { x: px.0, y: px.1, species: plant.species });
    }
    Ok(ann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthfield::{generate_field, FieldConfig};

    #[test]
    fn views_are_deterministic_and_valid() {
        let f = generate_field(&FieldConfig { rng_seed: 7, ..Default::default() }).unwrap();
        let a = render_views(&f, "run").unwrap();
        let b = render_views(&f, "run").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), f.trajectory.len());
        for v in &a {
            v.annotation.validate(64, 64).unwrap();
            assert!(v.image.data().iter().all(|x| (0.0..=1.0).contains(x)));
        }
        assert!(a.iter().map(|v| v.annotation.all_seps().unwrap().len()).sum::<usize>() > 20);
    }

    #[test]
    fn nadir_plant_sits_at_principal_point() {
        let cfg = FieldConfig { weed_density_per_m2: 0.0, position_jitter_mm: 0.0, ..Default::default() };
        let mut f = generate_field(&cfg).unwrap();
        let s = f.trajectory[0];
        f.plants.truncate(1);
        f.plants[0].sep = (s.x, s.y);
        let v = render_view(&f, 0, "x").unwrap();
        let sep = v.annotation.seps[0];
        assert!((sep.x - 31.5).abs() <= 0.5 && (sep.y - 31.5).abs() <= 0.5);
        // vegetation is bright in NIR
        assert!(v.image.get(31, 31, 3) > 0.6);
        assert!(v.image.get(0, 0, 3) < 0.4);
    }

    #[test]
    fn polygon_membership() {
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        assert!(point_in_polygon((1.0, 1.0), &sq));
        assert!(!point_in_polygon((3.0, 1.0), &sq));
    }
}
