//! On-disk layout of a rendered run:
//!
//! ```text
//! <dir>/images/<id>.ppm        RGB
//! <dir>/images/<id>_nir.pgm    NIR
//! <dir>/annotations/<id>.json
//! <dir>/frames.csv             image_id,frame,timestamp
//! <dir>/trajectory.csv         noisy sensor streams
//! <dir>/field_truth.json
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FieldTruth, View};
use crate::error::{Error, Result};
use crate::geomap::{save_trajectory, TrajectoryRecord};
use crate::raster::io::{load_pnm, save_pnm};
use crate::raster::MultiChannelRaster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub image_id: String,
    pub frame: usize,
    pub timestamp: f64,
}

pub fn write_run(dir: &Path, field: &FieldTruth, views: &[View], trajectory: &[TrajectoryRecord]) -> Result<()> {
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("annotations"))?;
    let mut frames = csv::Writer::from_path(dir.join("frames.csv")).map_err(csv_err)?;
    for v in views {
        let id = &v.annotation.image_id;
        let (w, h) = (v.image.width(), v.image.height());
        let rgb = MultiChannelRaster::new(w, h, 3, v.image.data().chunks(4).flat_map(|p| [p[0], p[1], p[2]]).collect())?;
        let nir = MultiChannelRaster::new(w, h, 1, v.image.data().chunks(4).map(|p| p[3]).collect())?;
        save_pnm(&rgb, dir.join("images").join(format!("{id}.ppm")))?;
        save_pnm(&nir, dir.join("images").join(format!("{id}_nir.pgm")))?;
        v.annotation.save(dir.join("annotations").join(format!("{id}.json")))?;
        frames
            .serialize(FrameRecord { image_id: id.clone(), frame: v.frame, timestamp: v.timestamp })
            .map_err(csv_err)?;
    }
    frames.flush()?;
    save_trajectory(trajectory, dir.join("trajectory.csv"))?;
    fs::write(dir.join("field_truth.json"), field.to_json()?)?;
    Ok(())
}

pub fn load_frames(dir: &Path) -> Result<Vec<FrameRecord>> {
    let mut r = csv::Reader::from_path(dir.join("frames.csv")).map_err(csv_err)?;
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

/// RGB and NIR of one frame stacked into a 4-channel raster.
pub fn load_view_image(dir: &Path, image_id: &str) -> Result<MultiChannelRaster> {
    let rgb = load_pnm(dir.join("images").join(format!("{image_id}.ppm")))?;
    let nir = load_pnm(dir.join("images").join(format!("{image_id}_nir.pgm")))?;
    if rgb.channels() != 3 || nir.channels() != 1 || rgb.width() != nir.width() || rgb.height() != nir.height() {
        return Err(Error::Format(format!("{image_id}: RGB and NIR images do not pair up")));
    }
    let data = rgb
        .data()
        .chunks(3)
        .zip(nir.data())
        .flat_map(|(c, &n)| [c[0], c[1], c[2], n])
        .collect();
    MultiChannelRaster::new(rgb.width(), rgb.height(), 4, data)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundtruth::Annotation;
    use crate::synthfield::{corrupt_sensors, generate_field, render_views, FieldConfig, SensorNoise};

    #[test]
    fn run_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = generate_field(&FieldConfig { field_length_mm: 300.0, field_width_mm: 250.0, ..Default::default() }).unwrap();
        let views = render_views(&f, "r").unwrap();
        let traj = corrupt_sensors(&f.trajectory, &SensorNoise::default(), 3).unwrap();
        write_run(dir.path(), &f, &views, &traj).unwrap();
        let frames = load_frames(dir.path()).unwrap();
        assert_eq!(frames.len(), views.len());
        let img = load_view_image(dir.path(), &frames[1].image_id).unwrap();
        assert_eq!(img.channels(), 4);
        let max_err = img.data().iter().zip(views[1].image.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(max_err <= 0.5 / 255.0 + 1e-6);
        let ann = Annotation::load(dir.path().join("annotations").join("r_00001.json")).unwrap();
        assert_eq!(ann, views[1].annotation);
        let truth = FieldTruth::from_json(&fs::read_to_string(dir.path().join("field_truth.json")).unwrap()).unwrap();
        assert_eq!(truth, f);
    }
}
