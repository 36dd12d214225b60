//! CSV formats: robot trajectories and landmark maps.
//!
//! Floats are written in shortest round-trip form, so write → read → write
//! is byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GnssFix, Landmark, LandmarkMap, OdometryMeasurement, OdometryNoise};
use crate::error::{Error, Result};

/// One trajectory row: odometry since the previous row plus an optional fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub timestamp: f64,
    pub odo_dist_mm: f64,
    pub odo_dtheta_rad: f64,
    pub gnss_x_mm: Option<f64>,
    pub gnss_y_mm: Option<f64>,
    pub gnss_sigma_mm: Option<f64>,
}

impl TrajectoryRecord {
    pub fn fix(&self) -> Option<GnssFix> {
        match (self.gnss_x_mm, self.gnss_y_mm, self.gnss_sigma_mm) {
            (Some(x), Some(y), Some(sigma)) => Some(GnssFix { timestamp: self.timestamp, x, y, sigma }),
            _ => None,
        }
    }

    pub fn odometry(&self, noise: OdometryNoise) -> OdometryMeasurement {
        OdometryMeasurement { timestamp: self.timestamp, distance: self.odo_dist_mm, dtheta: self.odo_dtheta_rad, noise }
    }

    /// Splits rows into the odometry and GNSS streams.
    pub fn split(rows: &[TrajectoryRecord], noise: OdometryNoise) -> (Vec<OdometryMeasurement>, Vec<GnssFix>) {
        (rows.iter().map(|r| r.odometry(noise)).collect(), rows.iter().filter_map(TrajectoryRecord::fix).collect())
    }
}

pub fn trajectory_to_csv(rows: &[TrajectoryRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    into_string(w)
}

pub fn trajectory_from_csv(text: &str) -> Result<Vec<TrajectoryRecord>> {
    let mut rows = Vec::new();
    for (i, rec) in reader(text).deserialize::<TrajectoryRecord>().enumerate() {
        let r = rec.map_err(csv_err)?;
        let given = [r.gnss_x_mm, r.gnss_y_mm, r.gnss_sigma_mm].iter().filter(|v| v.is_some()).count();
        if given != 0 && given != 3 {
            return Err(Error::Format(format!("trajectory row {}: partial GNSS fix", i + 1)));
        }
        let values = [Some(r.timestamp), Some(r.odo_dist_mm), Some(r.odo_dtheta_rad), r.gnss_x_mm, r.gnss_y_mm, r.gnss_sigma_mm];
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("trajectory row {}: non-finite value", i + 1)));
        }
        rows.push(r);
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct LandmarkRow {
    x_mm: f64,
    y_mm: f64,
    confidence: f64,
    observations: u32,
}

/// Run metadata travels in leading `# key=value` comment lines.
pub fn landmarks_to_csv(map: &LandmarkMap) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for l in &map.landmarks {
        w.serialize(LandmarkRow { x_mm: l.x, y_mm: l.y, confidence: l.confidence, observations: l.observations })
            .map_err(csv_err)?;
    }
    if map.landmarks.is_empty() {
        w.write_record(["x_mm", "y_mm", "confidence", "observations"]).map_err(csv_err)?;
    }
    Ok(format!("# run_id={}\n# date_tag={}\n{}", map.run_id, map.date_tag, into_string(w)?))
}

pub fn landmarks_from_csv(text: &str) -> Result<LandmarkMap> {
    let mut map = LandmarkMap::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
            match k.trim() {
                "run_id" => map.run_id = v.to_string(),
                "date_tag" => map.date_tag = v.to_string(),
                _ => {}
            }
        }
    }
    for rec in reader(text).deserialize::<LandmarkRow>() {
        let r = rec.map_err(csv_err)?;
        if ![r.x_mm, r.y_mm, r.confidence].iter().all(|v| v.is_finite()) {
            return Err(Error::Format("non-finite landmark value".into()));
        }
        map.landmarks.push(Landmark { x: r.x_mm, y: r.y_mm, confidence: r.confidence, observations: r.observations });
    }
    Ok(map)
}

pub fn save_trajectory(rows: &[TrajectoryRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, trajectory_to_csv(rows)?)?;
    Ok(())
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    trajectory_from_csv(&fs::read_to_string(path)?)
}

pub fn save_landmarks(map: &LandmarkMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, landmarks_to_csv(map)?)?;
    Ok(())
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkMap> {
    landmarks_from_csv(&fs::read_to_string(path)?)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip_with_missing_fixes() {
        let rows = vec![
            TrajectoryRecord { timestamp: 0.0, odo_dist_mm: 0.0, odo_dtheta_rad: 0.0, gnss_x_mm: Some(1.5), gnss_y_mm: Some(-2.25), gnss_sigma_mm: Some(3.2) },
            TrajectoryRecord { timestamp: 0.5, odo_dist_mm: 100.1, odo_dtheta_rad: -0.01, gnss_x_mm: None, gnss_y_mm: None, gnss_sigma_mm: None },
        ];
        let csv = trajectory_to_csv(&rows).unwrap();
        assert!(csv.starts_with("timestamp,odo_dist_mm,odo_dtheta_rad,gnss_x_mm,gnss_y_mm,gnss_sigma_mm\n"));
        assert!(csv.contains("\n0.5,100.1,-0.01,,,\n"), "{csv}");
        let back = trajectory_from_csv(&csv).unwrap();
        assert_eq!(back, rows);
        assert_eq!(trajectory_to_csv(&back).unwrap(), csv);
        let (odom, fixes) = TrajectoryRecord::split(&back, OdometryNoise::default());
        assert_eq!((odom.len(), fixes.len()), (2, 1));
    }

    #[test]
    fn landmark_round_trip() {
        let map = LandmarkMap {
            run_id: "run-a".into(),
            date_tag: "day0".into(),
            landmarks: vec![Landmark { x: 0.1 + 0.2, y: -1e-300, confidence: 1.0 / 3.0, observations: 7 }],
        };
        let csv = landmarks_to_csv(&map).unwrap();
        assert!(csv.contains("x_mm,y_mm,confidence,observations\n"));
        let back = landmarks_from_csv(&csv).unwrap();
        assert_eq!(back, map);
        assert_eq!(landmarks_to_csv(&back).unwrap(), csv);
        let empty = LandmarkMap::default();
        assert_eq!(landmarks_from_csv(&landmarks_to_csv(&empty).unwrap()).unwrap(), empty);
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(matches!(landmarks_from_csv("x_mm,y_mm,confidence,observations\n1,2\n"), Err(Error::Format(_))));
        let partial = "timestamp,odo_dist_mm,odo_dtheta_rad,gnss_x_mm,gnss_y_mm,gnss_sigma_mm\n1,2,3,4,,\n";
        assert!(trajectory_from_csv(partial).is_err());
    }
}
