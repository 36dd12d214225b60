use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::region_to_sep;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Crop,
    Weed,
}

/// A point SEP, as annotated for rosette plants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepPoint {
    pub x: f64,
    pub y: f64,
    pub species: Species,
}

/// An emergence region outlined by a polygon, as annotated for grass weeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergenceRegion {
    pub polygon: Vec<(f64, f64)>,
    pub species: Species,
}

/// Ground truth of one image, with uncertain instances already removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image_id: String,
    pub seps: Vec<SepPoint>,
    pub regions: Vec<EmergenceRegion>,
}

impl Annotation {
    /// Every SEP of the image: point SEPs first, then region centroids.
    pub fn all_seps(&self) -> Result<Vec<(f64, f64, Species)>> {
        let mut out: Vec<_> = self.seps.iter().map(|s| (s.x, s.y, s.species)).collect();
        for r in &self.regions {
            let (x, y) = region_to_sep(&r.polygon)?;
            out.push((x, y, r.species));
        }
        Ok(out)
    }

    /// Checks bounds and polygon simplicity for a `width` x `height` image.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let inside = |x: f64, y: f64| {
            x >= -0.5 && y >= -0.5 && x <= width as f64 - 0.5 && y <= height as f64 - 0.5
        };
        for s in &self.seps {
            if !inside(s.x, s.y) {
                return Err(Error::InvalidArgument(format!(
                    "{}: SEP ({}, {}) outside the image",
                    self.image_id, s.x, s.y
                )));
            }
        }
        for r in &self.regions {
            if r.polygon.iter().any(|&(x, y)| !inside(x, y)) {
                return Err(Error::InvalidArgument(format!(
                    "{}: region vertex outside the image",
                    self.image_id
                )));
            }
            if !is_simple(&r.polygon) {
                return Err(Error::InvalidArgument(format!(
                    "{}: self-intersecting region polygon",
                    self.image_id
                )));
            }
            region_to_sep(&r.polygon)?;
        }
        Ok(())
    }

    pub fn to_file(&self) -> AnnotationFile {
        AnnotationFile {
            image_id: self.image_id.clone(),
            seps: self
                .seps
                .iter()
                .map(|s| SepRecord { x: s.x, y: s.y, species: s.species, uncertain: false })
                .collect(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionRecord {
                    polygon: r.polygon.iter().map(|&(x, y)| [x, y]).collect(),
                    species: r.species,
                    uncertain: false,
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(AnnotationFile::load(path)?.into_annotation())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_file().save(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepRecord {
    pub x: f64,
    pub y: f64,
    pub species: Species,
    #[serde(default)]
    pub uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub polygon: Vec<[f64; 2]>,
    pub species: Species,
    #[serde(default)]
    pub uncertain: bool,
}

/// On-disk annotation JSON, one file per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub image_id: String,
    #[serde(default)]
    pub seps: Vec<SepRecord>,
    #[serde(default)]
    pub regions: Vec<RegionRecord>,
}

impl AnnotationFile {
    /// Drops the instances the annotator flagged as uncertain.
    pub fn into_annotation(self) -> Annotation {
        Annotation {
            image_id: self.image_id,
            seps: self
                .seps
                .into_iter()
                .filter(|s| !s.uncertain)
                .map(|s| SepPoint { x: s.x, y: s.y, species: s.species })
                .collect(),
            regions: self
                .regions
                .into_iter()
                .filter(|r| !r.uncertain)
                .map(|r| EmergenceRegion {
                    polygon: r.polygon.into_iter().map(|[x, y]| (x, y)).collect(),
                    species: r.species,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn is_simple(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let b = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64))) -> bool {
    fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    let (d1, d2) = (orient(b.0, b.1, a.0), orient(b.0, b.1, a.1));
    let (d3, d4) = (orient(a.0, a.1, b.0), orient(a.0, a.1, b.1));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "image_id": "img_0001",
        "seps": [
            {"x": 10.5, "y": 4.0, "species": "crop", "uncertain": false},
            {"x": 3.0, "y": 3.0, "species": "weed", "uncertain": true}
        ],
        "regions": [
            {"polygon": [[0,0],[4,0],[4,4],[0,4]], "species": "weed", "uncertain": false}
        ]
    }"#;

    #[test]
    fn uncertain_instances_are_dropped_at_load() {
        let ann = AnnotationFile::from_json(SAMPLE).unwrap().into_annotation();
        assert_eq!(ann.seps.len(), 1);
        assert_eq!(ann.regions.len(), 1);
        let seps = ann.all_seps().unwrap();
        assert_eq!(seps[1], (2.0, 2.0, Species::Weed));
    }

    #[test]
    fn file_round_trip_keeps_flags() {
        let file = AnnotationFile::from_json(SAMPLE).unwrap();
        let a = file.to_json().unwrap();
        let b = AnnotationFile::from_json(&a).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"uncertain\": true"));
    }

    #[test]
    fn bowtie_is_not_simple() {
        let ann = Annotation {
            image_id: "b".into(),
            seps: vec![],
            regions: vec![EmergenceRegion {
                polygon: vec![(0.0, 0.0), (4.0, 4.0), (4.0, 0.0), (0.0, 4.0)],
                species: Species::Weed,
            }],
        };
        assert!(ann.validate(8, 8).is_err());
    }

    #[test]
    fn out_of_bounds_sep_fails_validation() {
        let ann = Annotation {
            image_id: "o".into(),
            seps: vec![SepPoint { x: 9.0, y: 1.0, species: Species::Crop }],
            regions: vec![],
        };
        assert!(ann.validate(8, 8).is_err());
        assert!(ann.validate(10, 8).is_ok());
    }
}
