//! Plant geometry. Rosettes (crops and broadleaf weeds) are elliptical leaves
//! radiating from the SEP; grasses are blades sprouting from a small
//! emergence polygon whose area centroid is the SEP.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::groundtruth::{region_to_sep, Species};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthStage {
    Early,
    #[default]
    Mid,
    Late,
}

impl GrowthStage {
    fn leaf_count(self) -> (u32, u32) {
        match self {
            GrowthStage::Early => (2, 4),
            GrowthStage::Mid => (4, 6),
            GrowthStage::Late => (6, 8),
        }
    }

    /// Leaf length range in mm.
    fn leaf_length(self) -> (f64, f64) {
        match self {
            GrowthStage::Early => (8.0, 14.0),
            GrowthStage::Mid => (14.0, 22.0),
            GrowthStage::Late => (22.0, 32.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub angle: f64,
    pub length: f64,
    pub width: f64,
    /// Brightness multiplier.
    pub shade: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blade {
    /// Start relative to the SEP, mm.
    pub start: (f64, f64),
    pub angle: f64,
    pub length: f64,
    pub width: f64,
    pub shade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlantForm {
    Rosette { leaves: Vec<Leaf>, heart_radius: f64 },
    /// `region` is relative to the SEP, which is its area centroid.
    Grass { region: Vec<(f64, f64)>, blades: Vec<Blade> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub id: usize,
    pub species: Species,
    /// World SEP, mm.
    pub sep: (f64, f64),
    pub form: PlantForm,
    /// Radius around the SEP containing everything rendered for the plant.
    pub extent: f64,
}

impl Plant {
    /// `anchor` is the SEP for rosettes and the polygon's generating center
    /// for grasses (the SEP becomes the polygon centroid).
    pub(crate) fn grow(
        id: usize,
        species: Species,
        anchor: (f64, f64),
        grass: bool,
        stage: GrowthStage,
        rng: &mut ChaCha8Rng,
    ) -> Plant {
        let mut plant = Plant {
            id,
            species,
            sep: anchor,
            form: PlantForm::Rosette { leaves: Vec::new(), heart_radius: 0.0 },
            extent: 0.0,
        };
        if grass {
            let (region, offset) = emergence_region(rng, stage);
            plant.sep = (anchor.0 + offset.0, anchor.1 + offset.1);
            plant.form = PlantForm::Grass { region, blades: Vec::new() };
        }
        plant.regrow(rng, stage);
        plant
    }

    /// Redraws leaves or blades; SEP and emergence region stay fixed.
    pub(crate) fn regrow(&mut self, rng: &mut ChaCha8Rng, stage: GrowthStage) {
        let (lo, hi) = stage.leaf_length();
        match &mut self.form {
            PlantForm::Rosette { leaves, heart_radius } => {
                let (cmin, cmax) = stage.leaf_count();
                let count = rng.random_range(cmin..=cmax);
                let phase = rng.random_range(0.0..TAU);
                *leaves = (0..count)
                    .map(|k| {
                        let length = rng.random_range(lo..hi);
                        Leaf {
                            angle: phase + TAU * k as f64 / count as f64 + rng.random_range(-0.3..0.3),
                            length,
                            width: length * rng.random_range(0.35..0.55),
                            shade: rng.random_range(0.85..1.15),
                        }
                    })
                    .collect();
                *heart_radius = rng.random_range(1.5..2.5) + 0.05 * lo;
                self.extent = leaves.iter().map(|l| l.length).fold(*heart_radius, f64::max);
            }
            PlantForm::Grass { region, blades } => {
                let count = rng.random_range(2..=4) + stage.leaf_count().0 / 2;
                *blades = (0..count)
                    .map(|_| {
                        let v = region[rng.random_range(0..region.len())];
                        let s = rng.random_range(0.0..0.7);
                        Blade {
                            start: (s * v.0, s * v.1),
                            angle: rng.random_range(0.0..TAU),
                            length: 1.5 * rng.random_range(lo..hi),
                            width: rng.random_range(1.5..2.5),
                            shade: rng.random_range(0.85..1.15),
                        }
                    })
                    .collect();
                let reach = region.iter().map(|v| v.0.hypot(v.1)).fold(0.0, f64::max);
                self.extent = blades
                    .iter()
                    .map(|b| b.start.0.hypot(b.start.1) + b.length + b.width)
                    .fold(reach, f64::max);
            }
        }
    }

    /// Mean leaf (or blade) length, mm.
    pub fn mean_leaf_length(&self) -> f64 {
        match &self.form {
            PlantForm::Rosette { leaves, .. } => leaves.iter().map(|l| l.length).sum::<f64>() / leaves.len() as f64,
            PlantForm::Grass { blades, .. } => blades.iter().map(|b| b.length).sum::<f64>() / blades.len() as f64,
        }
    }

    /// Emergence polygon in world coordinates, for grasses.
    pub fn world_region(&self) -> Option<Vec<(f64, f64)>> {
        match &self.form {
            PlantForm::Grass { region, .. } => {
                Some(region.iter().map(|&(x, y)| (self.sep.0 + x, self.sep.1 + y)).collect())
            }
            PlantForm::Rosette { .. } => None,
        }
    }
}

/// Star-shaped polygon around the origin, shifted so its centroid is the
/// origin. Returns the polygon and the shift applied to the anchor.
fn emergence_region(rng: &mut ChaCha8Rng, stage: GrowthStage) -> (Vec<(f64, f64)>, (f64, f64)) {
    let n = rng.random_range(5..=7);
    let base = match stage {
        GrowthStage::Early => 2.5,
        GrowthStage::Mid => 3.5,
        GrowthStage::Late => 4.5,
    };
    let mut angles: Vec<f64> = (0..n).map(|k| (k as f64 + rng.random_range(0.1..0.9)) * TAU / n as f64).collect();
    angles.sort_by(f64::total_cmp);
    let raw: Vec<(f64, f64)> = angles
        .iter()
        .map(|&a| {
            let r = base * rng.random_range(0.7..1.3);
            (r * a.cos(), r * a.sin())
        })
        .collect();
    let c = region_to_sep(&raw).expect("star polygon has positive area");
    (raw.iter().map(|&(x, y)| (x - c.0, y - c.1)).collect(), c)
}
