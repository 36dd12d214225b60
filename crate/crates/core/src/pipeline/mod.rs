//! The stages composed into file-level steps, plus the end-to-end
//! synthetic benchmark.

pub mod config;
mod e2e;
mod stages;
pub mod svg;

pub use config::{parse_acceptance, parse_thresholds, PipelineConfig};
pub use e2e::{derive_seed, Check, run_detector_benchmark, run_e2e, run_map_simulation, DetectorReport, E2eReport, MapReport};
pub use stages::*;

/// Progress messages on stderr unless quiet.
#[derive(Debug, Clone, Copy, Default)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}
