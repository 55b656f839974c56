//! Difficulty modeling for single-voice woodwind parts, implemented for the
//! tenor saxophone.
//!
//! The pipeline:
//!
//! 1. [`trill`] turns f0 tracks of recorded trills into maximum trill speeds.
//! 2. [`features`] encodes fingering transitions as feature vectors.
//! 3. [`model`] fits regressors from transition features to trill speed and
//!    runs the cross-validated comparison of schemes and model classes.
//! 4. [`sampling`] selects training subsets and plans recording sessions.
//! 5. [`difficulty`] decodes the fastest fingering path through a part and
//!    rates every transition against the tempo.

pub mod assets;
pub mod batch;
pub mod difficulty;
pub mod error;
pub mod features;
pub mod fingering;
pub mod kmeans;
pub mod model;
pub mod observations;
pub mod optim;
pub mod sampling;
pub mod seed;
pub mod synth;
mod tabular;
pub mod trill;

pub use error::{Error, Result};
pub use fingering::{Finger, Fingering, FingeringChart, KeyMask, KeyTable, Mapping, Transition};

/// Key table plus chart, the instrument description every stage consumes.
#[derive(Clone, Debug)]
pub struct Instrument {
    pub keys: KeyTable,
    pub chart: FingeringChart,
}

impl Instrument {
    pub fn bundled() -> Instrument {
        let keys = KeyTable::bundled();
        let chart = FingeringChart::bundled(&keys);
        Instrument { keys, chart }
    }
}
