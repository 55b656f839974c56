//! Measured trill speeds and the interval-frequency table used for wMSE.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};
use crate::fingering::{FingeringChart, KeyMask, Transition};
use crate::tabular::Table;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrillObservation {
    pub transition: Transition,
    /// Complete trills per second.
    pub speed: f64,
    pub player_id: String,
    pub session_id: String,
}

/// One CSV row: `player_id,session_id,mask_from,mask_to,midi_from,midi_to,speed`
/// plus an optional `review` column written by extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub player_id: String,
    pub session_id: String,
    pub mask_from: KeyMask,
    pub mask_to: KeyMask,
    pub midi_from: i32,
    pub midi_to: i32,
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<String>,
}

impl ObservationRecord {
    pub fn from_observation(o: &TrillObservation, review: Option<String>) -> ObservationRecord {
        ObservationRecord {
            player_id: o.player_id.clone(),
            session_id: o.session_id.clone(),
            mask_from: o.transition.from.mask,
            mask_to: o.transition.to.mask,
            midi_from: o.transition.from.written_midi,
            midi_to: o.transition.to.written_midi,
            speed: o.speed,
            review,
        }
    }
}

pub const OBSERVATION_HEADER: [&str; 8] = [
    "player_id",
    "session_id",
    "mask_from",
    "mask_to",
    "midi_from",
    "midi_to",
    "speed",
    "review",
];

/// Parses observations and resolves both fingerings against the chart.
pub fn parse_observations(text: &str, source: &str, chart: &FingeringChart) -> Result<Vec<TrillObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ObservationRecord>().enumerate() {
        let line = i + 2;
        let r = row.map_err(|e| Error::load(source, format!("row {line}: {e}")))?;
        let find = |mask, midi| {
            chart.find(mask, midi).cloned().ok_or_else(|| {
                Error::load(source, format!("row {line}: fingering {mask} for pitch {midi} is not in the chart"))
            })
        };
        if !(r.speed > 0.0 && r.speed.is_finite()) {
            return Err(Error::load(source, format!("row {line}: speed must be positive, got {}", r.speed)));
        }
        out.push(TrillObservation {
            transition: Transition::new(find(r.mask_from, r.midi_from)?, find(r.mask_to, r.midi_to)?),
            speed: r.speed,
            player_id: r.player_id,
            session_id: r.session_id,
        });
    }
    Ok(out)
}

pub fn load_observations(path: impl AsRef<Path>, chart: &FingeringChart) -> Result<Vec<TrillObservation>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::load(&name, e.to_string()))?;
    parse_observations(&text, &name, chart)
}

pub fn observations_to_csv(obs: &[TrillObservation]) -> Result<String> {
    records_to_csv(obs.iter().map(|o| ObservationRecord::from_observation(o, None)))
}

pub fn records_to_csv(records: impl IntoIterator<Item = ObservationRecord>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OBSERVATION_HEADER)?;
    for r in records {
        w.write_record([
            r.player_id,
            r.session_id,
            r.mask_from.to_bit_string(),
            r.mask_to.to_bit_string(),
            r.midi_from.to_string(),
            r.midi_to.to_string(),
            r.speed.to_string(),
            r.review.unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Relative frequency of each absolute interval (semitones) in repertoire.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalWeights {
    freq: BTreeMap<i32, f64>,
}

impl IntervalWeights {
    pub fn bundled() -> IntervalWeights {
        IntervalWeights::parse(assets::INTERVALS, "bundled interval table").expect("valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<IntervalWeights> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
        IntervalWeights::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<IntervalWeights> {
        let table = Table::parse(text, source)?;
        let (ci, cf) = (table.column("interval_semitones")?, table.column("relative_frequency")?);
        let mut freq = BTreeMap::new();
        for (line, f) in &table.rows {
            let i: i32 = table.parse_field(*line, "interval_semitones", &f[ci])?;
            let w: f64 = table.parse_field(*line, "relative_frequency", &f[cf])?;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(table.err(*line, "relative_frequency must be non-negative"));
            }
            freq.insert(i.abs(), w);
        }
        Ok(IntervalWeights { freq })
    }

    pub fn uniform(max_interval: i32) -> IntervalWeights {
        IntervalWeights {
            freq: (0..=max_interval).map(|i| (i, 1.0)).collect(),
        }
    }

    pub fn get(&self, interval: i32) -> Option<f64> {
        self.freq.get(&interval.abs()).copied()
    }

    /// Weight per observation; intervals missing from the table weigh 0.
    pub fn weights_for(&self, obs: &[&TrillObservation]) -> Vec<f64> {
        let mut missing = std::collections::BTreeSet::new();
        let w = obs
            .iter()
            .map(|o| {
                let i = o.transition.interval();
                self.get(i).unwrap_or_else(|| {
                    missing.insert(i);
                    0.0
                })
            })
            .collect();
        if !missing.is_empty() {
            log::warn!("interval table has no entry for intervals {missing:?}; weighting them 0");
        }
        w
    }
}
