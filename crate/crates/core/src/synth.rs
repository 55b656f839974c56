//! Synthetic inputs with known ground truth: square-wave f0 tracks and a
//! simulated trill-speed dataset recorded over planned sessions.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::features::{FeatureKind, FeatureScheme};
use crate::fingering::{FingeringChart, KeyTable, Transition};
use crate::observations::TrillObservation;
use crate::sampling::{default_anchors, plan_sessions};
use crate::seed;
use crate::trill::{F0Frame, F0Track};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackSpec {
    /// Complete trills per second.
    pub rate: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fps: f64,
    pub duration: f64,
    /// Fraction of frames replaced by an octave-up error.
    pub octave_errors: f64,
    /// Random confidences, plus a few low-confidence garbage frames.
    pub confidence_noise: bool,
}

impl TrackSpec {
    pub fn new(rate: f64, low_hz: f64, high_hz: f64) -> TrackSpec {
        TrackSpec {
            rate,
            low_hz,
            high_hz,
            fps: 100.0,
            duration: 2.0,
            octave_errors: 0.0,
            confidence_noise: false,
        }
    }
}

/// Square-wave alternation starting on the lower note.
pub fn square_wave_track(spec: &TrackSpec, seed: u64, source_id: &str) -> F0Track {
    let mut rng = seed::rng(seed);
    let n = (spec.duration * spec.fps).round() as usize;
    let mut frames: Vec<F0Frame> = (0..n)
        .map(|i| {
            let t = i as f64 / spec.fps;
            let upper = ((t * 2.0 * spec.rate).floor() as i64) % 2 == 1;
            F0Frame {
                time: t,
                frequency: if upper { spec.high_hz } else { spec.low_hz },
                confidence: if spec.confidence_noise { rng.random_range(0.5..1.0) } else { 0.9 },
            }
        })
        .collect();
    let errors = (spec.octave_errors * n as f64).round() as usize;
    for i in rand::seq::index::sample(&mut rng, n, errors.min(n)) {
        frames[i].frequency *= 2.0;
    }
    if spec.confidence_noise {
        for f in frames.iter_mut() {
            if rng.random::<f64>() < 0.03 {
                f.confidence = rng.random_range(0.0..0.25);
                f.frequency = rng.random_range(80.0..1200.0);
            }
        }
    }
    F0Track::new(frames, source_id).expect("times strictly increase")
}

/// Hidden speed model for simulated players: fast easy trills, slower with
/// wide leaps, same-finger motion, palm keys, low notes and two-hand moves.
pub fn hidden_speed(t: &Transition, keys: &KeyTable) -> f64 {
    let scheme = FeatureScheme::new("E-HB(NoM&EW)", FeatureKind::ExpertHandBased, false, None).expect("valid");
    let v = scheme.encode_values(t, keys);
    let [same, palm_l, palm_r, octave, low, left, right] = [v[0], v[1], v[2], v[3], v[4], v[5], v[6]];
    let interval = f64::from(t.interval().abs());
    let penalty = 0.045 * interval
        + 0.45 * same
        + 0.3 * palm_l
        + 0.3 * palm_r
        + 0.2 * octave
        + 0.35 * low
        + 0.07 * left
        + 0.1 * right
        + if left > 0.0 && right > 0.0 { 0.25 } else { 0.0 }
        + 0.04 * (left - right).powi(2);
    7.2 * (-penalty).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub players: usize,
    pub session_size: usize,
    /// Per-player speed factor spread (log scale).
    pub player_sigma: f64,
    /// Per-recording noise (log scale).
    pub noise_sigma: f64,
    pub min_speed: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            players: 5,
            session_size: 65,
            player_sigma: 0.06,
            noise_sigma: 0.12,
            min_speed: 0.55,
        }
    }
}

/// Every distinct-pitch pair of the chart, recorded once over planned
/// sessions, with the anchors recorded in every session.
pub fn simulated_dataset(chart: &FingeringChart, keys: &KeyTable, spec: &DatasetSpec, master: u64) -> Result<Vec<TrillObservation>> {
    let pairs = chart.unordered_pairs(false);
    let anchors = default_anchors(chart)?;
    let plan = plan_sessions(&pairs, spec.session_size, &anchors, seed::derive(master, "sessions", 0), chart, keys)?;
    let mut rng = seed::rng(seed::derive(master, "recordings", 0));
    let player_dist = Normal::new(0.0, spec.player_sigma.max(1e-12)).expect("finite sigma");
    let noise = Normal::new(0.0, spec.noise_sigma.max(1e-12)).expect("finite sigma");
    let player_factor: Vec<f64> = (0..spec.players.max(1)).map(|_| player_dist.sample(&mut rng).exp()).collect();
    let mut out = Vec::new();
    for (s, session) in plan.sessions.iter().enumerate() {
        let p = s % player_factor.len();
        for t in session {
            let speed = (hidden_speed(t, keys) * player_factor[p] * noise.sample(&mut rng).exp()).max(spec.min_speed);
            out.push(TrillObservation {
                transition: t.clone(),
                speed,
                player_id: format!("player{}", p + 1),
                session_id: format!("session{:02}", s + 1),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trill::{extract_trill_speed, ExtractionConfig};
    use crate::Instrument;

    #[test]
    fn clean_track_round_trips() {
        let spec = TrackSpec {
            duration: 6.0,
            ..TrackSpec::new(5.0, 220.0, 246.94)
        };
        let r = extract_trill_speed(&square_wave_track(&spec, 1, "x"), &ExtractionConfig::default()).unwrap();
        assert_eq!((r.midi_low, r.midi_high), (57, 59));
        assert!((r.trill_speed - 5.0).abs() / 5.0 < 0.1, "{}", r.trill_speed);
    }

    #[test]
    fn dataset_shape() {
        let inst = Instrument::bundled();
        let obs = simulated_dataset(&inst.chart, &inst.keys, &DatasetSpec::default(), 7).unwrap();
        let sessions: std::collections::BTreeSet<_> = obs.iter().map(|o| o.session_id.clone()).collect();
        assert_eq!(obs.len(), 735 + 6 * (sessions.len() - 1));
        assert!(obs.iter().all(|o| o.speed >= 0.55));
        assert_eq!(obs, simulated_dataset(&inst.chart, &inst.keys, &DatasetSpec::default(), 7).unwrap());
    }
}
