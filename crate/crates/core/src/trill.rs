//! Maximum sustained trill speed from the f0 track of one recorded trill.
//!
//! Frames below the confidence threshold are dropped, the remaining f0 values
//! are split into two pitch clusters, and complete trills (note 1, note 2,
//! note 1) are counted over three overlapping windows: the first half, the
//! middle two quarters and the second half of the track. The fastest window
//! gives the trill speed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::two_means_1d;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F0Frame {
    pub time: f64,
    pub frequency: f64,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct F0Track {
    frames: Vec<F0Frame>,
    pub source_id: String,
}

impl F0Track {
    pub fn new(frames: Vec<F0Frame>, source_id: impl Into<String>) -> Result<F0Track> {
        let source_id = source_id.into();
        if let Some(w) = frames.windows(2).find(|w| !(w[1].time > w[0].time)) {
            return Err(Error::load(
                &source_id,
                format!("frame times must be strictly increasing ({} then {})", w[0].time, w[1].time),
            ));
        }
        Ok(F0Track { frames, source_id })
    }

    /// CSV with a `time,frequency,confidence` header.
    pub fn from_csv(text: &str, source_id: &str) -> Result<F0Track> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut frames = Vec::new();
        for row in rdr.deserialize::<F0Frame>() {
            frames.push(row.map_err(|e| Error::load(source_id, e.to_string()))?);
        }
        F0Track::new(frames, source_id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<F0Track> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(&name, e.to_string()))?;
        F0Track::from_csv(&text, &name)
    }

    pub fn frames(&self) -> &[F0Frame] {
        &self.frames
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,frequency,confidence\n");
        for f in &self.frames {
            out.push_str(&format!("{},{},{}\n", f.time, f.frequency, f.confidence));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractionConfig {
    /// Frames with lower tracker confidence are dropped.
    pub min_confidence: f64,
    /// Fewest retained frames needed to cluster.
    pub min_frames: usize,
    /// A note visit needs at least this many consecutive frames.
    pub min_run: usize,
    /// A cluster smaller than this fraction of the other is discarded once.
    pub small_cluster_ratio: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            min_confidence: 0.3,
            min_frames: 20,
            min_run: 2,
            small_cluster_ratio: 0.2,
        }
    }
}

/// MIDI number of a frequency at A = 440 Hz, unrounded.
pub fn hz_to_midi(hz: f64) -> f64 {
    69.0 + 12.0 * (hz / 440.0).log2()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PitchClusters {
    /// Cluster per track frame (0 = lower pitch); `None` for dropped frames.
    pub assignments: Vec<Option<u8>>,
    /// Rounded MIDI of each cluster's median f0, lower first.
    pub midi: [i32; 2],
    /// The small-cluster discard and rerun happened.
    pub rerun: bool,
}

pub fn cluster_pitches(track: &F0Track, cfg: &ExtractionConfig) -> Result<PitchClusters> {
    let mut kept: Vec<usize> = track
        .frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.confidence >= cfg.min_confidence && f.frequency > 0.0 && f.frequency.is_finite())
        .map(|(i, _)| i)
        .collect();
    if kept.len() < cfg.min_frames {
        return Err(Error::TooFewFrames {
            found: kept.len(),
            required: cfg.min_frames,
        });
    }

    let fit = |idx: &[usize]| two_means_1d(&idx.iter().map(|&i| track.frames[i].frequency).collect::<Vec<_>>()).0;
    let mut labels = fit(&kept);
    let mut rerun = false;
    let sizes = |labels: &[u8]| {
        let ones = labels.iter().filter(|&&l| l == 1).count();
        [labels.len() - ones, ones]
    };
    let [n0, n1] = sizes(&labels);
    let (small, large) = if n0 < n1 { (0u8, n1) } else { (1u8, n0) };
    if (sizes(&labels)[small as usize] as f64) < cfg.small_cluster_ratio * large as f64 {
        kept = kept
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l != small)
            .map(|(&i, _)| i)
            .collect();
        if kept.len() < cfg.min_frames {
            return Err(Error::TooFewFrames {
                found: kept.len(),
                required: cfg.min_frames,
            });
        }
        labels = fit(&kept);
        rerun = true;
    }

    let mut per_cluster: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&i, &l) in kept.iter().zip(&labels) {
        per_cluster[l as usize].push(track.frames[i].frequency);
    }
    let midi_of = |v: &mut Vec<f64>| hz_to_midi(median(v)).round() as i32;
    if per_cluster.iter().any(|c| c.is_empty()) {
        let all: &mut Vec<f64> = if per_cluster[0].is_empty() { &mut per_cluster[1] } else { &mut per_cluster[0] };
        return Err(Error::DegenerateTrill(midi_of(all)));
    }
    let midi = [midi_of(&mut per_cluster[0]), midi_of(&mut per_cluster[1])];
    if midi[0] == midi[1] {
        return Err(Error::DegenerateTrill(midi[0]));
    }

    let mut assignments = vec![None; track.frames.len()];
    for (&i, &l) in kept.iter().zip(&labels) {
        assignments[i] = Some(l);
    }
    Ok(PitchClusters { assignments, midi, rerun })
}

/// Debounced note visits: runs shorter than `min_run` are ignored and the
/// neighbouring runs of the same note merge.
fn visits(labels: impl Iterator<Item = u8>, min_run: usize) -> Vec<u8> {
    let mut runs: Vec<(u8, usize)> = Vec::new();
    for l in labels {
        match runs.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    let mut out: Vec<u8> = Vec::new();
    for (l, n) in runs {
        if n >= min_run && out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

/// Completed note 1 → note 2 → note 1 cycles among the frames whose time lies
/// in the closed `window`. Note 1 is whichever note is visited first.
pub fn count_complete_trills(assignments: &[Option<u8>], times: &[f64], window: (f64, f64), min_run: usize) -> usize {
    let labels = assignments
        .iter()
        .zip(times)
        .filter(|(_, &t)| t >= window.0 && t <= window.1)
        .filter_map(|(a, _)| *a);
    let v = visits(labels, min_run).len();
    if v < 3 {
        0
    } else {
        (v - 1) / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    FirstHalf,
    MiddleHalf,
    SecondHalf,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::FirstHalf, Segment::MiddleHalf, Segment::SecondHalf];

    /// Window as fractions of the track span.
    pub fn fractions(self) -> (f64, f64) {
        match self {
            Segment::FirstHalf => (0.0, 0.5),
            Segment::MiddleHalf => (0.25, 0.75),
            Segment::SecondHalf => (0.5, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrillResult {
    pub source_id: String,
    /// Sounding MIDI of the lower detected note.
    pub midi_low: i32,
    pub midi_high: i32,
    /// Complete trills per second in the fastest window.
    pub trill_speed: f64,
    pub segment: Segment,
    pub complete_trills_per_segment: [usize; 3],
    pub cluster_rerun: bool,
    pub interval_mismatch: bool,
}

pub fn extract_trill_speed(track: &F0Track, cfg: &ExtractionConfig) -> Result<TrillResult> {
    let clusters = cluster_pitches(track, cfg)?;
    let times = track.times();
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let span = t1 - t0;
    let mut counts = [0usize; 3];
    let mut best = (Segment::FirstHalf, f64::NEG_INFINITY);
    for (i, seg) in Segment::ALL.into_iter().enumerate() {
        let (a, b) = seg.fractions();
        let window = (t0 + a * span, t0 + b * span);
        counts[i] = count_complete_trills(&clusters.assignments, &times, window, cfg.min_run);
        let speed = counts[i] as f64 / (window.1 - window.0);
        if speed > best.1 {
            best = (seg, speed);
        }
    }
    Ok(TrillResult {
        source_id: track.source_id.clone(),
        midi_low: clusters.midi[0],
        midi_high: clusters.midi[1],
        trill_speed: best.1,
        segment: best.0,
        complete_trills_per_segment: counts,
        cluster_rerun: clusters.rerun,
        interval_mismatch: false,
    })
}

/// Outcome of comparing detected notes with the prompted pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IntervalCheck {
    /// Prompted pair transposed to sounding pitch, lower first.
    pub expected_sounding: (i32, i32),
    pub mismatch: bool,
}

/// Tenor saxophone sounds this many semitones below written pitch.
pub const TENOR_TRANSPOSITION: i32 = 14;

/// Flags a mismatch when the detected interval differs from the prompted one.
/// Mismatches are reported for manual review, never corrected.
pub fn verify_expected(result: &TrillResult, expected_written: (i32, i32), transposition_semitones: i32) -> IntervalCheck {
    let (a, b) = expected_written;
    let (lo, hi) = (a.min(b), a.max(b));
    let detected = (result.midi_high - result.midi_low).abs();
    IntervalCheck {
        expected_sounding: (lo - transposition_semitones, hi - transposition_semitones),
        mismatch: detected != hi - lo,
    }
}
