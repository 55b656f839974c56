use serde::Serialize;

use super::decode::{viterbi, PathObjective, TransitionScorer};
use super::musicxml::NotatedPart;
use crate::error::{Error, Result};
use crate::fingering::{Fingering, FingeringChart};

/// Trills per second needed between consecutive sounding notes: one
/// transition per available onset-to-onset gap, two per complete trill.
pub fn transition_requirements(part: &NotatedPart) -> Vec<f64> {
    let onsets: Vec<f64> = part.sounding().iter().map(|&i| part.notes[i].onset_beats).collect();
    onsets
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) * 60.0 / part.tempo_bpm;
            1.0 / (2.0 * d)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionDifficulty {
    /// Indices into the sounding notes.
    pub from: usize,
    pub to: usize,
    pub required_speed: f64,
    pub predicted_max: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoteDifficulty {
    /// Position among sounding notes.
    pub index: usize,
    /// Position in the part, rests included.
    pub part_index: usize,
    pub measure: String,
    pub written_midi: i32,
    pub fingering: String,
    pub difficulty: f64,
    pub incident_ratios: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub over_one: usize,
    pub fraction_over_one: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifficultyReport {
    pub source: String,
    pub tempo_bpm: f64,
    pub objective: PathObjective,
    pub path_value: f64,
    pub path: Vec<Fingering>,
    pub transitions: Vec<TransitionDifficulty>,
    pub notes: Vec<NoteDifficulty>,
    pub summary: Summary,
}

/// Chart options for every sounding note, in chart order.
pub fn lattice<'c>(part: &NotatedPart, chart: &'c FingeringChart) -> Result<Vec<Vec<&'c Fingering>>> {
    part.sounding()
        .iter()
        .map(|&i| {
            let n = &part.notes[i];
            let midi = n.written_midi.expect("sounding");
            chart.options_for_pitch(midi).map_err(|e| match e {
                Error::OutOfRange { midi, min, max, .. } => Error::OutOfRange {
                    midi,
                    min,
                    max,
                    context: format!(" in measure {}", n.measure),
                },
                other => other,
            })
        })
        .collect()
}

pub fn decode_fingerings<S: TransitionScorer + ?Sized>(
    part: &NotatedPart,
    chart: &FingeringChart,
    scorer: &S,
    objective: PathObjective,
) -> Result<(Vec<Fingering>, f64)> {
    let options = lattice(part, chart)?;
    let d = viterbi(&options, scorer, objective);
    let path = d.choice.iter().enumerate().map(|(i, &k)| options[i][k].clone()).collect();
    Ok((path, d.objective))
}

pub fn annotate<S: TransitionScorer + ?Sized>(
    part: &NotatedPart,
    chart: &FingeringChart,
    scorer: &S,
    objective: PathObjective,
) -> Result<DifficultyReport> {
    if !(part.tempo_bpm > 0.0 && part.tempo_bpm.is_finite()) {
        return Err(Error::Config(format!("tempo must be positive, got {}", part.tempo_bpm)));
    }
    let (path, path_value) = decode_fingerings(part, chart, scorer, objective)?;
    let required = transition_requirements(part);
    let transitions: Vec<TransitionDifficulty> = required
        .iter()
        .enumerate()
        .map(|(i, &req)| {
            let predicted = scorer.score(&path[i], &path[i + 1]);
            TransitionDifficulty {
                from: i,
                to: i + 1,
                required_speed: req,
                predicted_max: predicted,
                ratio: req / predicted,
            }
        })
        .collect();
    let sounding = part.sounding();
    let notes = sounding
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let mut incident = Vec::new();
            if i > 0 {
                incident.push(transitions[i - 1].ratio);
            }
            if i + 1 < sounding.len() {
                incident.push(transitions[i].ratio);
            }
            let difficulty = if incident.is_empty() {
                0.0
            } else {
                incident.iter().sum::<f64>() / incident.len() as f64
            };
            NoteDifficulty {
                index: i,
                part_index: pi,
                measure: part.notes[pi].measure.clone(),
                written_midi: part.notes[pi].written_midi.expect("sounding"),
                fingering: path[i].label.clone(),
                difficulty,
                incident_ratios: incident,
            }
        })
        .collect();
    let ratios: Vec<f64> = transitions.iter().map(|t| t.ratio).collect();
    let over_one = ratios.iter().filter(|r| **r > 1.0).count();
    let summary = if ratios.is_empty() {
        Summary {
            mean_ratio: 0.0,
            max_ratio: 0.0,
            over_one: 0,
            fraction_over_one: 0.0,
        }
    } else {
        Summary {
            mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
            max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            over_one,
            fraction_over_one: over_one as f64 / ratios.len() as f64,
        }
    };
    Ok(DifficultyReport {
        source: part.source.clone(),
        tempo_bpm: part.tempo_bpm,
        objective,
        path_value,
        path,
        transitions,
        notes,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difficulty::musicxml::tests::{n, score};
    use crate::difficulty::musicxml::{parse_part, Note};
    use crate::Instrument;

    fn part(onsets: &[f64], tempo: f64) -> NotatedPart {
        NotatedPart {
            notes: onsets
                .iter()
                .map(|&o| Note {
                    written_midi: Some(72),
                    onset_beats: o,
                    duration_beats: 0.5,
                    measure: "1".into(),
                })
                .collect(),
            tempo_bpm: tempo,
            source: "t".into(),
        }
    }

    #[test]
    fn requirement_arithmetic() {
        assert_eq!(transition_requirements(&part(&[0.0, 0.5], 120.0)), vec![2.0]);
        assert_eq!(transition_requirements(&part(&[0.0, 0.5], 240.0)), vec![4.0]);
        // quarter, quarter rest, note
        let xml = score(1, Some(120.0), &[&format!("{}<note><rest/><duration>1</duration></note>{}", n("C", 5, 1), n("D", 5, 1))]);
        let p = parse_part(xml.as_bytes(), "x", None).unwrap();
        assert_eq!(transition_requirements(&p), vec![0.5]);
    }

    #[test]
    fn ratios_and_note_means() {
        let inst = Instrument::bundled();
        let p = part(&[0.0, 0.5, 1.0], 120.0);
        let four = |_: &Fingering, _: &Fingering| 4.0;
        let r = annotate(&p, &inst.chart, &four, PathObjective::Sum).unwrap();
        assert!(r.transitions.iter().all(|t| t.ratio == 0.5));
        assert_eq!(r.notes.len(), 3);
        assert_eq!(r.notes[0].incident_ratios.len(), 1);
        assert_eq!(r.notes[1].incident_ratios.len(), 2);

        let floor = |_: &Fingering, _: &Fingering| 0.5;
        let r = annotate(&part(&[0.0, 1.0, 2.0], 120.0), &inst.chart, &floor, PathObjective::Sum).unwrap();
        assert!(r.transitions.iter().all(|t| t.ratio == 2.0));
        assert_eq!(r.summary.fraction_over_one, 1.0);
    }

    #[test]
    fn single_note_part() {
        let inst = Instrument::bundled();
        let p = NotatedPart {
            notes: vec![Note {
                written_midi: Some(66),
                onset_beats: 0.0,
                duration_beats: 1.0,
                measure: "1".into(),
            }],
            tempo_bpm: 100.0,
            source: "t".into(),
        };
        let r = annotate(&p, &inst.chart, &|_: &Fingering, _: &Fingering| 3.0, PathObjective::Sum).unwrap();
        assert!(r.transitions.is_empty());
        assert_eq!(r.notes[0].difficulty, 0.0);
        assert_eq!(r.path[0].label, "F#4");
    }
}
