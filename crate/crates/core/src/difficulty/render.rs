use serde::Serialize;

use super::musicxml::ScoreDocument;
use super::report::DifficultyReport;
use crate::error::{Error, Result};

pub const EASY_COLOR: [u8; 3] = [0x00, 0xA0, 0x00];
pub const HARD_COLOR: [u8; 3] = [0xFF, 0x00, 0x00];

/// Linear RGB ramp from green at ratio 0 to red at ratio 1 and above.
pub fn ratio_color(ratio: f64) -> String {
    let t = if ratio.is_nan() { 1.0 } else { ratio.clamp(0.0, 1.0) };
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    format!(
        "#{:02X}{:02X}{:02X}",
        mix(EASY_COLOR[0], HARD_COLOR[0]),
        mix(EASY_COLOR[1], HARD_COLOR[1]),
        mix(EASY_COLOR[2], HARD_COLOR[2])
    )
}

/// Copies the document with a color attribute on every sounding note
/// element; everything else is left byte for byte.
pub fn render_score(report: &DifficultyReport, doc: &ScoreDocument) -> Result<String> {
    if report.notes.len() != doc.sites.len() {
        return Err(Error::Mismatch(format!(
            "report has {} notes, document has {} sounding notes",
            report.notes.len(),
            doc.sites.len()
        )));
    }
    let mut edits: Vec<(std::ops::Range<usize>, String)> = Vec::new();
    for (note, sites) in report.notes.iter().zip(&doc.sites) {
        let color = ratio_color(note.difficulty);
        for s in sites {
            match &s.color_value {
                Some(r) => edits.push((r.clone(), color.clone())),
                None => edits.push((s.insert_at..s.insert_at, format!(" color=\"{color}\""))),
            }
        }
    }
    edits.sort_by_key(|(r, _)| r.start);
    let mut out = String::with_capacity(doc.text.len() + edits.len() * 18);
    let mut at = 0;
    for (r, text) in edits {
        out.push_str(&doc.text[at..r.start]);
        out.push_str(&text);
        at = r.end;
    }
    out.push_str(&doc.text[at..]);
    Ok(out)
}

#[derive(Serialize)]
struct SidecarNote<'a> {
    index: usize,
    measure: &'a str,
    written_midi: i32,
    fingering: &'a str,
    difficulty: f64,
    color: String,
    incident_ratios: &'a [f64],
}

#[derive(Serialize)]
struct Sidecar<'a> {
    source: &'a str,
    tempo_bpm: f64,
    objective: super::decode::PathObjective,
    summary: super::report::Summary,
    notes: Vec<SidecarNote<'a>>,
    transitions: &'a [super::report::TransitionDifficulty],
}

pub fn report_json(report: &DifficultyReport) -> Result<String> {
    let sidecar = Sidecar {
        source: &report.source,
        tempo_bpm: report.tempo_bpm,
        objective: report.objective,
        summary: report.summary,
        notes: report
            .notes
            .iter()
            .map(|n| SidecarNote {
                index: n.index,
                measure: &n.measure,
                written_midi: n.written_midi,
                fingering: &n.fingering,
                difficulty: n.difficulty,
                color: ratio_color(n.difficulty),
                incident_ratios: &n.incident_ratios,
            })
            .collect(),
        transitions: &report.transitions,
    };
    let mut s = serde_json::to_string_pretty(&sidecar)?;
    s.push('\n');
    Ok(s)
}

/// Annotated document text and JSON sidecar.
pub fn render_annotations(report: &DifficultyReport, doc: &ScoreDocument) -> Result<(String, String)> {
    Ok((render_score(report, doc)?, report_json(report)?))
}
