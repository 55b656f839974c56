//! File-level plumbing shared by the command-line tools: extraction
//! manifests, session plans and chart dumps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingering::{FingeringChart, KeyTable, Mapping};
use crate::observations::ObservationRecord;
use crate::sampling::SessionPlan;
use crate::trill::{extract_trill_speed, verify_expected, ExtractionConfig, F0Track, TrillResult};

/// One recorded trill: `track,player_id,session_id,from,to`, with `from`
/// and `to` chart labels of the prompted fingerings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub track: PathBuf,
    pub player_id: String,
    pub session_id: String,
    pub from: String,
    pub to: String,
}

pub const MANIFEST_HEADER: [&str; 5] = ["track", "player_id", "session_id", "from", "to"];

/// Relative track paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, source: &str, base_dir: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ManifestRow>().enumerate() {
        let mut r = row.map_err(|e| Error::load(source, format!("row {}: {e}", i + 2)))?;
        if r.track.is_relative() {
            r.track = base_dir.join(&r.track);
        }
        out.push(r);
    }
    Ok(out)
}

pub fn manifest_to_csv(rows: &[ManifestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.write_record([
            r.track.display().to_string(),
            r.player_id.clone(),
            r.session_id.clone(),
            r.from.clone(),
            r.to.clone(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedRow {
    pub record: ObservationRecord,
    pub result: TrillResult,
}

/// Extracts one manifest row. An interval mismatch is kept and described in
/// the review column.
pub fn extract_row(row: &ManifestRow, chart: &FingeringChart, cfg: &ExtractionConfig, transposition: i32) -> Result<ExtractedRow> {
    let get = |l: &str| {
        chart
            .by_label(l)
            .ok_or_else(|| Error::Config(format!("fingering `{l}` is not in the chart")))
    };
    let (from, to) = (get(&row.from)?, get(&row.to)?);
    if from.written_midi == to.written_midi {
        return Err(Error::Config(format!(
            "{} and {} sound the same pitch; same-pitch trills cannot be extracted",
            row.from, row.to
        )));
    }
    let track = F0Track::load(&row.track)?;
    let mut result = extract_trill_speed(&track, cfg)?;
    let check = verify_expected(&result, (from.written_midi, to.written_midi), transposition);
    result.interval_mismatch = check.mismatch;
    let review = check.mismatch.then(|| {
        format!(
            "interval mismatch: detected {}-{} sounding, expected {}-{}",
            result.midi_low, result.midi_high, check.expected_sounding.0, check.expected_sounding.1
        )
    });
    Ok(ExtractedRow {
        record: ObservationRecord {
            player_id: row.player_id.clone(),
            session_id: row.session_id.clone(),
            mask_from: from.mask,
            mask_to: to.mask,
            midi_from: from.written_midi,
            midi_to: to.written_midi,
            speed: result.trill_speed,
            review,
        },
        result,
    })
}

/// `session,position,from,to,midi_from,midi_to,anchor`
pub fn session_plan_to_csv(plan: &SessionPlan) -> Result<String> {
    let anchors: Vec<_> = plan.anchors.iter().map(|a| a.unordered_key()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["session", "position", "from", "to", "midi_from", "midi_to", "anchor"])?;
    for (s, session) in plan.sessions.iter().enumerate() {
        for (i, t) in session.iter().enumerate() {
            w.write_record([
                (s + 1).to_string(),
                (i + 1).to_string(),
                t.from.label.clone(),
                t.to.label.clone(),
                t.from.written_midi.to_string(),
                t.to.written_midi.to_string(),
                anchors.contains(&t.unordered_key()).to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Plain-text dump of the key map and chart.
pub fn describe_chart(keys: &KeyTable, chart: &FingeringChart) -> String {
    let mut s = String::from("keys\n");
    s.push_str("index  name            hand   palm  bis  PAF            P2FM\n");
    for k in keys.keys() {
        s.push_str(&format!(
            "{:>5}  {:<14}  {:<5}  {:<4}  {:<3}  {:<13}  {}\n",
            k.index,
            k.name,
            format!("{:?}", k.hand).to_lowercase(),
            if k.is_palm { "yes" } else { "" },
            if k.is_bis { "yes" } else { "" },
            k.finger(Mapping::PalmAsFinger).name(),
            k.finger(Mapping::PalmToFinger).name()
        ));
    }
    let (lo, hi) = chart.range();
    s.push_str(&format!("\nchart: {} fingerings, written {lo}..={hi}\n", chart.fingerings().len()));
    s.push_str("label       midi  mask                     keys\n");
    for f in chart.fingerings() {
        let names: Vec<&str> = f.mask.pressed().map(|k| keys.key(k).name.as_str()).collect();
        s.push_str(&format!("{:<10}  {:>4}  {}  {}\n", f.label, f.written_midi, f.mask, names.join(" ")));
    }
    s.push_str(&format!(
        "\nunordered pairs: {} with same-pitch alternates, {} without\n",
        chart.pair_count(true),
        chart.pair_count(false)
    ));
    s
}
