//! Single-voice MusicXML (partwise) reading.
//!
//! Positions are tracked in integer ticks so triplets and changing
//! `<divisions>` stay exact; beats are quarter notes.

use std::io::{Cursor, Read};
use std::ops::Range;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_TEMPO_BPM: f64 = 120.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Note {
    /// `None` for rests.
    pub written_midi: Option<i32>,
    pub onset_beats: f64,
    pub duration_beats: f64,
    /// Number of the measure the note starts in.
    pub measure: String,
}

impl Note {
    pub fn is_rest(&self) -> bool {
        self.written_midi.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NotatedPart {
    pub notes: Vec<Note>,
    /// Quarter notes per minute.
    pub tempo_bpm: f64,
    pub source: String,
}

impl NotatedPart {
    /// Indices into `notes` of the sounding (non-rest) notes.
    pub fn sounding(&self) -> Vec<usize> {
        (0..self.notes.len()).filter(|&i| !self.notes[i].is_rest()).collect()
    }

    pub fn with_tempo(&self, tempo_bpm: f64) -> NotatedPart {
        NotatedPart {
            tempo_bpm,
            ..self.clone()
        }
    }
}

/// Where one `<note>` element's color attribute goes.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TagSite {
    /// Byte offset just after `<note`.
    pub insert_at: usize,
    /// Byte range of an existing color value.
    pub color_value: Option<Range<usize>>,
}

/// Parsed document text plus the note-element locations used for rendering.
#[derive(Clone, Debug)]
pub struct ScoreDocument {
    pub text: String,
    pub part: NotatedPart,
    /// Per sounding note, its elements (more than one when tied).
    pub(crate) sites: Vec<Vec<TagSite>>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn step_semitone(step: &str) -> Option<i32> {
    Some(match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    })
}

fn child<'a, 'i>(n: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    n.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(n: roxmltree::Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(n, name).and_then(|c| c.text()).map(str::trim)
}

/// Inner document of a compressed container, or the bytes as text.
fn document_text(bytes: &[u8], source: &str) -> Result<String> {
    if bytes.starts_with(b"PK\x03\x04") {
        let mut zip = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| Error::load(source, e.to_string()))?;
        let mut rootfile = None;
        if let Ok(mut c) = zip.by_name("META-INF/container.xml") {
            let mut s = String::new();
            c.read_to_string(&mut s).map_err(|e| Error::load(source, e.to_string()))?;
            let doc = roxmltree::Document::parse(&s).map_err(|e| Error::load(source, format!("container.xml: {e}")))?;
            rootfile = doc
                .descendants()
                .find(|n| n.has_tag_name("rootfile"))
                .and_then(|n| n.attribute("full-path"))
                .map(str::to_string);
        }
        let name = match rootfile {
            Some(r) => r,
            None => zip
                .file_names()
                .filter_map(|n| n.ok().map(|n| n.into_owned()))
                .filter(|n| !n.starts_with("META-INF/") && (n.ends_with(".xml") || n.ends_with(".musicxml")))
                .min()
                .ok_or_else(|| Error::load(source, "compressed score has no MusicXML document"))?,
        };
        let mut f = zip.by_name(&name).map_err(|e| Error::load(source, format!("{name}: {e}")))?;
        let mut s = String::new();
        f.read_to_string(&mut s).map_err(|e| Error::load(source, format!("{name}: {e}")))?;
        Ok(s)
    } else {
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::load(source, "score is not UTF-8 text"))
    }
}

fn beat_unit_quarters(unit: &str) -> Option<f64> {
    Some(match unit {
        "whole" => 4.0,
        "half" => 2.0,
        "quarter" => 1.0,
        "eighth" => 0.5,
        "16th" => 0.25,
        "32nd" => 0.125,
        _ => return None,
    })
}

/// First tempo marking in document order, in quarter notes per minute.
fn first_tempo(part: roxmltree::Node) -> Option<f64> {
    for n in part.descendants() {
        if n.has_tag_name("sound") {
            if let Some(t) = n.attribute("tempo").and_then(|t| t.trim().parse::<f64>().ok()) {
                if t > 0.0 {
                    return Some(t);
                }
            }
        }
        if n.has_tag_name("metronome") {
            let unit = child_text(n, "beat-unit").and_then(beat_unit_quarters);
            let per_minute = child_text(n, "per-minute").and_then(|t| t.parse::<f64>().ok());
            if let (Some(u), Some(pm)) = (unit, per_minute) {
                let dots = n.children().filter(|c| c.has_tag_name("beat-unit-dot")).count();
                let mut q = u;
                let mut add = u;
                for _ in 0..dots {
                    add *= 0.5;
                    q += add;
                }
                if pm > 0.0 {
                    return Some(pm * q);
                }
            }
        }
    }
    None
}

struct Pending {
    note: Note,
    sites: Vec<TagSite>,
    onset_ticks: i64,
    end_ticks: i64,
    tie_open: bool,
}

/// Parses a single-part, single-voice document. With `range`, pitches
/// outside it are errors naming the measure.
pub fn parse_document(bytes: &[u8], source: &str, range: Option<(i32, i32)>) -> Result<ScoreDocument> {
    let text = document_text(bytes, source)?;
    let bom = if text.starts_with('\u{feff}') { 3 } else { 0 };
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..roxmltree::ParsingOptions::default()
    };
    let doc = roxmltree::Document::parse_with_options(&text[bom..], opts).map_err(|e| Error::load(source, e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("score-partwise") {
        return Err(Error::Score(format!(
            "{source}: expected a partwise score, found <{}>",
            root.tag_name().name()
        )));
    }
    let parts: Vec<_> = root.children().filter(|n| n.has_tag_name("part")).collect();
    if parts.len() != 1 {
        return Err(Error::Score(format!("{source}: expected exactly one part, found {}", parts.len())));
    }
    let part = parts[0];
    let tempo_bpm = first_tempo(part).unwrap_or_else(|| {
        log::warn!("{source}: no tempo marking; assuming {DEFAULT_TEMPO_BPM} BPM");
        DEFAULT_TEMPO_BPM
    });

    let mut unit: i64 = 1; // ticks per quarter
    let mut divisions: i64 = 1;
    let mut pos: i64 = 0;
    let mut voice: Option<String> = None;
    let mut graces = 0usize;
    let mut done: Vec<Pending> = Vec::new();
    let mut last_end: i64 = 0;

    for measure in part.children().filter(|n| n.has_tag_name("measure")) {
        let number = measure.attribute("number").unwrap_or("?").to_string();
        let here = |msg: String| Error::Polyphony(format!("{msg} in measure {number}"));
        let duration_of = |n: roxmltree::Node, divisions: i64, unit: i64| -> Result<i64> {
            let d: i64 = child_text(n, "duration")
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Score(format!("{source}: <{}> without a valid duration in measure {number}", n.tag_name().name())))?;
            Ok(d * (unit / divisions))
        };
        for el in measure.children().filter(|n| n.is_element()) {
            match el.tag_name().name() {
                "attributes" => {
                    if let Some(d) = child_text(el, "divisions").and_then(|t| t.parse::<i64>().ok()) {
                        if d <= 0 {
                            return Err(Error::Score(format!("{source}: non-positive divisions in measure {number}")));
                        }
                        let new_unit = unit / gcd(unit, d) * d;
                        let scale = new_unit / unit;
                        pos *= scale;
                        last_end *= scale;
                        for p in done.iter_mut() {
                            p.onset_ticks *= scale;
                            p.end_ticks *= scale;
                        }
                        unit = new_unit;
                        divisions = d;
                    }
                }
                "backup" => pos -= duration_of(el, divisions, unit)?,
                "forward" => pos += duration_of(el, divisions, unit)?,
                "note" => {
                    if child(el, "grace").is_some() || child(el, "cue").is_some() {
                        graces += 1;
                        continue;
                    }
                    if child(el, "chord").is_some() {
                        return Err(here("chord".into()));
                    }
                    let v = child_text(el, "voice").unwrap_or("1").to_string();
                    match &voice {
                        None => voice = Some(v),
                        Some(first) if *first != v => return Err(here(format!("second voice `{v}`"))),
                        _ => {}
                    }
                    let dur = duration_of(el, divisions, unit)?;
                    if dur <= 0 {
                        return Err(Error::Score(format!("{source}: note with zero duration in measure {number}")));
                    }
                    if pos < last_end {
                        return Err(here("overlapping notes".into()));
                    }
                    let midi = if child(el, "rest").is_some() {
                        None
                    } else {
                        let p = child(el, "pitch").ok_or_else(|| {
                            Error::Score(format!("{source}: note without pitch or rest in measure {number}"))
                        })?;
                        let step = child_text(p, "step").and_then(step_semitone);
                        let octave = child_text(p, "octave").and_then(|t| t.parse::<i32>().ok());
                        let alter = match child_text(p, "alter") {
                            None => 0.0,
                            Some(a) => a.parse::<f64>().map_err(|_| Error::Score(format!("{source}: bad alter `{a}` in measure {number}")))?,
                        };
                        if alter.fract() != 0.0 {
                            return Err(Error::Score(format!("{source}: microtonal alter {alter} in measure {number}")));
                        }
                        let (Some(s), Some(o)) = (step, octave) else {
                            return Err(Error::Score(format!("{source}: malformed pitch in measure {number}")));
                        };
                        let m = (o + 1) * 12 + s + alter as i32;
                        if let Some((lo, hi)) = range {
                            if m < lo || m > hi {
                                return Err(Error::OutOfRange {
                                    midi: m,
                                    min: lo,
                                    max: hi,
                                    context: format!(" in measure {number}"),
                                });
                            }
                        }
                        Some(m)
                    };
                    let ties: Vec<&str> = el
                        .children()
                        .filter(|c| c.has_tag_name("tie"))
                        .filter_map(|c| c.attribute("type"))
                        .collect();
                    let tie_stop = ties.contains(&"stop");
                    let tie_start = ties.contains(&"start");
                    let start_tag = el.range().start + bom;
                    let site = TagSite {
                        insert_at: start_tag + "<note".len(),
                        color_value: el.attribute_node("color").map(|a| {
                            let r = a.range_value();
                            r.start + bom..r.end + bom
                        }),
                    };
                    let continues = match done.last() {
                        Some(prev) => {
                            midi.is_some() && tie_stop && prev.tie_open && prev.note.written_midi == midi && prev.end_ticks == pos
                        }
                        None => false,
                    };
                    if continues {
                        let prev = done.last_mut().expect("checked");
                        prev.end_ticks = pos + dur;
                        prev.note.duration_beats = (prev.end_ticks - prev.onset_ticks) as f64 / unit as f64;
                        prev.tie_open = tie_start;
                        prev.sites.push(site);
                    } else {
                        done.push(Pending {
                            note: Note {
                                written_midi: midi,
                                onset_beats: pos as f64 / unit as f64,
                                duration_beats: dur as f64 / unit as f64,
                                measure: number.clone(),
                            },
                            sites: vec![site],
                            onset_ticks: pos,
                            end_ticks: pos + dur,
                            tie_open: tie_start && midi.is_some(),
                        });
                    }
                    pos += dur;
                    last_end = pos;
                }
                _ => {}
            }
        }
    }
    if graces > 0 {
        log::warn!("{source}: skipped {graces} grace or cue note(s)");
    }
    let mut notes = Vec::with_capacity(done.len());
    let mut sites = Vec::new();
    for p in done {
        if !p.note.is_rest() {
            sites.push(p.sites);
        }
        notes.push(p.note);
    }
    Ok(ScoreDocument {
        text,
        part: NotatedPart {
            notes,
            tempo_bpm,
            source: source.to_string(),
        },
        sites,
    })
}

pub fn parse_part(bytes: &[u8], source: &str, range: Option<(i32, i32)>) -> Result<NotatedPart> {
    parse_document(bytes, source, range).map(|d| d.part)
}

pub fn load_document(path: impl AsRef<Path>, range: Option<(i32, i32)>) -> Result<ScoreDocument> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::load(&name, e.to_string()))?;
    parse_document(&bytes, &name, range)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn score(divisions: u32, tempo: Option<f64>, measures: &[&str]) -> String {
        let mut s = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 4.0 Partwise//EN\" \"http://www.musicxml.org/dtds/partwise.dtd\">\n<score-partwise version=\"4.0\"><part-list><score-part id=\"P1\"><part-name>Tenor</part-name></score-part></part-list><part id=\"P1\">",
        );
        for (i, m) in measures.iter().enumerate() {
            s.push_str(&format!("<measure number=\"{}\">", i + 1));
            if i == 0 {
                s.push_str(&format!("<attributes><divisions>{divisions}</divisions></attributes>"));
                if let Some(t) = tempo {
                    s.push_str(&format!("<direction><sound tempo=\"{t}\"/></direction>"));
                }
            }
            s.push_str(m);
            s.push_str("</measure>");
        }
        s.push_str("</part></score-partwise>\n");
        s
    }

    pub(crate) fn n(step: &str, octave: i32, dur: u32) -> String {
        format!("<note><pitch><step>{step}</step><octave>{octave}</octave></pitch><duration>{dur}</duration><voice>1</voice></note>")
    }

    fn rest(dur: u32) -> String {
        format!("<note><rest/><duration>{dur}</duration><voice>1</voice></note>")
    }

    #[test]
    fn two_quarters() {
        let xml = score(1, Some(120.0), &[&(n("C", 4, 1) + &n("D", 4, 1))]);
        let p = parse_part(xml.as_bytes(), "x", None).unwrap();
        assert_eq!(p.notes.len(), 2);
        assert_eq!(p.tempo_bpm, 120.0);
        assert_eq!(p.notes[0].written_midi, Some(60));
        assert_eq!(p.notes[1].written_midi, Some(62));
        assert_eq!((p.notes[1].onset_beats, p.notes[1].duration_beats), (1.0, 1.0));
    }

    #[test]
    fn chord_and_voices_rejected() {
        let chord = format!(
            "{}<note><chord/><pitch><step>E</step><octave>4</octave></pitch><duration>1</duration></note>",
            n("C", 4, 1)
        );
        assert!(matches!(parse_part(score(1, None, &[&chord]).as_bytes(), "x", None), Err(Error::Polyphony(_))));
        let voices = format!(
            "{}<backup><duration>1</duration></backup><note><pitch><step>E</step><octave>4</octave></pitch><duration>1</duration><voice>2</voice></note>",
            n("C", 4, 1)
        );
        assert!(matches!(parse_part(score(1, None, &[&voices]).as_bytes(), "x", None), Err(Error::Polyphony(_))));
    }

    #[test]
    fn ties_merge() {
        let tied = "<note><pitch><step>G</step><octave>4</octave></pitch><duration>2</duration><tie type=\"start\"/><voice>1</voice></note>\
                    <note><pitch><step>G</step><octave>4</octave></pitch><duration>1</duration><tie type=\"stop\"/><voice>1</voice></note>";
        let doc = parse_document(score(1, None, &[tied]).as_bytes(), "x", None).unwrap();
        assert_eq!(doc.part.notes.len(), 1);
        assert_eq!(doc.part.notes[0].duration_beats, 3.0);
        assert_eq!(doc.sites[0].len(), 2);
        assert_eq!(doc.part.tempo_bpm, DEFAULT_TEMPO_BPM);
    }

    #[test]
    fn triplets_grace_rests_and_range() {
        let m = format!(
            "{}{}{}<note><grace/><pitch><step>A</step><octave>4</octave></pitch><voice>1</voice></note>{}{}",
            n("C", 5, 2),
            n("D", 5, 2),
            n("C", 5, 2),
            rest(6),
            n("E", 5, 6)
        );
        let p = parse_part(score(6, Some(160.0), &[&m]).as_bytes(), "x", Some((58, 90))).unwrap();
        assert_eq!(p.notes.len(), 5);
        assert!(p.notes[3].is_rest());
        assert_eq!(p.notes[4].onset_beats, 2.0);
        assert!((p.notes[1].onset_beats - 1.0 / 3.0).abs() < 1e-15);
        let low = score(1, None, &["", &n("C", 3, 1)]);
        match parse_part(low.as_bytes(), "x", Some((58, 90))) {
            Err(Error::OutOfRange { midi: 48, context, .. }) => assert!(context.contains("measure 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metronome_tempo_in_quarters() {
        let m = format!(
            "<direction><direction-type><metronome><beat-unit>half</beat-unit><per-minute>60</per-minute></metronome></direction-type></direction>{}",
            n("C", 5, 1)
        );
        assert_eq!(parse_part(score(1, None, &[&m]).as_bytes(), "x", None).unwrap().tempo_bpm, 120.0);
    }

    #[test]
    fn compressed_container() {
        use std::io::Write;
        let xml = score(1, Some(90.0), &[&n("C", 5, 1)]);
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = zip::ZipWriter::new(&mut buf);
            let o = zip::write::SimpleFileOptions::default();
            w.start_file("META-INF/container.xml", o).unwrap();
            w.write_all(b"<container><rootfiles><rootfile full-path=\"score.xml\"/></rootfiles></container>").unwrap();
            w.start_file("score.xml", o).unwrap();
            w.write_all(xml.as_bytes()).unwrap();
            w.finish().unwrap();
        }
        let p = parse_part(buf.get_ref(), "x.mxl", None).unwrap();
        assert_eq!(p.tempo_bpm, 90.0);
        assert_eq!(p.notes.len(), 1);
    }
}
