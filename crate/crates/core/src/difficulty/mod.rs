//! Fingering decoding and tempo-relative difficulty of single-voice parts.

mod decode;
mod musicxml;
mod render;
mod report;

pub use decode::{path_value, viterbi, Decoded, ModelScorer, PathObjective, TransitionScorer};
pub use musicxml::{load_document, parse_document, parse_part, NotatedPart, Note, ScoreDocument, DEFAULT_TEMPO_BPM};
pub use render::{ratio_color, render_annotations, render_score, report_json, EASY_COLOR, HARD_COLOR};
pub use report::{
    annotate, decode_fingerings, lattice, transition_requirements, DifficultyReport, NoteDifficulty, Summary,
    TransitionDifficulty,
};
