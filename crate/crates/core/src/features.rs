//! Transition feature encodings.
//!
//! Five schemes: raw key masks, finger movement under either palm mapping,
//! and two expert feature sets (hand-based and finger-based). Expert sets can
//! drop the MIDI slots and can scale slots by an expert weight table.
//!
//! Slot order is fixed per scheme; serialized models record it.
//!
//! | scheme | slots |
//! |---|---|
//! | Raw | `from_k01`..`from_k23`, `to_k01`..`to_k23` |
//! | Finger | `move_<finger>` per finger of the mapping, `same_finger_present` |
//! | E-HB | [`midi_from`, `midi_to`], `same_finger`, `palm_left`, `palm_right`, `octave`, `low_note`, `left_changes`, `right_changes` |
//! | E-FB | [`midi_from`, `midi_to`], `same_finger`, `palm_left`, `palm_right`, `octave`, `low_note`, `move_<finger>` (P2FM) |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};
use crate::fingering::{moving_fingers, Finger, Hand, KeyTable, Mapping, Transition, KEY_COUNT, OCTAVE_KEY};
use crate::tabular::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Raw,
    Finger(Mapping),
    ExpertHandBased,
    ExpertFingerBased,
}

impl FeatureKind {
    pub fn is_expert(self) -> bool {
        matches!(self, FeatureKind::ExpertHandBased | FeatureKind::ExpertFingerBased)
    }
}

/// Slot names in order for a kind and MIDI toggle.
pub fn slot_names(kind: FeatureKind, include_midi: bool) -> Vec<String> {
    let mut out = Vec::new();
    match kind {
        FeatureKind::Raw => {
            for side in ["from", "to"] {
                for k in 1..=KEY_COUNT {
                    out.push(format!("{side}_k{k:02}"));
                }
            }
        }
        FeatureKind::Finger(mapping) => {
            out.extend(mapping.inventory().iter().map(|f| format!("move_{}", f.name())));
            out.push("same_finger_present".into());
        }
        FeatureKind::ExpertHandBased | FeatureKind::ExpertFingerBased => {
            if include_midi {
                out.push("midi_from".into());
                out.push("midi_to".into());
            }
            for s in ["same_finger", "palm_left", "palm_right", "octave", "low_note"] {
                out.push(s.into());
            }
            if kind == FeatureKind::ExpertHandBased {
                out.push("left_changes".into());
                out.push("right_changes".into());
            } else {
                out.extend(Finger::PLAYING.iter().map(|f| format!("move_{}", f.name())));
            }
        }
    }
    out
}

/// A configured feature encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScheme {
    pub name: String,
    pub kind: FeatureKind,
    /// Only meaningful for expert kinds.
    pub include_midi: bool,
    /// One strictly positive weight per slot; expert kinds only.
    pub expert_weights: Option<Vec<f64>>,
    #[serde(skip)]
    slots: Arc<[String]>,
}

impl FeatureScheme {
    pub fn new(
        name: impl Into<String>,
        kind: FeatureKind,
        include_midi: bool,
        expert_weights: Option<Vec<f64>>,
    ) -> Result<FeatureScheme> {
        let include_midi = include_midi && kind.is_expert();
        let slots: Arc<[String]> = slot_names(kind, include_midi).into();
        if let Some(w) = &expert_weights {
            if !kind.is_expert() {
                return Err(Error::Config("expert weights only apply to expert schemes".into()));
            }
            if w.len() != slots.len() {
                return Err(Error::Config(format!(
                    "weight table has {} entries, scheme needs {}",
                    w.len(),
                    slots.len()
                )));
            }
            if let Some(bad) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("expert weight {bad} is not strictly positive")));
            }
        }
        Ok(FeatureScheme {
            name: name.into(),
            kind,
            include_midi,
            expert_weights,
            slots,
        })
    }

    pub fn raw() -> FeatureScheme {
        FeatureScheme::new("R", FeatureKind::Raw, false, None).expect("valid")
    }

    pub fn finger(mapping: Mapping) -> FeatureScheme {
        let name = format!("F({})", mapping.abbreviation());
        FeatureScheme::new(name, FeatureKind::Finger(mapping), false, None).expect("valid")
    }

    /// Restores the cached slot names after deserialization.
    pub(crate) fn rebuild(mut self) -> Result<FeatureScheme> {
        self.slots = slot_names(self.kind, self.include_midi).into();
        FeatureScheme::new(self.name, self.kind, self.include_midi, self.expert_weights)
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn encode(&self, t: &Transition, keys: &KeyTable) -> FeatureVector {
        FeatureVector {
            values: self.encode_values(t, keys),
            slot_names: self.slots.clone(),
        }
    }

    pub fn encode_values(&self, t: &Transition, keys: &KeyTable) -> Vec<f64> {
        match self.kind {
            FeatureKind::Raw => raw_values(t),
            FeatureKind::Finger(mapping) => finger_values(t, keys, mapping),
            FeatureKind::ExpertHandBased | FeatureKind::ExpertFingerBased => {
                let mut v = expert_values(t, keys, self.kind, self.include_midi);
                if let Some(w) = &self.expert_weights {
                    for (x, w) in v.iter_mut().zip(w) {
                        *x *= w;
                    }
                }
                v
            }
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub slot_names: Arc<[String]>,
}

fn raw_values(t: &Transition) -> Vec<f64> {
    let bit = |m: crate::KeyMask, k| if m.is_pressed(k) { 1.0 } else { 0.0 };
    (1..=KEY_COUNT)
        .map(|k| bit(t.from.mask, k))
        .chain((1..=KEY_COUNT).map(|k| bit(t.to.mask, k)))
        .collect()
}

fn finger_values(t: &Transition, keys: &KeyTable, mapping: Mapping) -> Vec<f64> {
    let m = moving_fingers(t, keys, mapping);
    let mut v: Vec<f64> = mapping
        .inventory()
        .iter()
        .map(|f| if m.moves(*f) { 1.0 } else { 0.0 })
        .collect();
    v.push(if m.same_finger_count > 0 { 1.0 } else { 0.0 });
    v
}

fn palm_changed(t: &Transition, keys: &KeyTable, hand: Hand) -> bool {
    let diff = t.from.mask.bits() ^ t.to.mask.bits();
    keys.keys()
        .iter()
        .any(|k| k.is_palm && k.hand == hand && diff & (1 << (k.index - 1)) != 0)
}

fn expert_values(t: &Transition, keys: &KeyTable, kind: FeatureKind, include_midi: bool) -> Vec<f64> {
    let movement = moving_fingers(t, keys, Mapping::PalmToFinger);
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut v = Vec::with_capacity(16);
    if include_midi {
        v.push(f64::from(t.from.written_midi));
        v.push(f64::from(t.to.written_midi));
    }
    v.push(movement.same_finger_count as f64);
    v.push(flag(palm_changed(t, keys, Hand::Left)));
    v.push(flag(palm_changed(t, keys, Hand::Right)));
    v.push(flag(t.from.mask.is_pressed(OCTAVE_KEY) != t.to.mask.is_pressed(OCTAVE_KEY)));
    v.push(flag(t.from.is_low_note() || t.to.is_low_note()));
    if kind == FeatureKind::ExpertHandBased {
        v.push(movement.count_on(Hand::Left) as f64);
        v.push(movement.count_on(Hand::Right) as f64);
    } else {
        v.extend(Finger::PLAYING.iter().map(|f| flag(movement.moves(*f))));
    }
    v
}

/// 46 binary values: the `from` mask then the `to` mask.
pub fn encode_raw(t: &Transition) -> FeatureVector {
    FeatureVector {
        values: raw_values(t),
        slot_names: slot_names(FeatureKind::Raw, false).into(),
    }
}

pub fn encode_finger(t: &Transition, keys: &KeyTable, mapping: Mapping) -> FeatureVector {
    FeatureScheme::finger(mapping).encode(t, keys)
}

pub fn encode_expert(t: &Transition, keys: &KeyTable, scheme: &FeatureScheme) -> Result<FeatureVector> {
    if !scheme.kind.is_expert() {
        return Err(Error::Config(format!("`{}` is not an expert scheme", scheme.name)));
    }
    Ok(scheme.encode(t, keys))
}

/// Expert weight table, keyed by slot name.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertWeights {
    weights: BTreeMap<String, f64>,
}

impl ExpertWeights {
    pub fn bundled() -> ExpertWeights {
        ExpertWeights::parse(assets::EXPERT_WEIGHTS, "bundled expert weights").expect("valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExpertWeights> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
        ExpertWeights::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<ExpertWeights> {
        let table = Table::parse(text, source)?;
        let (cs, cw) = (table.column("slot")?, table.column("weight")?);
        let mut weights = BTreeMap::new();
        for (line, f) in &table.rows {
            let w: f64 = table.parse_field(*line, "weight", &f[cw])?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(table.err(*line, format!("weight for `{}` must be strictly positive", f[cs])));
            }
            if weights.insert(f[cs].clone(), w).is_some() {
                return Err(table.err(*line, format!("duplicate slot `{}`", f[cs])));
            }
        }
        Ok(ExpertWeights { weights })
    }

    pub fn from_map(weights: BTreeMap<String, f64>) -> ExpertWeights {
        ExpertWeights { weights }
    }

    /// Weights in slot order. Every slot must be present.
    pub fn for_slots(&self, slots: &[String]) -> Result<Vec<f64>> {
        slots
            .iter()
            .map(|s| {
                self.weights
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("expert weight table has no entry for slot `{s}`")))
            })
            .collect()
    }
}

/// The eleven named configurations compared in the scheme evaluation table.
pub const SCHEME_NAMES: [&str; 11] = [
    "R",
    "F(PAF)",
    "F(P2FM)",
    "E-HB",
    "E-HB(NoM)",
    "E-HB(NoEW)",
    "E-HB(NoM&EW)",
    "E-FB",
    "E-FB(NoM)",
    "E-FB(NoEW)",
    "E-FB(NoM&EW)",
];

pub fn scheme_from_name(name: &str, weights: &ExpertWeights) -> Result<FeatureScheme> {
    let unknown = || Error::Config(format!("unknown feature scheme `{name}` (expected one of {})", SCHEME_NAMES.join(", ")));
    match name {
        "R" => return Ok(FeatureScheme::raw()),
        "F(PAF)" => return Ok(FeatureScheme::finger(Mapping::PalmAsFinger)),
        "F(P2FM)" => return Ok(FeatureScheme::finger(Mapping::PalmToFinger)),
        _ => {}
    }
    let (kind, rest) = if let Some(r) = name.strip_prefix("E-HB") {
        (FeatureKind::ExpertHandBased, r)
    } else if let Some(r) = name.strip_prefix("E-FB") {
        (FeatureKind::ExpertFingerBased, r)
    } else {
        return Err(unknown());
    };
    let (include_midi, use_weights) = match rest {
        "" => (true, true),
        "(NoM)" => (false, true),
        "(NoEW)" => (true, false),
        "(NoM&EW)" => (false, false),
        _ => return Err(unknown()),
    };
    let slots = slot_names(kind, include_midi);
    let w = if use_weights {
        weights.for_slots(&slots)?
    } else {
        vec![1.0; slots.len()]
    };
    FeatureScheme::new(name, kind, include_midi, Some(w))
}
