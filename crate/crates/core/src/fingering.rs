//! The instrument: keys, fingers, the fingering chart and key-to-finger maps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};
use crate::tabular::{parse_flag, Table};

/// Number of keys in a fingering mask.
pub const KEY_COUNT: usize = 23;

/// Index of the octave key.
pub const OCTAVE_KEY: usize = 1;

/// Written MIDI below which a fingering counts as a low note (written C#4).
pub const LOW_NOTE_THRESHOLD: i32 = 61;

/// Pressed keys of one fingering. Bit `i` is key index `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct KeyMask(u32);

impl KeyMask {
    pub const EMPTY: KeyMask = KeyMask(0);

    pub fn from_bits(bits: u32) -> Option<KeyMask> {
        (bits >> KEY_COUNT == 0).then_some(KeyMask(bits))
    }

    pub fn from_keys(indices: impl IntoIterator<Item = usize>) -> KeyMask {
        let mut bits = 0;
        for i in indices {
            assert!((1..=KEY_COUNT).contains(&i), "key index {i} out of range");
            bits |= 1 << (i - 1);
        }
        KeyMask(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// `key` is the 1-based key index.
    pub fn is_pressed(self, key: usize) -> bool {
        (1..=KEY_COUNT).contains(&key) && self.0 & (1 << (key - 1)) != 0
    }

    pub fn pressed(self) -> impl Iterator<Item = usize> {
        (1..=KEY_COUNT).filter(move |&k| self.is_pressed(k))
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    /// The mask as 23 `0`/`1` characters, key 1 leftmost.
    pub fn to_bit_string(self) -> String {
        (1..=KEY_COUNT)
            .map(|k| if self.is_pressed(k) { '1' } else { '0' })
            .collect()
    }
}

impl FromStr for KeyMask {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() != KEY_COUNT {
            return Err(format!(
                "mask `{s}` has {} characters, expected {KEY_COUNT}",
                s.len()
            ));
        }
        let mut bits = 0u32;
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return Err(format!("mask `{s}` contains `{c}`")),
            }
        }
        Ok(KeyMask(bits))
    }
}

impl fmt::Debug for KeyMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyMask({})", self.to_bit_string())
    }
}

impl fmt::Display for KeyMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

impl Serialize for KeyMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for KeyMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
}

/// Playing fingers plus the two palm pseudo-fingers used by the
/// palm-as-a-finger mapping. The right thumb holds the instrument and plays
/// nothing, so it has no entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    LeftThumb,
    LeftIndex,
    LeftMiddle,
    LeftRing,
    LeftPinky,
    RightIndex,
    RightMiddle,
    RightRing,
    RightPinky,
    LeftPalm,
    RightPalm,
}

impl Finger {
    pub const PLAYING: [Finger; 9] = [
        Finger::LeftThumb,
        Finger::LeftIndex,
        Finger::LeftMiddle,
        Finger::LeftRing,
        Finger::LeftPinky,
        Finger::RightIndex,
        Finger::RightMiddle,
        Finger::RightRing,
        Finger::RightPinky,
    ];

    pub const WITH_PALMS: [Finger; 11] = [
        Finger::LeftThumb,
        Finger::LeftIndex,
        Finger::LeftMiddle,
        Finger::LeftRing,
        Finger::LeftPinky,
        Finger::RightIndex,
        Finger::RightMiddle,
        Finger::RightRing,
        Finger::RightPinky,
        Finger::LeftPalm,
        Finger::RightPalm,
    ];

    pub fn hand(self) -> Hand {
        use Finger::*;
        match self {
            LeftThumb | LeftIndex | LeftMiddle | LeftRing | LeftPinky | LeftPalm => Hand::Left,
            _ => Hand::Right,
        }
    }

    pub fn is_palm(self) -> bool {
        matches!(self, Finger::LeftPalm | Finger::RightPalm)
    }

    pub fn name(self) -> &'static str {
        use Finger::*;
        match self {
            LeftThumb => "left_thumb",
            LeftIndex => "left_index",
            LeftMiddle => "left_middle",
            LeftRing => "left_ring",
            LeftPinky => "left_pinky",
            RightIndex => "right_index",
            RightMiddle => "right_middle",
            RightRing => "right_ring",
            RightPinky => "right_pinky",
            LeftPalm => "left_palm",
            RightPalm => "right_palm",
        }
    }
}

impl FromStr for Finger {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Finger::WITH_PALMS
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown finger `{s}`"))
    }
}

/// How palm keys are attributed to fingers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mapping {
    /// Palm keys are played by a palm pseudo-finger of their hand.
    PalmAsFinger,
    /// Each palm key belongs to the real finger whose side plays it.
    PalmToFinger,
}

impl Mapping {
    pub fn inventory(self) -> &'static [Finger] {
        match self {
            Mapping::PalmAsFinger => &Finger::WITH_PALMS,
            Mapping::PalmToFinger => &Finger::PLAYING,
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            Mapping::PalmAsFinger => "PAF",
            Mapping::PalmToFinger => "P2FM",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Key {
    pub index: usize,
    pub name: String,
    pub hand: Hand,
    pub is_palm: bool,
    pub is_bis: bool,
    pub finger_paf: Finger,
    pub finger_p2fm: Finger,
}

impl Key {
    pub fn finger(&self, mapping: Mapping) -> Finger {
        match mapping {
            Mapping::PalmAsFinger => self.finger_paf,
            Mapping::PalmToFinger => self.finger_p2fm,
        }
    }
}

/// The 23 keys, stored in index order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KeyTable {
    keys: Vec<Key>,
    bis: usize,
}

impl KeyTable {
    pub fn bundled() -> KeyTable {
        KeyTable::parse(assets::KEY_TABLE, "bundled key table").expect("bundled key table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<KeyTable> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
        KeyTable::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<KeyTable> {
        let table = Table::parse(text, source)?;
        let cols = [
            "index",
            "name",
            "hand",
            "is_palm",
            "is_bis",
            "finger_paf",
            "finger_p2fm",
        ]
        .map(|c| table.column(c));
        let [ci, cn, ch, cp, cb, cpaf, cp2] = cols;
        let (ci, cn, ch, cp, cb, cpaf, cp2) = (ci?, cn?, ch?, cp?, cb?, cpaf?, cp2?);

        let mut by_index: BTreeMap<usize, Key> = BTreeMap::new();
        for (line, f) in &table.rows {
            let index: usize = table.parse_field(*line, "index", &f[ci])?;
            if !(1..=KEY_COUNT).contains(&index) {
                return Err(table.err(*line, format!("key index {index} outside 1..={KEY_COUNT}")));
            }
            let hand = match f[ch].to_ascii_lowercase().as_str() {
                "l" | "left" => Hand::Left,
                "r" | "right" => Hand::Right,
                other => return Err(table.err(*line, format!("invalid hand `{other}`"))),
            };
            let flag = |c: usize, what: &str| {
                parse_flag(&f[c]).ok_or_else(|| table.err(*line, format!("invalid {what} `{}`", f[c])))
            };
            let finger = |c: usize| f[c].parse::<Finger>().map_err(|e| table.err(*line, e));
            let key = Key {
                index,
                name: f[cn].clone(),
                hand,
                is_palm: flag(cp, "is_palm")?,
                is_bis: flag(cb, "is_bis")?,
                finger_paf: finger(cpaf)?,
                finger_p2fm: finger(cp2)?,
            };
            if by_index.insert(index, key).is_some() {
                return Err(table.err(*line, format!("duplicate key index {index}")));
            }
        }
        if let Some(missing) = (1..=KEY_COUNT).find(|i| !by_index.contains_key(i)) {
            return Err(Error::load(source, format!("missing key index {missing}")));
        }
        let keys: Vec<Key> = by_index.into_values().collect();

        for k in &keys {
            let expected = if k.index <= 13 { Hand::Left } else { Hand::Right };
            if k.hand != expected {
                return Err(Error::load(
                    source,
                    format!("key {} must be on the {expected:?} hand", k.index),
                ));
            }
            if k.finger_p2fm.is_palm() || k.finger_p2fm.hand() != k.hand {
                return Err(Error::load(
                    source,
                    format!("key {}: P2FM finger must be a real finger of its hand", k.index),
                ));
            }
            if k.finger_paf.hand() != k.hand {
                return Err(Error::load(
                    source,
                    format!("key {}: PAF finger must belong to its hand", k.index),
                ));
            }
            if k.is_palm != k.finger_paf.is_palm() {
                return Err(Error::load(
                    source,
                    format!(
                        "key {}: palm keys map to the palm finger under PAF, other keys may not",
                        k.index
                    ),
                ));
            }
            if !k.is_palm && k.finger_paf != k.finger_p2fm {
                return Err(Error::load(
                    source,
                    format!("key {}: non-palm keys must use the same finger in both mappings", k.index),
                ));
            }
        }
        if keys[OCTAVE_KEY - 1].finger_p2fm != Finger::LeftThumb {
            return Err(Error::load(source, "key 1 (octave) must be played by the left thumb"));
        }
        let bis: Vec<usize> = keys.iter().filter(|k| k.is_bis).map(|k| k.index).collect();
        if bis.len() != 1 {
            return Err(Error::load(
                source,
                format!("expected exactly one bis key, found {}", bis.len()),
            ));
        }
        Ok(KeyTable { keys, bis: bis[0] })
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    /// `index` is 1-based.
    pub fn key(&self, index: usize) -> &Key {
        &self.keys[index - 1]
    }

    pub fn bis_index(&self) -> usize {
        self.bis
    }

    pub fn finger(&self, index: usize, mapping: Mapping) -> Finger {
        self.key(index).finger(mapping)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.keys.iter().find(|k| k.name == name).map(|k| k.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingering {
    pub mask: KeyMask,
    pub written_midi: i32,
    pub label: String,
}

impl Fingering {
    pub fn new(mask: KeyMask, written_midi: i32, label: impl Into<String>) -> Fingering {
        Fingering {
            mask,
            written_midi,
            label: label.into(),
        }
    }

    pub fn is_low_note(&self) -> bool {
        self.written_midi < LOW_NOTE_THRESHOLD
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub from: Fingering,
    pub to: Fingering,
}

impl Transition {
    pub fn new(from: Fingering, to: Fingering) -> Transition {
        Transition { from, to }
    }

    pub fn reverse(&self) -> Transition {
        Transition {
            from: self.to.clone(),
            to: self.from.clone(),
        }
    }

    pub fn interval(&self) -> i32 {
        (self.to.written_midi - self.from.written_midi).abs()
    }

    /// Order-independent identity of the fingering pair.
    pub fn unordered_key(&self) -> ((i32, KeyMask), (i32, KeyMask)) {
        let a = (self.from.written_midi, self.from.mask);
        let b = (self.to.written_midi, self.to.mask);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FingeringChart {
    fingerings: Vec<Fingering>,
    min_midi: i32,
    max_midi: i32,
}

impl FingeringChart {
    pub fn bundled(keys: &KeyTable) -> FingeringChart {
        FingeringChart::parse(assets::CHART, "bundled chart", keys).expect("bundled chart is valid")
    }

    pub fn load(path: impl AsRef<Path>, keys: &KeyTable) -> Result<FingeringChart> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
        FingeringChart::parse(&text, &path.display().to_string(), keys)
    }

    pub fn parse(text: &str, source: &str, _keys: &KeyTable) -> Result<FingeringChart> {
        let table = Table::parse(text, source)?;
        let (cl, cm, ck) = (
            table.column("label")?,
            table.column("written_midi")?,
            table.column("mask")?,
        );
        let mut fingerings = Vec::with_capacity(table.rows.len());
        for (line, f) in &table.rows {
            let midi: i32 = table.parse_field(*line, "written_midi", &f[cm])?;
            let mask: KeyMask = f[ck].parse().map_err(|e| table.err(*line, e))?;
            fingerings.push(Fingering::new(mask, midi, f[cl].clone()));
        }
        FingeringChart::from_fingerings(fingerings).map_err(|e| match e {
            Error::Config(m) => Error::load(source, m),
            other => other,
        })
    }

    /// Builds a chart whose range is the span of the given pitches.
    pub fn from_fingerings(fingerings: Vec<Fingering>) -> Result<FingeringChart> {
        let min_midi = fingerings
            .iter()
            .map(|f| f.written_midi)
            .min()
            .ok_or_else(|| Error::Config("chart has no fingerings".into()))?;
        let max_midi = fingerings.iter().map(|f| f.written_midi).max().unwrap_or(min_midi);
        let mut seen = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for f in &fingerings {
            if !seen.insert((f.mask, f.written_midi)) {
                return Err(Error::Config(format!(
                    "duplicate fingering {} for written pitch {}",
                    f.mask, f.written_midi
                )));
            }
            if !labels.insert(f.label.as_str()) {
                return Err(Error::Config(format!("duplicate fingering label `{}`", f.label)));
            }
        }
        if let Some(gap) =
            (min_midi..=max_midi).find(|m| !fingerings.iter().any(|f| f.written_midi == *m))
        {
            return Err(Error::Config(format!("written pitch {gap} has no fingering")));
        }
        Ok(FingeringChart {
            fingerings,
            min_midi,
            max_midi,
        })
    }

    pub fn fingerings(&self) -> &[Fingering] {
        &self.fingerings
    }

    pub fn range(&self) -> (i32, i32) {
        (self.min_midi, self.max_midi)
    }

    pub fn contains_pitch(&self, midi: i32) -> bool {
        (self.min_midi..=self.max_midi).contains(&midi)
    }

    /// Fingerings for a written pitch in chart order.
    pub fn options_for_pitch(&self, written_midi: i32) -> Result<Vec<&Fingering>> {
        self.option_indices(written_midi)
            .map(|idx| idx.into_iter().map(|i| &self.fingerings[i]).collect())
    }

    /// Chart indices of the fingerings for a written pitch, in chart order.
    pub fn option_indices(&self, written_midi: i32) -> Result<Vec<usize>> {
        if !self.contains_pitch(written_midi) {
            return Err(Error::OutOfRange {
                midi: written_midi,
                min: self.min_midi,
                max: self.max_midi,
                context: String::new(),
            });
        }
        Ok(self
            .fingerings
            .iter()
            .enumerate()
            .filter(|(_, f)| f.written_midi == written_midi)
            .map(|(i, _)| i)
            .collect())
    }

    pub fn by_label(&self, label: &str) -> Option<&Fingering> {
        self.fingerings.iter().find(|f| f.label == label)
    }

    pub fn find(&self, mask: KeyMask, written_midi: i32) -> Option<&Fingering> {
        self.fingerings
            .iter()
            .find(|f| f.mask == mask && f.written_midi == written_midi)
    }

    pub fn index_of(&self, fingering: &Fingering) -> Option<usize> {
        self.fingerings
            .iter()
            .position(|f| f.mask == fingering.mask && f.written_midi == fingering.written_midi)
    }

    /// All unordered pairs of distinct fingerings, in chart order.
    pub fn unordered_pairs(&self, include_same_pitch: bool) -> Vec<Transition> {
        let mut out = Vec::new();
        for (i, a) in self.fingerings.iter().enumerate() {
            for b in &self.fingerings[i + 1..] {
                if include_same_pitch || a.written_midi != b.written_midi {
                    out.push(Transition::new(a.clone(), b.clone()));
                }
            }
        }
        out
    }

    pub fn pair_count(&self, include_same_pitch: bool) -> usize {
        let n = self.fingerings.len();
        let all = n * (n - 1) / 2;
        if include_same_pitch {
            return all;
        }
        let mut per_pitch: BTreeMap<i32, usize> = BTreeMap::new();
        for f in &self.fingerings {
            *per_pitch.entry(f.written_midi).or_default() += 1;
        }
        all - per_pitch.values().map(|m| m * (m - 1) / 2).sum::<usize>()
    }
}

/// Fingers that move during a transition, plus the same-finger count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FingerMovement {
    pub moving: BTreeSet<Finger>,
    /// Fingers that go from one pressed key to a different pressed key. The
    /// bis key is left out of this count.
    pub same_finger_count: usize,
}

impl FingerMovement {
    pub fn moves(&self, finger: Finger) -> bool {
        self.moving.contains(&finger)
    }

    pub fn count_on(&self, hand: Hand) -> usize {
        self.moving.iter().filter(|f| f.hand() == hand).count()
    }
}

fn keys_by_finger(mask: KeyMask, keys: &KeyTable, mapping: Mapping) -> BTreeMap<Finger, u32> {
    let mut out: BTreeMap<Finger, u32> = BTreeMap::new();
    for k in mask.pressed() {
        *out.entry(keys.finger(k, mapping)).or_default() |= 1 << (k - 1);
    }
    out
}

pub fn moving_fingers(t: &Transition, keys: &KeyTable, mapping: Mapping) -> FingerMovement {
    let from = keys_by_finger(t.from.mask, keys, mapping);
    let to = keys_by_finger(t.to.mask, keys, mapping);
    let bis_bit = 1u32 << (keys.bis_index() - 1);
    let mut movement = FingerMovement::default();
    for &finger in mapping.inventory() {
        let a = from.get(&finger).copied().unwrap_or(0);
        let b = to.get(&finger).copied().unwrap_or(0);
        if a != b {
            movement.moving.insert(finger);
        }
        let (a, b) = (a & !bis_bit, b & !bis_bit);
        if a & !b != 0 && b & !a != 0 {
            movement.same_finger_count += 1;
        }
    }
    movement
}
