//! Training-subset samplers, the learning-curve experiment and the
//! recording-session planner.
//!
//! Samplers return indices into the pool, ascending.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assets;
use crate::error::{Error, Result};
use crate::features::{scheme_from_name, ExpertWeights, FeatureScheme};
use crate::fingering::{moving_fingers, FingeringChart, KeyTable, Mapping, Transition};
use crate::kmeans::kmeans;
use crate::model::{self, stratified_folds, Dataset, EvalConfig, ModelKind};
use crate::observations::TrillObservation;
use crate::seed;
use crate::tabular::Table;

pub const DEFAULT_ALPHA: f64 = 0.1;

fn check_n(n: usize, pool: usize) -> Result<()> {
    if n > pool {
        return Err(Error::Config(format!("cannot sample {n} items from a pool of {pool}")));
    }
    Ok(())
}

pub fn sample_uniform(pool_len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    check_n(n, pool_len)?;
    let mut rng = seed::rng(seed);
    let mut out = rand::seq::index::sample(&mut rng, pool_len, n).into_vec();
    out.sort_unstable();
    Ok(out)
}

/// Clusters the pool's hand-based expert features (MIDI and weights on) into
/// n clusters and takes one uniform pick per non-empty cluster, topping up
/// uniformly from the rest when clusters come out empty.
pub fn sample_cluster(
    pool: &[Transition],
    n: usize,
    seed: u64,
    keys: &KeyTable,
    weights: &ExpertWeights,
) -> Result<Vec<usize>> {
    check_n(n, pool.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let scheme = scheme_from_name("E-HB", weights)?;
    let points: Vec<Vec<f64>> = pool.iter().map(|t| scheme.encode_values(t, keys)).collect();
    Ok(cluster_pick(&points, n, seed))
}

pub(crate) fn cluster_pick(points: &[Vec<f64>], n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let assign = kmeans(points, n, &mut rng);
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, c) in assign.iter().enumerate() {
        members.entry(*c).or_default().push(i);
    }
    let mut chosen: BTreeSet<usize> = members.values().map(|m| m[rng.random_range(0..m.len())]).collect();
    if chosen.len() < n {
        let mut rest: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
        rest.shuffle(&mut rng);
        chosen.extend(rest.into_iter().take(n - chosen.len()));
    }
    chosen.into_iter().collect()
}

/// Written-pitch bigram counts with Laplace smoothing over a pitch range.
#[derive(Clone, Debug, PartialEq)]
pub struct BigramTable {
    counts: BTreeMap<(i32, i32), f64>,
    range: (i32, i32),
    alpha: f64,
    total: f64,
}

impl BigramTable {
    pub fn new(counts: BTreeMap<(i32, i32), f64>, range: (i32, i32), alpha: f64) -> Result<BigramTable> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("smoothing constant must be positive, got {alpha}")));
        }
        if range.0 > range.1 {
            return Err(Error::Config("empty bigram pitch range".into()));
        }
        let inside = |p: i32| p >= range.0 && p <= range.1;
        let mut kept = BTreeMap::new();
        let mut dropped = 0;
        for ((a, b), c) in counts {
            if c < 0.0 || !c.is_finite() {
                return Err(Error::Config(format!("bigram ({a},{b}) has invalid count {c}")));
            }
            if inside(a) && inside(b) {
                *kept.entry((a, b)).or_insert(0.0) += c;
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::warn!("ignored {dropped} bigram entries outside written range {}..={}", range.0, range.1);
        }
        let total = kept.values().sum();
        Ok(BigramTable {
            counts: kept,
            range,
            alpha,
            total,
        })
    }

    pub fn bundled(range: (i32, i32)) -> BigramTable {
        BigramTable::parse(assets::BIGRAMS, "bundled bigram table", range, DEFAULT_ALPHA).expect("valid")
    }

    pub fn load(path: impl AsRef<Path>, range: (i32, i32), alpha: f64) -> Result<BigramTable> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(&name, e.to_string()))?;
        BigramTable::parse(&text, &name, range, alpha)
    }

    pub fn parse(text: &str, source: &str, range: (i32, i32), alpha: f64) -> Result<BigramTable> {
        let table = Table::parse(text, source)?;
        let (ca, cb, cc) = (table.column("midi_from")?, table.column("midi_to")?, table.column("count")?);
        let mut counts = BTreeMap::new();
        for (line, f) in &table.rows {
            let a: i32 = table.parse_field(*line, "midi_from", &f[ca])?;
            let b: i32 = table.parse_field(*line, "midi_to", &f[cb])?;
            let c: f64 = table.parse_field(*line, "count", &f[cc])?;
            if !(c >= 0.0 && c.is_finite()) {
                return Err(table.err(*line, "count must be non-negative"));
            }
            *counts.entry((a, b)).or_insert(0.0) += c;
        }
        BigramTable::new(counts, range, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn range(&self) -> (i32, i32) {
        self.range
    }

    fn cells(&self) -> usize {
        let w = (self.range.1 - self.range.0 + 1) as usize;
        w * w
    }

    pub fn count(&self, from: i32, to: i32) -> f64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Smoothed probability of the ordered bigram; 0 outside the range.
    pub fn probability(&self, from: i32, to: i32) -> f64 {
        let inside = |p: i32| p >= self.range.0 && p <= self.range.1;
        if !(inside(from) && inside(to)) {
            return 0.0;
        }
        (self.count(from, to) + self.alpha) / (self.total + self.alpha * self.cells() as f64)
    }

    fn sampler(&self) -> (Vec<(i32, i32)>, WeightedIndex<f64>) {
        let mut pairs = Vec::with_capacity(self.cells());
        let mut w = Vec::with_capacity(self.cells());
        for a in self.range.0..=self.range.1 {
            for b in self.range.0..=self.range.1 {
                pairs.push((a, b));
                w.push(self.count(a, b) + self.alpha);
            }
        }
        (pairs, WeightedIndex::new(w).expect("all weights positive"))
    }
}

/// Unordered written-pitch pair; a trill on (a, b) realizes both bigram
/// directions.
fn pitch_pair(a: i32, b: i32) -> (i32, i32) {
    (a.min(b), a.max(b))
}

/// Draws bigrams by smoothed probability and realizes each as a uniform pick
/// among unchosen pool items with that pitch pair. Draws with no remaining
/// match are rejected; after a bounded number of draws the partial subset is
/// returned with a warning.
pub fn sample_empirical(pool: &[Transition], n: usize, seed: u64, bigrams: &BigramTable) -> Result<Vec<usize>> {
    check_n(n, pool.len())?;
    let mut by_pair: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
    for (i, t) in pool.iter().enumerate() {
        by_pair
            .entry(pitch_pair(t.from.written_midi, t.to.written_midi))
            .or_default()
            .push(i);
    }
    let mut rng = seed::rng(seed);
    let (pairs, dist) = bigrams.sampler();
    let max_draws = 1000 + 500 * n;
    let mut chosen = Vec::with_capacity(n);
    let mut draws = 0;
    while chosen.len() < n && draws < max_draws {
        draws += 1;
        let (a, b) = pairs[dist.sample(&mut rng)];
        if let Some(items) = by_pair.get_mut(&pitch_pair(a, b)) {
            if !items.is_empty() {
                let k = rng.random_range(0..items.len());
                chosen.push(items.swap_remove(k));
            }
        }
    }
    if chosen.len() < n {
        log::warn!(
            "empirical sampler reached only {} of {n} items after {draws} draws; the pool is too sparse for the bigram table",
            chosen.len()
        );
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SamplingMethod {
    Uniform,
    Cluster,
    Empirical,
}

impl SamplingMethod {
    pub const ALL: [SamplingMethod; 3] = [SamplingMethod::Uniform, SamplingMethod::Cluster, SamplingMethod::Empirical];

    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::Uniform => "uniform",
            SamplingMethod::Cluster => "cluster",
            SamplingMethod::Empirical => "empirical",
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<SamplingMethod> {
        SamplingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sampling method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveConfig {
    /// Defaults to E-HB(NoEW).
    pub scheme: Option<FeatureScheme>,
    /// Defaults to 25, 50, 75, ... up to the smallest training fold.
    pub grid: Option<Vec<usize>>,
    pub seeds: usize,
    pub methods: Vec<SamplingMethod>,
    pub eval: EvalConfig,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            scheme: None,
            grid: None,
            seeds: 3,
            methods: SamplingMethod::ALL.to_vec(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: SamplingMethod,
    pub n: usize,
    /// Mean test MAPE over seeds and folds.
    pub mean_mape: f64,
    /// Standard deviation across seeds of the fold-averaged MAPE.
    pub std_mape: f64,
}

pub fn default_grid(max_n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (1..).map(|i| 25 * i).take_while(|n| *n <= max_n).collect();
    if g.last() != Some(&max_n) {
        g.push(max_n);
    }
    g
}

/// For each fold of the cross-validation, downsample the training side by
/// each method and size, train the perceptron, and record test MAPE.
pub fn learning_curve(
    observations: &[TrillObservation],
    keys: &KeyTable,
    expert_weights: &ExpertWeights,
    bigrams: &BigramTable,
    master_seed: u64,
    cfg: &CurveConfig,
) -> Result<Vec<CurvePoint>> {
    let scheme = match &cfg.scheme {
        Some(s) => s.clone(),
        None => scheme_from_name("E-HB(NoEW)", expert_weights)?,
    };
    let data = Dataset::encode(observations, &scheme, keys);
    let folds = stratified_folds(&data.y, cfg.eval.fold_test_size, seed::derive(master_seed, "folds", 0))?;
    let min_train = folds.iter().map(|f| f.train.len()).min().unwrap_or(0);
    let grid = match &cfg.grid {
        Some(g) => g.clone(),
        None => default_grid(min_train),
    };
    let grid: Vec<usize> = grid
        .into_iter()
        .filter(|&n| {
            let ok = n > scheme.len() && n <= min_train;
            if !ok {
                log::warn!("skipping curve size {n}: needs {} < n <= {min_train}", scheme.len());
            }
            ok
        })
        .collect();
    let cluster_scheme = scheme_from_name("E-HB", expert_weights)?;
    let cluster_points: Vec<Vec<f64>> =
        observations.iter().map(|o| cluster_scheme.encode_values(&o.transition, keys)).collect();

    struct Cell {
        method: SamplingMethod,
        n: usize,
        s: usize,
        fold: usize,
    }
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &n in &grid {
            for s in 0..cfg.seeds.max(1) {
                for fold in 0..folds.len() {
                    cells.push(Cell { method, n, s, fold });
                }
            }
        }
    }
    let mapes = cells
        .par_iter()
        .map(|c| {
            let fold = &folds[c.fold];
            let tag = c.method as u64 * 1_000_003 + c.n as u64 * 101 + c.s as u64;
            let sample_seed = seed::derive(master_seed, &format!("curve-sample-{}", c.fold), tag);
            let local = match c.method {
                SamplingMethod::Uniform => sample_uniform(fold.train.len(), c.n, sample_seed)?,
                SamplingMethod::Cluster => {
                    let pts: Vec<Vec<f64>> = fold.train.iter().map(|&i| cluster_points[i].clone()).collect();
                    cluster_pick(&pts, c.n, sample_seed)
                }
                SamplingMethod::Empirical => {
                    let pool: Vec<Transition> = fold.train.iter().map(|&i| observations[i].transition.clone()).collect();
                    sample_empirical(&pool, c.n, sample_seed, bigrams)?
                }
            };
            let idx: Vec<usize> = local.iter().map(|&i| fold.train[i]).collect();
            if idx.len() <= scheme.len() {
                return Ok(None);
            }
            let m = model::train(
                ModelKind::Perceptron,
                &data.subset(&idx),
                &scheme,
                seed::derive(master_seed, "curve-train", tag ^ ((c.fold as u64) << 48)),
                &cfg.eval.train,
            )?;
            let test = data.subset(&fold.test);
            let pred = test.x.iter().map(|r| m.predict_features(r)).collect::<Result<Vec<f64>>>()?;
            Ok(Some(model::metrics(&pred, &test.y, None).mape))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;

    let mut per_seed: BTreeMap<(SamplingMethod, usize), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (c, m) in cells.iter().zip(mapes) {
        if let Some(m) = m {
            per_seed.entry((c.method, c.n)).or_default().entry(c.s).or_default().push(m);
        }
    }
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &n in &grid {
            let Some(seeds) = per_seed.get(&(method, n)) else {
                log::warn!("no usable samples for {method} at n = {n}");
                continue;
            };
            let means: Vec<f64> = seeds.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            let var = if means.len() > 1 {
                means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (means.len() - 1) as f64
            } else {
                0.0
            };
            out.push(CurvePoint {
                method,
                n,
                mean_mape: mean,
                std_mape: var.sqrt(),
            });
        }
    }
    Ok(out)
}

pub fn curve_to_csv(points: &[CurvePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "n", "mean_mape", "std_mape"])?;
    for p in points {
        w.write_record([
            p.method.name().to_string(),
            p.n.to_string(),
            format!("{:.6}", p.mean_mape),
            format!("{:.6}", p.std_mape),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionPlan {
    pub sessions: Vec<Vec<Transition>>,
    pub anchors: Vec<Transition>,
}

/// Crude difficulty guess used only to mix easy and hard prompts: jump size
/// plus number of moving fingers.
pub fn naive_prior(t: &Transition, keys: &KeyTable) -> usize {
    t.interval().unsigned_abs() as usize + moving_fingers(t, keys, Mapping::PalmToFinger).moving.len()
}

/// Sorts the non-anchor transitions by the naive prior and deals them
/// round-robin so each session mixes easy and hard ones; the anchors are
/// added to every session and each session's order is shuffled.
pub fn plan_sessions(
    transitions: &[Transition],
    session_size: usize,
    anchors: &[Transition],
    seed: u64,
    chart: &FingeringChart,
    keys: &KeyTable,
) -> Result<SessionPlan> {
    if session_size <= anchors.len() {
        return Err(Error::Config(format!(
            "session size {session_size} leaves no room next to {} anchors",
            anchors.len()
        )));
    }
    for a in anchors {
        for f in [&a.from, &a.to] {
            if chart.find(f.mask, f.written_midi).is_none() {
                return Err(Error::Config(format!("anchor fingering {} ({}) is not in the chart", f.label, f.mask)));
            }
        }
    }
    let anchor_keys: BTreeSet<_> = anchors.iter().map(Transition::unordered_key).collect();
    let mut rest: Vec<&Transition> = transitions
        .iter()
        .filter(|t| !anchor_keys.contains(&t.unordered_key()))
        .collect();
    let mut rng = seed::rng(seed);
    rest.shuffle(&mut rng);
    rest.sort_by_key(|t| naive_prior(t, keys));
    let per = session_size - anchors.len();
    let count = rest.len().div_ceil(per).max(1);
    let mut sessions: Vec<Vec<Transition>> = vec![Vec::new(); count];
    for (i, t) in rest.into_iter().enumerate() {
        sessions[i % count].push(t.clone());
    }
    for s in &mut sessions {
        s.extend(anchors.iter().cloned());
        s.shuffle(&mut rng);
    }
    Ok(SessionPlan {
        sessions,
        anchors: anchors.to_vec(),
    })
}

/// Six anchors spread over the range: three easy ones, an octave jump, a
/// low-note pair and a palm-key pair.
pub const DEFAULT_ANCHOR_LABELS: [(&str, &str); 6] = [
    ("A4", "B4"),
    ("G5", "A5"),
    ("D5", "D4"),
    ("C4", "D4"),
    ("D6", "Eb6"),
    ("F4", "G4"),
];

pub fn default_anchors(chart: &FingeringChart) -> Result<Vec<Transition>> {
    DEFAULT_ANCHOR_LABELS
        .iter()
        .map(|(a, b)| {
            let get = |l: &str| {
                chart
                    .by_label(l)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("anchor fingering `{l}` is not in the chart")))
            };
            Ok(Transition::new(get(a)?, get(b)?))
        })
        .collect()
}
