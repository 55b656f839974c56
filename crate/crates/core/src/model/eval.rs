//! Cross-validated comparison of feature schemes and model classes.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{train, Dataset, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{scheme_from_name, ExpertWeights, FeatureScheme, SCHEME_NAMES};
use crate::fingering::{KeyMask, KeyTable};
use crate::observations::{IntervalWeights, TrillObservation};
use crate::seed;

/// Upper edges of the speed strata; the last stratum is open.
pub const SPEED_BIN_EDGES: [f64; 3] = [1.5, 3.0, 4.5];

pub fn speed_bin(speed: f64) -> usize {
    SPEED_BIN_EDGES.iter().take_while(|e| speed >= **e).count()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled stratified k-fold with k = floor(N / fold_test_size). Each stratum
/// is shuffled and dealt round-robin, continuing the deal across strata so fold
/// sizes differ by at most one.
pub fn stratified_folds(speeds: &[f64], fold_test_size: usize, seed: u64) -> Result<Vec<Fold>> {
    if fold_test_size == 0 {
        return Err(Error::Config("fold test size must be positive".into()));
    }
    let n = speeds.len();
    if n < 2 * fold_test_size {
        return Err(Error::InsufficientData(format!(
            "{n} observations; cross-validation with test folds of {fold_test_size} needs at least {}",
            2 * fold_test_size
        )));
    }
    let k = n / fold_test_size;
    let mut rng = seed::rng(seed);
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); SPEED_BIN_EDGES.len() + 1];
    for (i, s) in speeds.iter().enumerate() {
        strata[speed_bin(*s)].push(i);
    }
    let mut assign = vec![0usize; n];
    let mut dealt = 0usize;
    for stratum in &mut strata {
        stratum.shuffle(&mut rng);
        for &i in stratum.iter() {
            assign[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub mse: f64,
    /// `None` when no interval weights were supplied or they sum to zero.
    pub wmse: Option<f64>,
    pub mape: f64,
}

/// MSE, interval-weighted MSE normalized by the weight sum, and MAPE.
pub fn metrics(predicted: &[f64], truth: &[f64], weights: Option<&[f64]>) -> Metrics {
    let n = truth.len() as f64;
    let mut se = 0.0;
    let mut ape = 0.0;
    for (p, y) in predicted.iter().zip(truth) {
        se += (p - y).powi(2);
        ape += (p - y).abs() / y;
    }
    let wmse = weights.and_then(|w| {
        let total: f64 = w.iter().sum();
        (total > 0.0).then(|| {
            w.iter()
                .zip(predicted.iter().zip(truth))
                .map(|(w, (p, y))| w * (p - y).powi(2))
                .sum::<f64>()
                / total
        })
    });
    Metrics {
        mse: se / n,
        wmse,
        mape: ape / n,
    }
}

fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let n = folds.len() as f64;
    let wmse = folds.iter().map(|m| m.wmse).collect::<Option<Vec<f64>>>();
    Metrics {
        mse: folds.iter().map(|m| m.mse).sum::<f64>() / n,
        wmse: wmse.map(|v| v.iter().sum::<f64>() / n),
        mape: folds.iter().map(|m| m.mape).sum::<f64>() / n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub fold_test_size: usize,
    pub train: TrainConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fold_test_size: 150,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub scheme: String,
    pub model: ModelKind,
    pub fold_count: usize,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// Cross-validates one (model, scheme) cell on already-encoded rows. The
/// partition depends only on `seed`, so every cell evaluated with the same
/// seed sees the same folds.
pub fn evaluate_encoded(
    kind: ModelKind,
    scheme: &FeatureScheme,
    data: &Dataset,
    weights: Option<&[f64]>,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let folds = stratified_folds(&data.y, cfg.fold_test_size, seed::derive(seed, "folds", 0))?;
    let per_fold = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let model = train(
                kind,
                &data.subset(&fold.train),
                scheme,
                seed::derive(seed, "fold-train", i as u64),
                &cfg.train,
            )?;
            let test = data.subset(&fold.test);
            let pred = test
                .x
                .iter()
                .map(|r| model.predict_features(r))
                .collect::<Result<Vec<f64>>>()?;
            let w: Option<Vec<f64>> = weights.map(|w| fold.test.iter().map(|&j| w[j]).collect());
            Ok(metrics(&pred, &test.y, w.as_deref()))
        })
        .collect::<Result<Vec<Metrics>>>()?;
    Ok(EvalReport {
        scheme: scheme.name.clone(),
        model: kind,
        fold_count: per_fold.len(),
        mean: mean_metrics(&per_fold),
        folds: per_fold,
    })
}

pub fn evaluate(
    kind: ModelKind,
    scheme: &FeatureScheme,
    observations: &[TrillObservation],
    keys: &KeyTable,
    interval_weights: Option<&IntervalWeights>,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let data = Dataset::encode(observations, scheme, keys);
    let refs: Vec<&TrillObservation> = observations.iter().collect();
    let w = interval_weights.map(|iw| iw.weights_for(&refs));
    evaluate_encoded(kind, scheme, &data, w.as_deref(), seed, cfg)
}

/// Every named scheme under both model classes, in table order (scheme-major,
/// linear before perceptron).
pub fn scheme_table(
    observations: &[TrillObservation],
    keys: &KeyTable,
    expert_weights: &ExpertWeights,
    interval_weights: Option<&IntervalWeights>,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let refs: Vec<&TrillObservation> = observations.iter().collect();
    let w = interval_weights.map(|iw| iw.weights_for(&refs));
    let schemes = SCHEME_NAMES
        .iter()
        .map(|n| scheme_from_name(n, expert_weights))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, ModelKind)> = (0..schemes.len())
        .flat_map(|s| ModelKind::ALL.into_iter().map(move |k| (s, k)))
        .collect();
    let encoded: Vec<Dataset> = schemes.par_iter().map(|s| Dataset::encode(observations, s, keys)).collect();
    cells
        .par_iter()
        .map(|&(s, kind)| evaluate_encoded(kind, &schemes[s], &encoded[s], w.as_deref(), seed, cfg))
        .collect()
}

/// One row per scheme with mean metrics for each model class.
pub fn table_to_csv(reports: &[EvalReport]) -> Result<String> {
    let mut rows: Vec<(String, BTreeMap<ModelKind, Metrics>)> = Vec::new();
    for r in reports {
        match rows.iter_mut().find(|(s, _)| *s == r.scheme) {
            Some((_, m)) => {
                m.insert(r.model, r.mean);
            }
            None => rows.push((r.scheme.clone(), BTreeMap::from([(r.model, r.mean)]))),
        }
    }
    let folds = reports.first().map_or(0, |r| r.fold_count);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "lm_mse", "lm_wmse", "lm_mape", "mlp_mse", "mlp_wmse", "mlp_mape", "folds"])?;
    let fmt = |v: f64| format!("{v:.4}");
    for (scheme, cells) in rows {
        let mut rec = vec![scheme];
        for kind in ModelKind::ALL {
            match cells.get(&kind) {
                Some(m) => {
                    rec.push(fmt(m.mse));
                    rec.push(m.wmse.map_or_else(|| "unavailable".to_string(), fmt));
                    rec.push(fmt(m.mape));
                }
                None => rec.extend(["".to_string(), "".to_string(), "".to_string()]),
            }
        }
        rec.push(folds.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnchorFloor {
    pub per_anchor: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

/// Spread of repeated recordings: per anchor, the MAPE of each recording
/// against the anchor's median speed. Anchors with one recording are skipped.
pub fn anchor_floor(groups: &[Vec<f64>]) -> Option<AnchorFloor> {
    let mut per_anchor = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            log::warn!("anchor {i} has {} recording(s); skipped", g.len());
            continue;
        }
        let med = median(g);
        per_anchor.push(g.iter().map(|s| (s - med).abs() / med).sum::<f64>() / g.len() as f64);
    }
    if per_anchor.is_empty() {
        return None;
    }
    Some(AnchorFloor {
        mean: per_anchor.iter().sum::<f64>() / per_anchor.len() as f64,
        min: per_anchor.iter().copied().fold(f64::INFINITY, f64::min),
        max: per_anchor.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_anchor,
    })
}

type PairKey = ((i32, KeyMask), (i32, KeyMask));

/// Unordered transitions recorded in every session (at least two sessions).
pub fn detect_anchors(observations: &[TrillObservation]) -> Vec<PairKey> {
    let sessions: BTreeSet<&str> = observations.iter().map(|o| o.session_id.as_str()).collect();
    if sessions.len() < 2 {
        return Vec::new();
    }
    let mut seen: BTreeMap<PairKey, BTreeSet<&str>> = BTreeMap::new();
    for o in observations {
        seen.entry(o.transition.unordered_key()).or_default().insert(&o.session_id);
    }
    seen.into_iter()
        .filter(|(_, s)| s.len() == sessions.len())
        .map(|(k, _)| k)
        .collect()
}

pub fn anchor_groups(observations: &[TrillObservation], anchors: &[PairKey]) -> Vec<Vec<f64>> {
    anchors
        .iter()
        .map(|a| {
            observations
                .iter()
                .filter(|o| o.transition.unordered_key() == *a)
                .map(|o| o.speed)
                .collect()
        })
        .collect()
}
