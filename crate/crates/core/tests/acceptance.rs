//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/SKIP line
//! each, and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use saxdiff::difficulty::{self, decode_fingerings, ModelScorer, NotatedPart, Note, PathObjective};
use saxdiff::features::{scheme_from_name, ExpertWeights, FeatureKind, FeatureScheme, SCHEME_NAMES};
use saxdiff::fingering::KEY_COUNT;
use saxdiff::model::{
    self, metrics, CostModel, Dataset, EvalConfig, ModelKind, Parameters, Perceptron, TrainConfig,
};
use saxdiff::observations::{load_observations, IntervalWeights};
use saxdiff::sampling::{learning_curve, BigramTable, CurveConfig, SamplingMethod};
use saxdiff::synth::{simulated_dataset, square_wave_track, DatasetSpec, TrackSpec};
use saxdiff::trill::{extract_trill_speed, ExtractionConfig, TENOR_TRANSPOSITION};
use saxdiff::{assets, seed, Fingering, FingeringChart, Instrument, KeyMask, Transition};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let out = f();
    let el = t.elapsed();
    let Some(limit) = limit else { return out };
    let note = format!(" [{:.2}s, limit {}s]", el.as_secs_f64(), limit.as_secs());
    match out {
        Outcome::Pass(d) if el > limit => Outcome::Fail(format!("{d}; too slow{note}")),
        Outcome::Pass(d) => Outcome::Pass(format!("{d}{note}")),
        Outcome::Fail(d) => Outcome::Fail(format!("{d}{note}")),
        s => s,
    }
}

fn rng(stream: &str) -> ChaCha8Rng {
    seed::rng(seed::derive(20240917, stream, 0))
}

fn random_mask(r: &mut ChaCha8Rng) -> KeyMask {
    KeyMask::from_bits(r.random_range(0..1u32 << KEY_COUNT)).unwrap()
}

/// Linear or perceptron model with arbitrary weights on a random scheme.
fn random_model(r: &mut ChaCha8Rng, weights: &ExpertWeights) -> CostModel {
    let name = SCHEME_NAMES[r.random_range(0..SCHEME_NAMES.len())];
    let scheme = scheme_from_name(name, weights).unwrap();
    let p = scheme.len();
    let params = if r.random_bool(0.5) {
        Parameters::Linear {
            slopes: (0..p).map(|_| r.random_range(-1.0..1.0)).collect(),
            intercept: r.random_range(0.0..6.0),
        }
    } else {
        let hidden = r.random_range(1..6);
        Parameters::Perceptron(Perceptron {
            inputs: p,
            hidden,
            hidden_weights: (0..hidden * p).map(|_| r.random_range(-0.3..0.3)).collect(),
            hidden_bias: (0..hidden).map(|_| r.random_range(-1.0..1.0)).collect(),
            output_weights: (0..hidden).map(|_| r.random_range(-2.0..2.0)).collect(),
            output_bias: r.random_range(0.0..5.0),
        })
    };
    CostModel {
        kind: match params {
            Parameters::Linear { .. } => ModelKind::Linear,
            Parameters::Perceptron(_) => ModelKind::Perceptron,
        },
        scheme,
        params,
        standardization: None,
        clamp_floor: model::DEFAULT_CLAMP_FLOOR,
        data_checksum: String::new(),
        train_mse: 0.0,
    }
}

/// Small chart over consecutive pitches with one to three fingerings each.
fn random_chart(r: &mut ChaCha8Rng) -> FingeringChart {
    let base = 60;
    let pitches = r.random_range(2..6);
    let mut out = Vec::new();
    for m in base..base + pitches {
        let k = r.random_range(1..=3);
        let mut masks: Vec<KeyMask> = Vec::new();
        while masks.len() < k {
            let mask = random_mask(r);
            if !masks.contains(&mask) {
                masks.push(mask);
            }
        }
        for (j, mask) in masks.into_iter().enumerate() {
            out.push(Fingering::new(mask, m, format!("p{m}-{j}")));
        }
    }
    FingeringChart::from_fingerings(out).unwrap()
}

fn random_part(r: &mut ChaCha8Rng, pitches: (i32, i32), max_notes: usize) -> NotatedPart {
    let n = r.random_range(1..=max_notes);
    let values = [0.25, 1.0 / 3.0, 0.5, 1.0, 1.5, 2.0];
    let mut onset = 0.0;
    let notes = (0..n)
        .map(|_| {
            let d = values[r.random_range(0..values.len())];
            let note = Note {
                written_midi: Some(r.random_range(pitches.0..=pitches.1)),
                onset_beats: onset,
                duration_beats: d,
                measure: "1".into(),
            };
            onset += d;
            note
        })
        .collect();
    NotatedPart {
        notes,
        tempo_bpm: r.random_range(40.0..200.0),
        source: "random".into(),
    }
}

/// Exhaustive search. Sum: among optimal paths the one whose choices are
/// smallest comparing from the last note backwards. Bottleneck: the value.
fn brute_force(
    options: &[Vec<&Fingering>],
    speed: &dyn Fn(&Fingering, &Fingering) -> f64,
    objective: PathObjective,
) -> (Vec<usize>, f64) {
    let n = options.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut v = match objective {
            PathObjective::Sum => 0.0,
            PathObjective::Bottleneck => f64::INFINITY,
        };
        for s in 1..n {
            let w = speed(options[s - 1][idx[s - 1]], options[s][idx[s]]);
            v = match objective {
                PathObjective::Sum => v + w,
                PathObjective::Bottleneck => v.min(w),
            };
        }
        let better = match &best {
            None => true,
            Some((b, bv)) => v > *bv || (v == *bv && idx.iter().rev().lt(b.iter().rev())),
        };
        if better {
            best = Some((idx.clone(), v));
        }
        let mut s = n;
        loop {
            if s == 0 {
                return best.unwrap();
            }
            s -= 1;
            idx[s] += 1;
            if idx[s] < options[s].len() {
                break;
            }
            idx[s] = 0;
        }
    }
}

fn viterbi_oracle() -> Outcome {
    let mut r = rng("viterbi");
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let (mut value_mismatch, mut path_mismatch, mut ties) = (0, 0, 0);
    for case in 0..200 {
        let chart = random_chart(&mut r);
        let model = random_model(&mut r, &weights);
        let part = random_part(&mut r, chart.range(), 8);
        let objective = if case % 2 == 0 { PathObjective::Sum } else { PathObjective::Bottleneck };
        let scorer = ModelScorer {
            model: &model,
            keys: &inst.keys,
        };
        let (path, value) = decode_fingerings(&part, &chart, &scorer, objective).unwrap();
        let options: Vec<Vec<&Fingering>> = part
            .notes
            .iter()
            .map(|n| chart.fingerings().iter().filter(|f| Some(f.written_midi) == n.written_midi).collect())
            .collect();
        let speed = |a: &Fingering, b: &Fingering| {
            let x = model.scheme.encode_values(&Transition::new(a.clone(), b.clone()), &inst.keys);
            model.predict_features(&x).unwrap()
        };
        let (best, best_value) = brute_force(&options, &speed, objective);
        if value != best_value {
            value_mismatch += 1;
        }
        let chosen: Vec<&str> = path.iter().map(|f| f.label.as_str()).collect();
        let expected: Vec<&str> = best.iter().enumerate().map(|(s, &k)| options[s][k].label.as_str()).collect();
        if objective == PathObjective::Sum && chosen != expected {
            path_mismatch += 1;
        }
        // achieved value of the decoded path, recomputed here
        let mut achieved = if objective == PathObjective::Sum { 0.0 } else { f64::INFINITY };
        for w in path.windows(2) {
            let s = speed(&w[0], &w[1]);
            achieved = if objective == PathObjective::Sum { achieved + s } else { achieved.min(s) };
        }
        if achieved != best_value {
            value_mismatch += 1;
        }
        let optimal_paths = count_optimal(&options, &speed, objective, best_value);
        if optimal_paths > 1 {
            ties += 1;
        }
    }
    check(
        value_mismatch == 0 && path_mismatch == 0,
        format!("200 parts; {value_mismatch} value and {path_mismatch} path mismatches; {ties} parts with tied optima"),
    )
}

fn count_optimal(options: &[Vec<&Fingering>], speed: &dyn Fn(&Fingering, &Fingering) -> f64, objective: PathObjective, best: f64) -> usize {
    let total: usize = options.iter().map(Vec::len).product();
    let mut count = 0;
    for mut code in 0..total {
        let idx: Vec<usize> = options
            .iter()
            .map(|o| {
                let k = code % o.len();
                code /= o.len();
                k
            })
            .collect();
        let mut v = if objective == PathObjective::Sum { 0.0 } else { f64::INFINITY };
        for s in 1..options.len() {
            let w = speed(options[s - 1][idx[s - 1]], options[s][idx[s]]);
            v = if objective == PathObjective::Sum { v + w } else { v.min(w) };
        }
        if v == best {
            count += 1;
        }
    }
    count
}

fn midi_hz(m: i32) -> f64 {
    440.0 * 2f64.powf(f64::from(m - 69) / 12.0)
}

struct TrillCase {
    lo: i32,
    hi: i32,
    rate: f64,
    octave_errors: bool,
    confidence_noise: bool,
}

#[derive(Default)]
struct TrillTally {
    speed_bad: usize,
    pair_bad: usize,
    rerun_missing: usize,
    errors: usize,
    worst: f64,
}

impl TrillTally {
    fn failures(&self) -> usize {
        self.speed_bad + self.pair_bad + self.rerun_missing + self.errors
    }
}

/// True when the case met every requirement.
fn run_trill(c: &TrillCase, seed: u64, cfg: &ExtractionConfig, tally: &mut TrillTally) -> bool {
    let before = tally.failures();
    let spec = TrackSpec {
        // 30 complete trills per half-length window
        duration: (60.0 / c.rate).max(4.0),
        octave_errors: if c.octave_errors { 0.1 } else { 0.0 },
        confidence_noise: c.confidence_noise,
        ..TrackSpec::new(c.rate, midi_hz(c.lo), midi_hz(c.hi))
    };
    let track = square_wave_track(&spec, seed, "case");
    match extract_trill_speed(&track, cfg) {
        Ok(res) => {
            let err = (res.trill_speed - c.rate).abs() / c.rate;
            tally.worst = tally.worst.max(err);
            tally.speed_bad += usize::from(err > 0.05);
            tally.pair_bad += usize::from((res.midi_low, res.midi_high) != (c.lo, c.hi));
            tally.rerun_missing += usize::from(c.octave_errors && !res.cluster_rerun);
        }
        Err(_) => tally.errors += 1,
    }
    tally.failures() == before
}

/// Octave errors only separate from the played notes below a fifth; on
/// wider intervals a doubled lower note lands next to the upper one. Those
/// cases are reported but not gated.
fn trill_extraction() -> Outcome {
    let mut r = rng("trill");
    let inst = Instrument::bundled();
    let sounding = |t: &Transition| {
        let (a, b) = (t.from.written_midi - TENOR_TRANSPOSITION, t.to.written_midi - TENOR_TRANSPOSITION);
        (a.min(b), a.max(b))
    };
    let pairs: Vec<(i32, i32)> = inst.chart.unordered_pairs(false).iter().map(sounding).collect();
    let narrow: Vec<(i32, i32)> = pairs.iter().copied().filter(|(a, b)| b - a < 7).collect();
    let wide: Vec<(i32, i32)> = pairs.iter().copied().filter(|(a, b)| b - a >= 7).collect();
    let cfg = ExtractionConfig::default();
    let mut gated = TrillTally::default();
    for case in 0..100 {
        let octave_errors = case % 2 == 1;
        let pool = if octave_errors { &narrow } else { &pairs };
        let (lo, hi) = pool[r.random_range(0..pool.len())];
        let c = TrillCase {
            lo,
            hi,
            rate: 1.0 + 7.0 * case as f64 / 99.0,
            octave_errors,
            confidence_noise: octave_errors || case % 4 == 2,
        };
        run_trill(&c, r.random(), &cfg, &mut gated);
    }
    let mut diag = TrillTally::default();
    let mut wide_clean = 0;
    for case in 0..50 {
        let (lo, hi) = wide[r.random_range(0..wide.len())];
        let c = TrillCase {
            lo,
            hi,
            rate: 1.0 + 7.0 * case as f64 / 49.0,
            octave_errors: true,
            confidence_noise: true,
        };
        wide_clean += usize::from(run_trill(&c, r.random(), &cfg, &mut diag));
    }
    check(
        gated.failures() == 0,
        format!(
            "100 tracks (50 with 10% octave errors on sub-fifth pairs); {} speed errors over 5% (worst {:.2}%), {} wrong pairs, {} outlier tracks without rerun, {} failures; not gated: wide-interval octave errors {}/50 clean",
            gated.speed_bad,
            100.0 * gated.worst,
            gated.pair_bad,
            gated.rerun_missing,
            gated.errors,
            wide_clean
        ),
    )
}

fn regression_sanity() -> Outcome {
    let mut r = rng("regression");
    let inst = Instrument::bundled();
    let scheme = scheme_from_name("E-HB", &ExpertWeights::bundled()).unwrap();
    let mut ordered: Vec<Transition> = inst
        .chart
        .unordered_pairs(false)
        .into_iter()
        .flat_map(|t| [t.reverse(), t])
        .collect();
    ordered.shuffle(&mut r);
    ordered.truncate(750);
    let x: Vec<Vec<f64>> = ordered.iter().map(|t| scheme.encode_values(t, &inst.keys)).collect();
    let p = scheme.len();
    let sd: Vec<f64> = (0..p)
        .map(|j| {
            let m = x.iter().map(|v| v[j]).sum::<f64>() / x.len() as f64;
            (x.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt().max(1e-9)
        })
        .collect();
    let w: Vec<f64> = sd.iter().map(|s| r.random_range(-0.5..0.5) / s).collect();
    let clean: Vec<f64> = x.iter().map(|v| v.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
    let lowest = clean.iter().copied().fold(f64::INFINITY, f64::min);
    let b = 2.0 - lowest;
    let noise = Normal::new(0.0, 0.2).unwrap();
    let y: Vec<f64> = clean.iter().map(|c| c + b + noise.sample(&mut r)).collect();
    let train = Dataset {
        x: x[..600].to_vec(),
        y: y[..600].to_vec(),
    };
    let (tx, ty) = (&x[600..], &y[600..]);
    let cfg = TrainConfig::default();
    let mape = |m: &CostModel| {
        let pred: Vec<f64> = tx.iter().map(|v| m.predict_features(v).unwrap()).collect();
        metrics(&pred, ty, None).mape
    };
    let lm = model::train(ModelKind::Linear, &train, &scheme, 1, &cfg).unwrap();
    let mlp = model::train(ModelKind::Perceptron, &train, &scheme, 1, &cfg).unwrap();
    let (a, m) = (mape(&lm), mape(&mlp));
    let mean_y = ty.iter().sum::<f64>() / ty.len() as f64;
    check(
        a <= 0.10 && m <= a + 0.02,
        format!("mean test speed {mean_y:.2}; LM MAPE {a:.4} (<= 0.10), MLP MAPE {m:.4} (<= {:.4})", a + 0.02),
    )
}

fn dataset_reproduction() -> Outcome {
    let Some(path) = std::env::var_os("SAXDIFF_TRILL_DATASET") else {
        return Outcome::Skip("set SAXDIFF_TRILL_DATASET to the recorded observation table".into());
    };
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let obs = match load_observations(&path, &inst.chart) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("cannot load {}: {e}", path.to_string_lossy())),
    };
    let intervals = std::env::var_os("SAXDIFF_INTERVALS")
        .map(|p| IntervalWeights::load(p).unwrap())
        .unwrap_or_else(IntervalWeights::bundled);
    let cfg = EvalConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut expert_wins = 0;
    for s in 0..5u64 {
        let table = model::scheme_table(&obs, &inst.keys, &weights, Some(&intervals), s, &cfg).unwrap();
        let cell = |scheme: &str, kind| table.iter().find(|r| r.scheme == scheme && r.model == kind).unwrap().mean;
        let raw = cell("R", ModelKind::Perceptron).mse;
        let expert: Vec<f64> = SCHEME_NAMES
            .iter()
            .filter(|n| n.starts_with('E'))
            .map(|n| cell(n, ModelKind::Perceptron).mse)
            .collect();
        if expert.iter().sum::<f64>() / (expert.len() as f64) < raw {
            expert_wins += 1;
        }
        if s == 0 {
            for n in SCHEME_NAMES {
                let m = cell(n, ModelKind::Linear).mape;
                if (m - 0.39).abs() > 0.03 {
                    ok = false;
                    notes.push(format!("LM {n} MAPE {m:.3}"));
                }
            }
            let hb = cell("E-HB(NoM)", ModelKind::Perceptron);
            let fb = cell("E-FB(NoM&EW)", ModelKind::Perceptron);
            ok &= (hb.mse - 0.34).abs() <= 0.15 && (hb.mape - 0.20).abs() <= 0.05 && (fb.mse - 0.33).abs() <= 0.15;
            notes.push(format!(
                "MLP E-HB(NoM) MSE {:.3} MAPE {:.3}; MLP E-FB(NoM&EW) MSE {:.3}",
                hb.mse, hb.mape, fb.mse
            ));
        }
    }
    ok &= expert_wins >= 4;
    notes.push(format!("expert beats raw in {expert_wins}/5 seeds"));
    let anchors = model::detect_anchors(&obs);
    match model::anchor_floor(&model::anchor_groups(&obs, &anchors)) {
        Some(f) => {
            ok &= (f.mean - 0.10).abs() <= 0.02;
            notes.push(format!("anchor floor {:.3}", f.mean));
        }
        None => {
            ok = false;
            notes.push("no anchors found".into());
        }
    }
    check(ok, notes.join("; "))
}

fn sampling_ordering() -> Outcome {
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let obs = simulated_dataset(&inst.chart, &inst.keys, &DatasetSpec::default(), 11).unwrap();
    let bigrams = BigramTable::bundled(inst.chart.range());
    let cfg = CurveConfig {
        grid: Some(vec![50, 100]),
        ..CurveConfig::default()
    };
    let points = learning_curve(&obs, &inst.keys, &weights, &bigrams, 11, &cfg).unwrap();
    let at = |m: SamplingMethod, n: usize| points.iter().find(|p| p.method == m && p.n == n).unwrap().mean_mape;
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [50, 100] {
        let (c, u, e) = (at(SamplingMethod::Cluster, n), at(SamplingMethod::Uniform, n), at(SamplingMethod::Empirical, n));
        ok &= c <= u && u < e;
        notes.push(format!("n={n}: cluster {c:.3}, uniform {u:.3}, empirical {e:.3}"));
    }
    check(ok, format!("simulated proxy, {} observations; {}", obs.len(), notes.join("; ")))
}

fn tempo_linearity() -> Outcome {
    let mut r = rng("tempo");
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let (mut path_changed, mut ratio_off) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for case in 0..100 {
        let model = random_model(&mut r, &weights);
        let part = if case == 0 {
            difficulty::parse_part(assets::DEMO_PART.as_bytes(), "demo", Some(inst.chart.range())).unwrap()
        } else {
            random_part(&mut r, inst.chart.range(), 24)
        };
        let scorer = ModelScorer {
            model: &model,
            keys: &inst.keys,
        };
        for objective in [PathObjective::Sum, PathObjective::Bottleneck] {
            cases += 1;
            let a = difficulty::annotate(&part, &inst.chart, &scorer, objective).unwrap();
            let b = difficulty::annotate(&part.with_tempo(2.0 * part.tempo_bpm), &inst.chart, &scorer, objective).unwrap();
            if a.path != b.path {
                path_changed += 1;
            }
            for (x, y) in a.transitions.iter().zip(&b.transitions) {
                let rel = (y.ratio / x.ratio - 2.0).abs() / 2.0;
                worst = worst.max(rel);
                if rel > 1e-12 {
                    ratio_off += 1;
                }
            }
        }
    }
    check(
        path_changed == 0 && ratio_off == 0,
        format!("{cases} decodes; {path_changed} paths changed, {ratio_off} ratios off 2x (worst relative {worst:.1e})"),
    )
}

fn feature_invariants() -> Outcome {
    let mut r = rng("features");
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let schemes: Vec<FeatureScheme> = SCHEME_NAMES.iter().map(|n| scheme_from_name(n, &weights).unwrap()).collect();
    let expected_len: BTreeMap<&str, usize> = [
        ("R", 46),
        ("F(PAF)", 12),
        ("F(P2FM)", 10),
        ("E-HB", 9),
        ("E-HB(NoM)", 7),
        ("E-HB(NoEW)", 9),
        ("E-HB(NoM&EW)", 7),
        ("E-FB", 16),
        ("E-FB(NoM)", 14),
        ("E-FB(NoEW)", 16),
        ("E-FB(NoM&EW)", 14),
    ]
    .into();
    let unit = |kind, midi| {
        let w = vec![1.0; saxdiff::features::slot_names(kind, midi).len()];
        FeatureScheme::new("unit", kind, midi, Some(w)).unwrap()
    };
    let unit_pairs = [
        ("E-HB(NoEW)", unit(FeatureKind::ExpertHandBased, true)),
        ("E-HB(NoM&EW)", unit(FeatureKind::ExpertHandBased, false)),
        ("E-FB(NoEW)", unit(FeatureKind::ExpertFingerBased, true)),
        ("E-FB(NoM&EW)", unit(FeatureKind::ExpertFingerBased, false)),
    ];
    let models: Vec<CostModel> = (0..8).map(|_| random_model(&mut r, &weights)).collect();
    let mut violations: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bump = |k: &'static str| *violations.entry(k).or_default() += 1;
    let mut min_pred = f64::INFINITY;
    let chart = inst.chart.fingerings();
    for i in 0..10_000 {
        // half chart fingerings, half arbitrary masks and pitches
        let f = |r: &mut ChaCha8Rng| {
            if i % 2 == 0 {
                chart[r.random_range(0..chart.len())].clone()
            } else {
                Fingering::new(random_mask(r), r.random_range(58..=90), "x")
            }
        };
        let t = Transition::new(f(&mut r), f(&mut r));
        let rev = t.reverse();
        for s in &schemes {
            let (a, b) = (s.encode_values(&t, &inst.keys), s.encode_values(&rev, &inst.keys));
            if a.len() != expected_len[s.name.as_str()] {
                bump("length");
            }
            let symmetric = match s.kind {
                FeatureKind::Raw => a[..23] == b[23..] && a[23..] == b[..23],
                FeatureKind::Finger(_) => a == b,
                _ if s.include_midi => a[0] == b[1] && a[1] == b[0] && a[2..] == b[2..],
                _ => a == b,
            };
            if !symmetric {
                bump("reversal");
            }
        }
        for (name, u) in &unit_pairs {
            let s = schemes.iter().find(|s| s.name == *name).unwrap();
            if s.encode_values(&t, &inst.keys) != u.encode_values(&t, &inst.keys) {
                bump("unit weights");
            }
        }
        let m = &models[i % models.len()];
        let p = m.predict(&t, &inst.keys);
        min_pred = min_pred.min(p);
        if p.is_nan() || p < 0.5 {
            bump("clamp");
        }
    }
    let total: usize = violations.values().sum();
    check(
        total == 0,
        format!("10000 transitions x 11 schemes; violations {violations:?}; lowest prediction {min_pred}"),
    )
}

fn end_to_end() -> Outcome {
    let inst = Instrument::bundled();
    let weights = ExpertWeights::bundled();
    let obs = simulated_dataset(&inst.chart, &inst.keys, &DatasetSpec::default(), 5).unwrap();
    let scheme = scheme_from_name("E-HB(NoM)", &weights).unwrap();
    let data = Dataset::encode(&obs, &scheme, &inst.keys);
    let m = model::train(ModelKind::Perceptron, &data, &scheme, 5, &TrainConfig::default()).unwrap();
    let scorer = ModelScorer {
        model: &m,
        keys: &inst.keys,
    };
    let doc = difficulty::parse_document(assets::DEMO_PART.as_bytes(), "demo", Some(inst.chart.range())).unwrap();
    let measures: std::collections::BTreeSet<&str> = doc.part.notes.iter().map(|n| n.measure.as_str()).collect();
    let report = difficulty::annotate(&doc.part, &inst.chart, &scorer, PathObjective::Sum).unwrap();
    let (xml, json) = difficulty::render_annotations(&report, &doc).unwrap();
    let again = difficulty::parse_part(xml.as_bytes(), "demo", Some(inst.chart.range())).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let json_notes = v["notes"].as_array().map_or(0, Vec::len);
    // same fingering pair, different note values
    let mut groups: BTreeMap<(&str, &str), Vec<(f64, f64)>> = BTreeMap::new();
    for t in &report.transitions {
        groups
            .entry((&report.notes[t.from].fingering, &report.notes[t.to].fingering))
            .or_default()
            .push((t.required_speed, t.ratio));
    }
    let (mut compared, mut inverted) = (0, 0);
    for g in groups.values() {
        for a in g {
            for b in g {
                if a.0 > b.0 {
                    compared += 1;
                    if a.1 < b.1 {
                        inverted += 1;
                    }
                }
            }
        }
    }
    let ok = doc.part.tempo_bpm == 160.0
        && measures.len() == 16
        && again == doc.part
        && json_notes == doc.part.sounding().len()
        && compared > 0
        && inverted == 0;
    check(
        ok,
        format!(
            "{} bars at {} BPM; re-parse identical: {}; {} report notes for {} sounding; {compared} faster/slower comparisons, {inverted} inverted",
            measures.len(),
            doc.part.tempo_bpm,
            again == doc.part,
            json_notes,
            doc.part.sounding().len()
        ),
    )
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 viterbi matches exhaustive search", Some(10), viterbi_oracle),
        ("2 trill extraction accuracy", Some(5), trill_extraction),
        ("3 regression sanity", Some(60), regression_sanity),
        ("4 dataset reproduction", None, dataset_reproduction),
        ("5 sampling ordering", None, sampling_ordering),
        ("6 tempo linearity and path invariance", None, tempo_linearity),
        ("7 feature invariants", None, feature_invariants),
        ("8 end to end demo", None, end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match timed(limit.map(Duration::from_secs), f) {
            Outcome::Pass(d) => println!("PASS  criterion {name}: {d}"),
            Outcome::Skip(d) => println!("SKIP  criterion {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  criterion {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
