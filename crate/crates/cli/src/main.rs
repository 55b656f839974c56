use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use saxdiff::assets::{self, AssetDir};
use saxdiff::batch::{self, ManifestRow};
use saxdiff::difficulty::{self, ModelScorer, PathObjective};
use saxdiff::features::{scheme_from_name, ExpertWeights, SCHEME_NAMES};
use saxdiff::fingering::{FingeringChart, KeyTable};
use saxdiff::model::{self, CostModel, Dataset, EvalConfig, ModelKind, TrainConfig};
use saxdiff::observations::{self, IntervalWeights, TrillObservation};
use saxdiff::sampling::{self, BigramTable, CurveConfig, SamplingMethod, DEFAULT_ALPHA};
use saxdiff::seed;
use saxdiff::synth::{self, DatasetSpec, TrackSpec};
use saxdiff::trill::{ExtractionConfig, TENOR_TRANSPOSITION};
use saxdiff::Instrument;

#[derive(Parser, Debug)]
#[command(name = "saxdiff", version, about = "Trill-speed cost models and tempo-relative difficulty for tenor saxophone parts")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory holding replacement asset files (keys.tsv, chart.tsv, ...).
    #[arg(long, global = true, env = assets::DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    keys: Option<PathBuf>,
    #[arg(long, global = true)]
    chart: Option<PathBuf>,
    /// Expert feature weights.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Corpus pitch bigram counts.
    #[arg(long, global = true)]
    bigrams: Option<PathBuf>,
    /// Interval weights for weighted MSE.
    #[arg(long, global = true)]
    intervals: Option<PathBuf>,
    /// -v for debug, -vv for trace.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn recorded f0 tracks into an observation table.
    Extract {
        /// CSV with columns track,player_id,session_id,from,to
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a cost model on an observation table.
    Train {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SCHEME_NAMES))]
        scheme: String,
        #[arg(long, default_value = "mlp")]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Cross-validate every scheme under both model classes.
    Evaluate {
        #[arg(long)]
        observations: PathBuf,
        /// Table CSV; printed to stdout either way.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 150)]
        fold_size: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Learning curves for the training-set samplers.
    Curve {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SCHEME_NAMES))]
        scheme: Option<String>,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, value_delimiter = ',', default_value = "uniform,cluster,empirical")]
        methods: Vec<SamplingMethod>,
        /// Additive smoothing for the bigram table.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 150)]
        fold_size: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Decode fingerings for a part and color it by difficulty.
    Difficulty {
        /// MusicXML (.musicxml, .xml or compressed .mxl)
        #[arg(long)]
        score: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Overrides the tempo marked in the score.
        #[arg(long)]
        tempo: Option<f64>,
        /// Writes PREFIX.musicxml and PREFIX.json; defaults to the score path
        /// minus its extension plus `.difficulty`.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Objective::Sum)]
        objective: Objective,
    },
    /// Print the key map and fingering chart.
    Chart,
    /// Split every chart pair into recording sessions.
    Plan {
        #[arg(long, default_value_t = 65)]
        session_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a simulated observation table, and optionally the f0 tracks
    /// and manifest that `extract` turns back into it.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        players: usize,
        #[arg(long, default_value_t = 65)]
        session_size: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long)]
    clamp_floor: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(v) = self.clamp_floor {
            cfg.clamp_floor = v;
        }
        if let Some(v) = self.hidden {
            if v == 0 {
                bail!("--hidden must be at least 1");
            }
            cfg.perceptron.hidden = v;
        }
        if let Some(v) = self.restarts {
            cfg.perceptron.restarts = v.max(1);
        }
        if let Some(v) = self.max_iter {
            cfg.perceptron.lbfgs.max_iter = v;
        }
        if let Some(v) = self.l2 {
            cfg.perceptron.l2 = v;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Objective {
    /// Fastest total
    Sum,
    /// Fastest slowest transition
    Bottleneck,
}

impl From<Objective> for PathObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Sum => PathObjective::Sum,
            Objective::Bottleneck => PathObjective::Bottleneck,
        }
    }
}

struct Inputs {
    assets: AssetDir,
    keys: Option<PathBuf>,
    chart: Option<PathBuf>,
    weights: Option<PathBuf>,
    bigrams: Option<PathBuf>,
    intervals: Option<PathBuf>,
}

impl Inputs {
    fn instrument(&self) -> Result<Instrument> {
        let (text, src) = self.assets.read(self.keys.as_deref(), assets::KEY_TABLE_FILE, assets::KEY_TABLE)?;
        let keys = KeyTable::parse(&text, &src)?;
        let (text, src) = self.assets.read(self.chart.as_deref(), assets::CHART_FILE, assets::CHART)?;
        let chart = FingeringChart::parse(&text, &src, &keys)?;
        Ok(Instrument { keys, chart })
    }

    fn expert_weights(&self) -> Result<ExpertWeights> {
        let (text, src) = self
            .assets
            .read(self.weights.as_deref(), assets::EXPERT_WEIGHTS_FILE, assets::EXPERT_WEIGHTS)?;
        Ok(ExpertWeights::parse(&text, &src)?)
    }

    fn bigrams(&self, range: (i32, i32), alpha: f64) -> Result<BigramTable> {
        let (text, src) = self.assets.read(self.bigrams.as_deref(), assets::BIGRAMS_FILE, assets::BIGRAMS)?;
        Ok(BigramTable::parse(&text, &src, range, alpha)?)
    }

    /// A missing file is not fatal: the weighted metric is reported as
    /// unavailable.
    fn interval_weights(&self) -> Option<IntervalWeights> {
        let loaded = self
            .assets
            .read(self.intervals.as_deref(), assets::INTERVALS_FILE, assets::INTERVALS)
            .and_then(|(text, src)| IntervalWeights::parse(&text, &src));
        match loaded {
            Ok(w) => Some(w),
            Err(e) => {
                warn!("{e}; weighted MSE unavailable");
                None
            }
        }
    }
}

/// Writes next to the destination, then renames into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn load_obs(path: &Path, inst: &Instrument) -> Result<Vec<TrillObservation>> {
    let obs = observations::load_observations(path, &inst.chart)?;
    info!("{} observations from {}", obs.len(), path.display());
    Ok(obs)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "unavailable".into(), |v| format!("{v:.4}"))
}

fn extract(ctx: &Inputs, manifest: &Path, out: &Path) -> Result<ExitCode> {
    let inst = ctx.instrument()?;
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let rows = batch::parse_manifest(&text, &manifest.display().to_string(), base)?;
    let cfg = ExtractionConfig::default();
    let mut records = Vec::new();
    let mut failed = 0;
    for (i, row) in rows.iter().enumerate() {
        match batch::extract_row(row, &inst.chart, &cfg, TENOR_TRANSPOSITION) {
            Ok(r) => {
                if let Some(review) = &r.record.review {
                    warn!("{}: {review}", row.track.display());
                }
                records.push(r.record);
            }
            Err(e) => {
                error!("manifest row {} ({}): {e}", i + 2, row.track.display());
                failed += 1;
            }
        }
    }
    let flagged = records.iter().filter(|r| r.review.is_some()).count();
    write_atomic(out, &observations::records_to_csv(records.iter().cloned())?)?;
    println!(
        "extracted {} of {} tracks ({} flagged for review) -> {}",
        records.len(),
        rows.len(),
        flagged,
        out.display()
    );
    if failed > 0 {
        error!("{failed} track(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn train(ctx: &Inputs, seed: u64, observations: &Path, scheme: &str, kind: ModelKind, out: &Path, args: &TrainArgs) -> Result<()> {
    let inst = ctx.instrument()?;
    let scheme = scheme_from_name(scheme, &ctx.expert_weights()?)?;
    let obs = load_obs(observations, &inst)?;
    let data = Dataset::encode(&obs, &scheme, &inst.keys);
    let m = model::train(kind, &data, &scheme, seed::derive(seed, "train", 0), &args.config()?)?;
    write_atomic(out, &m.to_json()?)?;
    println!(
        "{} on {} ({} slots), {} rows, training MSE {:.4}, data {} -> {}",
        m.kind,
        m.scheme,
        m.scheme.len(),
        data.len(),
        m.train_mse,
        &m.data_checksum[..12],
        out.display()
    );
    Ok(())
}

fn evaluate(ctx: &Inputs, seed: u64, observations: &Path, out: Option<&Path>, fold_size: usize, args: &TrainArgs) -> Result<()> {
    let inst = ctx.instrument()?;
    let weights = ctx.expert_weights()?;
    let obs = load_obs(observations, &inst)?;
    let iw = ctx.interval_weights();
    let cfg = EvalConfig {
        fold_test_size: fold_size,
        train: args.config()?,
    };
    let reports = model::scheme_table(&obs, &inst.keys, &weights, iw.as_ref(), seed, &cfg)?;
    let csv = model::table_to_csv(&reports)?;
    if let Some(p) = out {
        write_atomic(p, &csv)?;
    }
    println!("{} folds", reports.first().map_or(0, |r| r.fold_count));
    println!("{:<14} {:>8} {:>11} {:>8} {:>8} {:>11} {:>8}", "scheme", "LM MSE", "LM wMSE", "LM MAPE", "MLP MSE", "MLP wMSE", "MLP MAPE");
    for pair in reports.chunks(2) {
        let (lm, mlp) = (&pair[0].mean, &pair[1].mean);
        println!(
            "{:<14} {:>8.4} {:>11} {:>8.4} {:>8.4} {:>11} {:>8.4}",
            pair[0].scheme,
            lm.mse,
            fmt_opt(lm.wmse),
            lm.mape,
            mlp.mse,
            fmt_opt(mlp.wmse),
            mlp.mape
        );
    }
    let anchors = model::detect_anchors(&obs);
    match model::anchor_floor(&model::anchor_groups(&obs, &anchors)) {
        Some(f) => println!(
            "anchor floor over {} anchors: mean MAPE {:.4} (min {:.4}, max {:.4})",
            f.per_anchor.len(),
            f.mean,
            f.min,
            f.max
        ),
        None => println!("anchor floor: no transition was recorded in every session"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn curve(
    ctx: &Inputs,
    seed: u64,
    observations: &Path,
    out: Option<&Path>,
    scheme: Option<&str>,
    grid: Option<Vec<usize>>,
    seeds: usize,
    methods: Vec<SamplingMethod>,
    alpha: f64,
    fold_size: usize,
    args: &TrainArgs,
) -> Result<()> {
    let inst = ctx.instrument()?;
    let weights = ctx.expert_weights()?;
    let bigrams = ctx.bigrams(inst.chart.range(), alpha)?;
    let obs = load_obs(observations, &inst)?;
    let cfg = CurveConfig {
        scheme: scheme.map(|s| scheme_from_name(s, &weights)).transpose()?,
        grid,
        seeds,
        methods,
        eval: EvalConfig {
            fold_test_size: fold_size,
            train: args.config()?,
        },
    };
    let points = sampling::learning_curve(&obs, &inst.keys, &weights, &bigrams, seed, &cfg)?;
    let csv = sampling::curve_to_csv(&points)?;
    match out {
        Some(p) => {
            write_atomic(p, &csv)?;
            println!("{} curve points -> {}", points.len(), p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn default_prefix(score: &Path) -> PathBuf {
    let mut p = score.to_path_buf();
    p.set_extension("");
    let mut s = p.into_os_string();
    s.push(".difficulty");
    s.into()
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    s.into()
}

fn difficulty(ctx: &Inputs, score: &Path, model: &Path, tempo: Option<f64>, out_prefix: Option<PathBuf>, objective: Objective) -> Result<()> {
    let inst = ctx.instrument()?;
    let cost = CostModel::load(model)?;
    let mut doc = difficulty::load_document(score, Some(inst.chart.range()))?;
    if let Some(t) = tempo {
        if !(t > 0.0 && t.is_finite()) {
            bail!("--tempo must be a positive number of beats per minute, got {t}");
        }
        doc.part = doc.part.with_tempo(t);
    }
    let scorer = ModelScorer {
        model: &cost,
        keys: &inst.keys,
    };
    let report = difficulty::annotate(&doc.part, &inst.chart, &scorer, objective.into())?;
    let (xml, json) = difficulty::render_annotations(&report, &doc)?;
    let prefix = out_prefix.unwrap_or_else(|| default_prefix(score));
    let (xml_path, json_path) = (with_suffix(&prefix, ".musicxml"), with_suffix(&prefix, ".json"));
    write_atomic(&xml_path, &xml)?;
    write_atomic(&json_path, &json)?;
    let s = report.summary;
    println!(
        "{} notes at {} BPM ({} model on {}), {:?} objective",
        report.notes.len(),
        report.tempo_bpm,
        cost.kind,
        cost.scheme,
        report.objective
    );
    println!(
        "mean ratio {:.3}, max ratio {:.3}, {} of {} transitions over 1 ({:.1}%)",
        s.mean_ratio,
        s.max_ratio,
        s.over_one,
        report.transitions.len(),
        100.0 * s.fraction_over_one
    );
    if let Some((i, t)) = report
        .transitions
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
    {
        let (a, b) = (&report.notes[t.from], &report.notes[t.to]);
        println!(
            "hardest: transition {i} in measure {}, {} -> {} needs {:.2}/s, predicted {:.2}/s",
            a.measure, a.fingering, b.fingering, t.required_speed, t.predicted_max
        );
    }
    println!("-> {} and {}", xml_path.display(), json_path.display());
    Ok(())
}

fn plan(ctx: &Inputs, seed: u64, session_size: usize, out: Option<&Path>) -> Result<()> {
    let inst = ctx.instrument()?;
    let pairs = inst.chart.unordered_pairs(false);
    let anchors = sampling::default_anchors(&inst.chart)?;
    let plan = sampling::plan_sessions(&pairs, session_size, &anchors, seed::derive(seed, "sessions", 0), &inst.chart, &inst.keys)?;
    let csv = batch::session_plan_to_csv(&plan)?;
    match out {
        Some(p) => {
            write_atomic(p, &csv)?;
            println!(
                "{} pairs in {} sessions of up to {} (with {} anchors each) -> {}",
                pairs.len(),
                plan.sessions.len(),
                session_size,
                anchors.len(),
                p.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn midi_hz(m: i32) -> f64 {
    440.0 * 2f64.powf(f64::from(m - 69) / 12.0)
}

fn simulate(ctx: &Inputs, seed: u64, out: &Path, tracks: Option<&Path>, players: usize, session_size: usize) -> Result<()> {
    let inst = ctx.instrument()?;
    let spec = DatasetSpec {
        players,
        session_size,
        ..DatasetSpec::default()
    };
    let obs = synth::simulated_dataset(&inst.chart, &inst.keys, &spec, seed)?;
    write_atomic(out, &observations::observations_to_csv(&obs)?)?;
    println!("{} simulated observations -> {}", obs.len(), out.display());
    let Some(dir) = tracks else { return Ok(()) };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut rows = Vec::with_capacity(obs.len());
    for (i, o) in obs.iter().enumerate() {
        let (a, b) = (o.transition.from.written_midi, o.transition.to.written_midi);
        let (lo, hi) = (a.min(b) - TENOR_TRANSPOSITION, a.max(b) - TENOR_TRANSPOSITION);
        let track_spec = TrackSpec {
            duration: (60.0 / o.speed).max(4.0),
            confidence_noise: true,
            ..TrackSpec::new(o.speed, midi_hz(lo), midi_hz(hi))
        };
        let name = format!("track{i:04}.csv");
        let track = synth::square_wave_track(&track_spec, seed::derive(seed, "tracks", i as u64), &name);
        write_atomic(&dir.join(&name), &track.to_csv())?;
        rows.push(ManifestRow {
            track: PathBuf::from(&name),
            player_id: o.player_id.clone(),
            session_id: o.session_id.clone(),
            from: o.transition.from.label.clone(),
            to: o.transition.to.label.clone(),
        });
    }
    let manifest = dir.join("manifest.csv");
    write_atomic(&manifest, &batch::manifest_to_csv(&rows)?)?;
    println!("{} f0 tracks and manifest -> {}", rows.len(), manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Inputs {
        assets: AssetDir::new(cli.data_dir),
        keys: cli.keys,
        chart: cli.chart,
        weights: cli.weights,
        bigrams: cli.bigrams,
        intervals: cli.intervals,
    };
    let seed = cli.seed;
    match cli.command {
        Command::Extract { manifest, out } => return extract(&ctx, &manifest, &out),
        Command::Train {
            observations,
            scheme,
            model,
            out,
            train: t,
        } => train(&ctx, seed, &observations, &scheme, model, &out, &t)?,
        Command::Evaluate {
            observations,
            out,
            fold_size,
            train: t,
        } => evaluate(&ctx, seed, &observations, out.as_deref(), fold_size, &t)?,
        Command::Curve {
            observations,
            out,
            scheme,
            grid,
            seeds,
            methods,
            alpha,
            fold_size,
            train: t,
        } => curve(&ctx, seed, &observations, out.as_deref(), scheme.as_deref(), grid, seeds, methods, alpha, fold_size, &t)?,
        Command::Difficulty {
            score,
            model,
            tempo,
            out_prefix,
            objective,
        } => difficulty(&ctx, &score, &model, tempo, out_prefix, objective)?,
        Command::Chart => {
            let inst = ctx.instrument()?;
            print!("{}", batch::describe_chart(&inst.keys, &inst.chart));
        }
        Command::Plan { session_size, out } => plan(&ctx, seed, session_size, out.as_deref())?,
        Command::Simulate {
            out,
            tracks,
            players,
            session_size,
        } => simulate(&ctx, seed, &out, tracks.as_deref(), players, session_size)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
