//! `nol`: train, sweep and regret-check driver. Reports go to standard
//! output (or `--report`), diagnostics to standard error.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric fault.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nol_core::data::{
    prenormalize, synth_figure1, synth_scaled, to_svmlight_line, DataFormat, DelimitedReader, LabelColumn,
    LabelTransform, Normalization, ScaledSpec, SvmlightReader,
};
use nol_core::eval::{progressive_validation, sweep, write_eta_curves, write_scale_curve, EtaGrid, SweepSpec};
use nol_core::learners::{continue_stream, EtaDecay, Learner, LearnerConfig, LearnerKind, LearnerState};
use nol_core::regret::{run_suite, CheckKind, SuiteConfig};
use nol_core::report::{DatasetEcho, RegretSuiteReport, RunConfig, RunReport, SweepReport, Timing, SCHEMA_VERSION};
use nol_core::{Error, Loss, SparseExample};

#[derive(Parser)]
#[command(name = "nol", version, about = "Scale-invariant online linear learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Progressive validation of one learner on one stream.
    Train(TrainArgs),
    /// Exhaustive learning-rate sweep over several learners.
    Sweep(SweepArgs),
    /// Loss against feature scale on the two-feature synthetic stream.
    ScaleCurve(ScaleCurveArgs),
    /// Seeded suites of regret-bound checks.
    Regret(RegretArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input file.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    data: Option<PathBuf>,
    /// Synthetic stream: `figure1:s=..,T=..` or `scaled:d=..,T=..,lo=..,hi=..,density=..,noise=..,task=regression|classification`.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, default_value = "svmlight")]
    format: String,
    /// Label column for delimited input: a header name or 0-based index (default: last).
    #[arg(long)]
    label_column: Option<String>,
    /// Label mapping for delimited input: identity, zero-one, or positive=VALUE.
    #[arg(long, default_value = "identity")]
    label_transform: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "nag")]
    learner: LearnerKind,
    #[arg(long, default_value = "squared")]
    loss: Loss,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// none or inverse-sqrt-t (ng and sgd only).
    #[arg(long, default_value = "none")]
    eta_decay: String,
    #[arg(long, default_value = "none")]
    normalize: Normalization,
    /// Truncate predictions to [-C, C].
    #[arg(long)]
    clip_c: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Keep every k-th trace entry.
    #[arg(long, default_value_t = 1)]
    trace_stride: usize,
    /// Include the full learner state in the report.
    #[arg(long)]
    emit_state: bool,
    /// Resume from the state stored in an earlier report.
    #[arg(long)]
    warm_start: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "nag,adagrad")]
    learners: Vec<LearnerKind>,
    #[arg(long, default_value = "squared")]
    loss: Loss,
    /// `LO..HI` (powers of two inside the range) or a single value.
    #[arg(long, default_value = "2^-20..2^6")]
    eta_grid: EtaGrid,
    #[arg(long, value_delimiter = ',', default_value = "none")]
    normalize: Vec<Normalization>,
    #[arg(long)]
    clip_c: Option<f64>,
    /// Score with one-against-all multiclass 0-1 loss.
    #[arg(long)]
    multiclass: bool,
    /// Write `learner,eta,loss` CSV here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleCurveArgs {
    #[arg(long, value_delimiter = ',', default_value = "nag,adagrad")]
    learners: Vec<LearnerKind>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1,10,100,1000")]
    scales: Vec<f64>,
    /// Stream length.
    #[arg(long = "len", default_value_t = 1000)]
    len: usize,
    #[arg(long, default_value = "hinge")]
    loss: Loss,
    /// Grid for tuning each learner at scale 1.
    #[arg(long, default_value = "2^-10..2^4")]
    eta_grid: EtaGrid,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `learner,scale,loss` CSV here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RegretArgs {
    #[arg(long)]
    check: CheckKind,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comparator ball radius.
    #[arg(short = 'C', long = "radius", default_value_t = 1.0)]
    c: f64,
    /// Maximum instance dimension (also the `d` in tau for cor1).
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    /// Losses cycled over instances (default depends on the check).
    #[arg(long, value_delimiter = ',')]
    loss: Vec<Loss>,
    /// Rounds per instance.
    #[arg(long = "len")]
    len: Option<usize>,
    #[arg(long)]
    oracle_iterations: Option<usize>,
    /// lemma1 only: hold the conditioner fixed for every round.
    #[arg(long)]
    constant_conditioner: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_kv(spec: &str) -> Result<(String, Vec<(String, String)>), Error> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut out = Vec::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value in synthetic spec, got '{part}'")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((kind.to_string(), out))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value '{v}' for '{key}'")))
}

fn synthesize(spec: &str, seed: u64) -> Result<Vec<SparseExample>, Error> {
    let (kind, kv) = parse_kv(spec)?;
    match kind.as_str() {
        "figure1" => {
            let (mut s, mut len) = (1.0, 1000);
            for (k, v) in &kv {
                match k.as_str() {
                    "s" => s = num(k, v)?,
                    "T" => len = num(k, v)?,
                    _ => return Err(Error::InvalidConfig(format!("unknown figure1 key '{k}'"))),
                }
            }
            synth_figure1(s, len, seed)
        }
        "scaled" => {
            let mut p = ScaledSpec::default();
            for (k, v) in &kv {
                match k.as_str() {
                    "d" => p.dim = num(k, v)?,
                    "T" => p.len = num(k, v)?,
                    "lo" => p.log10_lo = num(k, v)?,
                    "hi" => p.log10_hi = num(k, v)?,
                    "density" => p.density = num(k, v)?,
                    "noise" => p.noise = num(k, v)?,
                    "task" => {
                        p.classification = match v.as_str() {
                            "classification" => true,
                            "regression" => false,
                            _ => return Err(Error::InvalidConfig(format!("unknown task '{v}'"))),
                        }
                    }
                    _ => return Err(Error::InvalidConfig(format!("unknown scaled key '{k}'"))),
                }
            }
            synth_scaled(&p, seed)
        }
        other => Err(Error::InvalidConfig(format!("unknown synthetic stream '{other}'"))),
    }
}

fn label_transform(s: &str) -> Result<LabelTransform, Error> {
    match s {
        "identity" => Ok(LabelTransform::Identity),
        "zero-one" => Ok(LabelTransform::ZeroOneToSigned),
        other => match other.strip_prefix("positive=") {
            Some(v) => Ok(LabelTransform::PositiveClass(v.to_string())),
            None => Err(Error::InvalidConfig(format!("unknown label transform '{other}'"))),
        },
    }
}

/// Loads the examples and describes where they came from.
fn load(args: &DataArgs) -> Result<(Vec<SparseExample>, DatasetEcho), Error> {
    if let Some(spec) = &args.synth {
        let xs = synthesize(spec, args.seed)?;
        let mut h = Sha256::new();
        for x in &xs {
            h.update(to_svmlight_line(x).as_bytes());
            h.update(b"\n");
        }
        let echo = DatasetEcho {
            source: format!("synth:{spec}"),
            format: "svmlight".into(),
            digest: hex::encode(h.finalize()),
            examples: xs.len(),
        };
        return Ok((xs, echo));
    }
    let path = args.data.as_ref().expect("clap requires --data or --synth");
    let bytes = std::fs::read(path)?;
    let format: DataFormat = args.format.parse()?;
    let xs: Vec<SparseExample> = match format {
        DataFormat::Svmlight => SvmlightReader::new(BufReader::new(bytes.as_slice())).collect::<Result<_, _>>()?,
        DataFormat::Csv => {
            let first = BufReader::new(bytes.as_slice())
                .lines()
                .next()
                .transpose()?
                .unwrap_or_default();
            let label = match &args.label_column {
                None => LabelColumn::Last,
                Some(c) => c
                    .parse()
                    .map(LabelColumn::Index)
                    .unwrap_or_else(|_| LabelColumn::Name(c.clone())),
            };
            DelimitedReader::new(
                bytes.as_slice(),
                DelimitedReader::<&[u8]>::sniff_delimiter(&first),
                label,
                label_transform(&args.label_transform)?,
            )?
            .collect::<Result<_, _>>()?
        }
    };
    if xs.is_empty() {
        return Err(Error::InvalidExample(format!(
            "{} contains no examples",
            path.display()
        )));
    }
    let echo = DatasetEcho {
        source: path.display().to_string(),
        format: args.format.clone(),
        digest: hex::encode(Sha256::digest(&bytes)),
        examples: xs.len(),
    };
    Ok((xs, echo))
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    match path {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(json.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn eta_decay(s: &str) -> Result<EtaDecay, Error> {
    match s {
        "none" => Ok(EtaDecay::None),
        "inverse-sqrt-t" => Ok(EtaDecay::InverseSqrtT),
        other => Err(Error::InvalidConfig(format!("unknown eta decay '{other}'"))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let start = Instant::now();
    let (raw, dataset) = load(&args.data)?;
    let (_, xs) = prenormalize(&raw, args.normalize)?;
    let mut config = LearnerConfig::new(args.learner, args.eta).with_decay(eta_decay(&args.eta_decay)?);
    config.clip = args.clip_c;
    let learner = match &args.warm_start {
        None => Learner::new(config, args.loss)?,
        Some(path) => {
            let prior: RunReport = serde_json::from_slice(&std::fs::read(path)?)
                .map_err(|e| Error::InvalidConfig(format!("cannot read warm-start report: {e}")))?;
            let snap = prior
                .state
                .ok_or_else(|| Error::InvalidConfig("warm-start report has no state (run with --emit-state)".into()))?;
            Learner::with_state(config, args.loss, LearnerState::from_snapshot(&snap)?)?
        }
    };
    let run = continue_stream(learner, xs.into_iter().map(Ok))?;
    let progressive = progressive_validation(&run, None)?;
    let config = RunConfig {
        learner: args.learner,
        loss: args.loss,
        eta: args.eta,
        eta_decay: config.eta_decay,
        clip: args.clip_c,
        normalization: args.normalize,
        seed: args.data.seed,
        dataset,
        warm_start: args.warm_start.as_ref().map(|p| p.display().to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let report = RunReport::new(config, &run, &progressive, args.trace_stride, args.emit_state, elapsed);
    emit(&report, args.report.as_deref())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let start = Instant::now();
    let (xs, dataset) = load(&args.data)?;
    let spec = SweepSpec {
        grid: args.eta_grid,
        learners: args.learners,
        loss: args.loss,
        normalizations: args.normalize,
        clip: args.clip_c,
        multiclass: args.multiclass,
    };
    let comparison = sweep(&spec, &xs)?;
    if let Some(path) = &args.plot_data {
        write_eta_curves(&comparison, File::create(path)?)?;
    }
    let report = SweepReport::new(dataset, comparison, start.elapsed().as_secs_f64() * 1e3);
    emit(&report, args.report.as_deref())
}

#[derive(Serialize)]
struct ScaleCurvePoint {
    learner: LearnerKind,
    eta: f64,
    scale: f64,
    loss: Option<f64>,
}

#[derive(Serialize)]
struct ScaleCurveReport {
    schema_version: u32,
    kind: &'static str,
    loss: Loss,
    len: usize,
    seed: u64,
    points: Vec<ScaleCurvePoint>,
    timing: Timing,
}

fn cmd_scale_curve(args: ScaleCurveArgs) -> Result<(), Error> {
    let start = Instant::now();
    let average = |kind, eta, xs: &[SparseExample]| {
        nol_core::learners::run_stream(LearnerConfig::new(kind, eta), args.loss, xs.iter().cloned().map(Ok))
            .ok()
            .map(|r| r.average_loss)
            .filter(|v| v.is_finite())
    };
    let base = synth_figure1(1.0, args.len, args.seed)?;
    let streams: Vec<(f64, Vec<SparseExample>)> = args
        .scales
        .iter()
        .map(|&s| synth_figure1(s, args.len, args.seed).map(|xs| (s, xs)))
        .collect::<Result<_, _>>()?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &kind in &args.learners {
        let eta = args
            .eta_grid
            .etas()
            .iter()
            .filter_map(|&e| average(kind, e, &base).map(|l| (e, l)))
            .fold(None, |acc: Option<(f64, f64)>, (e, l)| match acc {
                Some((_, bl)) if bl <= l => acc,
                _ => Some((e, l)),
            })
            .map(|b| b.0)
            .ok_or_else(|| Error::NumericFault {
                context: format!("every {} tuning run diverged", kind.name()),
                index: None,
            })?;
        for (s, xs) in &streams {
            let loss = average(kind, eta, xs);
            if let Some(l) = loss {
                rows.push((kind.name().to_string(), *s, l));
            }
            points.push(ScaleCurvePoint {
                learner: kind,
                eta,
                scale: *s,
                loss,
            });
        }
    }
    if let Some(path) = &args.plot_data {
        write_scale_curve(&rows, File::create(path)?)?;
    }
    let report = ScaleCurveReport {
        schema_version: SCHEMA_VERSION,
        kind: "scale-curve",
        loss: args.loss,
        len: args.len,
        seed: args.seed,
        points,
        timing: Timing {
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };
    emit(&report, args.report.as_deref())
}

fn cmd_regret(args: RegretArgs) -> Result<(), Error> {
    let start = Instant::now();
    let mut cfg = SuiteConfig::new(args.check, args.instances, args.seed);
    cfg.c = args.c;
    cfg.max_dim = args.d;
    cfg.delta = args.delta;
    cfg.nu = args.nu;
    cfg.constant_conditioner = args.constant_conditioner;
    if !args.loss.is_empty() {
        cfg.losses = args.loss;
    }
    if let Some(len) = args.len {
        cfg.len = len;
    }
    if let Some(it) = args.oracle_iterations {
        cfg.oracle_iterations = it;
    }
    if cfg.max_dim == 0 || !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(Error::InvalidConfig("need --d >= 1 and a positive radius".into()));
    }
    let (reports, summary) = run_suite(&cfg)?;
    let report = RegretSuiteReport::new(cfg, reports, summary, start.elapsed().as_secs_f64() * 1e3);
    emit(&report, args.report.as_deref())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric_fault() {
        3
    } else if e.is_data_error() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ScaleCurve(a) => cmd_scale_curve(a),
        Command::Regret(a) => cmd_regret(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nol: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
