use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use forrelation::bench::{derive_seed, run_experiment, to_csv, write_report, Experiment, ExperimentConfig};
use forrelation::blockpoly::{balance, BlockMultilinearPoly};
use forrelation::compiler::{compile_gatewise, compile_layers, verify_compilation, Circuit, CompileResult};
use forrelation::estimators::{
    estimate_blockpoly, estimate_quadratic, BlockInput, EstimatorConfig, Mode, MultilinearPoly, QuadraticConfig,
};
use forrelation::fourier::{exact_distribution, quantum_sample, relation_solve, tv_distance, Distribution, RelationStrategy};
use forrelation::gaussian::{make_forrelation_vectors, run_distinguisher, DistinguisherConfig, Strategy};
use forrelation::instances::{
    sample_kfold_hybrid, sample_real_pair, sign_round_tuple, Function, InstanceTuple, Measure, RealFunction, TruthTable,
};
use forrelation::phi::{phi, phi_bruteforce, phi_with_amplitudes};
use forrelation::qsim::{decide, halfk_accept_probability};

/// Residual above which `verify` reports failure.
const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "forrelab", version, about = "Forrelation experiments: exact values, simulators, estimators")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (or directory for `run-experiment`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an instance tuple.
    Gen(GenArgs),
    /// Exact Phi of an instance.
    Phi(PhiArgs),
    /// Run the half-k query algorithm and its decision rule.
    Qsim(InputArgs),
    /// Estimate a bounded polynomial at a point.
    Estimate(EstimateArgs),
    /// Compile a circuit into phase functions.
    Compile(CompileArgs),
    /// Check compiled functions against the circuit.
    Verify(VerifyArgs),
    /// Play Gaussian distinguishing episodes.
    Gaussian(GaussianArgs),
    /// Fourier sampling draws or the relation task.
    Fsample(FsampleArgs),
    /// Run a named experiment and write CSV plus JSON summary.
    RunExperiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "forrelated")]
    measure: Measure,
    /// Keep Gaussian values instead of rounding to signs.
    #[arg(long)]
    real: bool,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct PhiArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Include the twisted value for every z.
    #[arg(long)]
    amplitudes: bool,
    /// Also evaluate the nested sum directly.
    #[arg(long)]
    bruteforce: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    poly: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value = "main")]
    mode: Mode,
    #[arg(long, default_value_t = 16)]
    repetitions: usize,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Pack each layer into three functions instead of one per gate.
    #[arg(long)]
    layers: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    funcs: PathBuf,
}

#[derive(Args)]
struct GaussianArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value = "random-order")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0.5)]
    case_mix: f64,
}

#[derive(Args)]
struct FsampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    /// Solve the relation task with this threshold instead of listing draws.
    #[arg(long)]
    relation: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    name: String,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    strategy: Option<Strategy>,
}

/// What a command produced and whether it met its own acceptance bar.
struct Output {
    text: String,
    pass: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, pass: true }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let written = match (&cli.out, &cli.command) {
                (_, Command::RunExperiment(_)) | (None, _) => {
                    print!("{}", out.text);
                    Ok(())
                }
                (Some(path), _) => fs::write(path, &out.text).with_context(|| format!("writing {}", path.display())),
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let mut rng = derive_seed(cli.seed, 0);
    match &cli.command {
        Command::Gen(a) => {
            let t = match (a.k, a.measure) {
                (0, _) => bail!("k must be at least 1"),
                (1, _) => InstanceTuple::new(vec![Function::Real(RealFunction::gaussian(a.n, &mut rng))], None)?,
                (2, m) => sample_real_pair(a.n, m, &mut rng)?,
                (k, m) => sample_kfold_hybrid(a.n, k, m, &mut rng)?,
            };
            let t = if a.real { t } else { sign_round_tuple(&t) };
            Ok(Output::ok(pretty(&t)?))
        }
        Command::Phi(a) => {
            let t: InstanceTuple = read_json(&a.input)?;
            let result = if a.amplitudes { phi_with_amplitudes(&t) } else { phi(&t) };
            let mut value = serde_json::to_value(&result)?;
            if a.bruteforce {
                value["phi_bruteforce"] = json!(phi_bruteforce(&t)?);
            }
            Ok(Output::ok(pretty(&value)?))
        }
        Command::Qsim(a) => {
            let t: InstanceTuple = read_json(&a.input)?;
            let outcome = decide(&t, &mut rng)?;
            let value = json!({
                "phi": phi(&t).phi,
                "halfk_accept_probability": halfk_accept_probability(&t),
                "accept_probability": outcome.accept_probability,
                "decision": outcome.decision,
                "queries_used": outcome.queries_used,
            });
            Ok(Output::ok(pretty(&value)?))
        }
        Command::Estimate(a) => estimate(a, &mut rng),
        Command::Compile(a) => {
            let circuit: Circuit = read(&a.circuit)?.parse()?;
            let result = if a.layers { compile_layers(&circuit) } else { compile_gatewise(&circuit) };
            Ok(Output::ok(pretty(&result)?))
        }
        Command::Verify(a) => {
            let circuit: Circuit = read(&a.circuit)?.parse()?;
            let result: CompileResult = read_json(&a.funcs)?;
            let v = verify_compilation(&circuit, &result)?;
            Ok(Output { text: pretty(&v)?, pass: v.residual <= VERIFY_TOLERANCE })
        }
        Command::Gaussian(a) => {
            let set = make_forrelation_vectors(a.n)?;
            let cfg = DistinguisherConfig { strategy: a.strategy, t: a.t, trials: a.trials, case_mix: a.case_mix };
            let report = run_distinguisher(&set, &cfg, &mut rng)?;
            let text = match cli.format {
                Some(Format::Json) => pretty(&report)?,
                _ => to_csv(&report.trials)?,
            };
            Ok(Output::ok(text))
        }
        Command::Fsample(a) => fsample(a, cli.format, &mut rng),
        Command::RunExperiment(a) => {
            let experiment: Experiment = a.name.parse()?;
            let cfg = ExperimentConfig {
                experiment,
                seed: cli.seed,
                n: a.n,
                k: a.k,
                eps: a.eps,
                trials: a.trials,
                t: a.t,
                strategy: a.strategy,
            };
            let out = run_experiment(&cfg)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            write_report(&out, &dir)?;
            let text = match cli.format {
                Some(Format::Csv) => out.csv.clone(),
                _ => pretty(&out.summary)?,
            };
            Ok(Output { text, pass: out.summary.pass })
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum PolyFile {
    Block(BlockMultilinearPoly),
    General(MultilinearPoly),
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum PointFile {
    Blocks(Vec<Vec<f64>>),
    Shared(Vec<f64>),
}

fn estimate(a: &EstimateArgs, rng: &mut ChaCha20Rng) -> Result<Output> {
    let poly: PolyFile = read_json(&a.poly)?;
    let point: PointFile = read_json(&a.input)?;
    match poly {
        PolyFile::Block(p) => {
            let input = match point {
                PointFile::Blocks(values) => BlockInput::per_block(values),
                PointFile::Shared(x) => {
                    let positions: Vec<Option<usize>> = (0..x.len()).map(Some).collect();
                    BlockInput::new(vec![x; p.k()], vec![positions; p.k()])?
                }
            };
            let n = p.block_sizes().iter().copied().max().unwrap_or(1).max(1);
            let balanced = balance(&p, a.eps * a.eps / n as f64)?;
            let cfg = EstimatorConfig { mode: a.mode, repetitions: a.repetitions, mark_probability: None };
            let report = estimate_blockpoly(&balanced, &input, rng, &cfg)?;
            Ok(Output::ok(pretty(&report)?))
        }
        PolyFile::General(p) => {
            let PointFile::Shared(x) = point else {
                bail!("a general polynomial takes a flat list of signs");
            };
            let signs = x
                .iter()
                .map(|&v| match v {
                    1.0 => Ok(1i8),
                    -1.0 => Ok(-1i8),
                    other => bail!("input value {other} is not a sign"),
                })
                .collect::<Result<Vec<i8>>>()?;
            let report = estimate_quadratic(&p, &signs, a.eps, rng, &QuadraticConfig::default())?;
            Ok(Output::ok(pretty(&report)?))
        }
    }
}

fn fsample(a: &FsampleArgs, format: Option<Format>, rng: &mut ChaCha20Rng) -> Result<Output> {
    #[derive(serde::Serialize)]
    struct Draw {
        draw: usize,
        y: usize,
        success: Option<bool>,
    }
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum TableFile {
        Table(TruthTable),
        Tuple(InstanceTuple),
    }
    let f = match read_json::<TableFile>(&a.input)? {
        TableFile::Table(t) => t,
        TableFile::Tuple(t) => t.tables()?.first().map(|t| (*t).clone()).context("empty tuple")?,
    };

    let mut draws = Vec::with_capacity(a.draws);
    let mut successes = 0usize;
    for draw in 0..a.draws {
        let (y, success) = match a.relation {
            Some(c) => {
                let r = relation_solve(&f, c, RelationStrategy::Quantum, rng)?;
                successes += usize::from(r.success);
                (r.y, Some(r.success))
            }
            None => (quantum_sample(&f, rng).y, None),
        };
        draws.push(Draw { draw, y, success });
    }
    if format == Some(Format::Json) {
        let ys: Vec<usize> = draws.iter().map(|d| d.y).collect();
        let tv = if ys.is_empty() {
            None
        } else {
            Some(tv_distance(&Distribution::empirical(f.n(), &ys)?, &exact_distribution(&f))?)
        };
        let mut summary = json!({ "n": f.n(), "draws": a.draws, "queries": a.draws, "tv_to_exact": tv });
        if a.relation.is_some() {
            summary["success_rate"] = json!(successes as f64 / a.draws.max(1) as f64);
        }
        return Ok(Output::ok(pretty(&summary)?));
    }
    Ok(Output::ok(to_csv(&draws)?))
}
