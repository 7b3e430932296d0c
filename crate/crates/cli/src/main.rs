mod manifest;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use pinmix::exact::{default_grid, exact_report, ExactError};
use pinmix::experiments::{
    bridge_min_tail_exact, censored_wedge_protocol, mixing_sweep, sep_height, three_chain_sandwich,
    vee_boundary_contact_check, write_cutoff_table, write_mixing_curve, write_tau_samples, ConfigError, CutoffRow,
    ExperimentConfig, ExperimentError, TauSummary,
};
use pinmix::rng::{derive_seed, stream};
use pinmix::statespace::{EquilibriumSampler, ModelParams};

use manifest::{now_unix, OutputFile, RunManifest};

const SAMPLE_STREAM: u64 = 0x5341_4D50;
const SEP_STREAM: u64 = 0x5345_50;

static CANCEL: AtomicBool = AtomicBool::new(false);

#[derive(Parser)]
#[command(name = "pinmix", version, about = "Glauber dynamics of the pinned polymer above a wall")]
struct Cli {
    /// Worker threads for replica-parallel work.
    #[arg(long, env = "PINMIX_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact samples from the equilibrium measure, one path per line.
    Sample(SampleArgs),
    /// Spectral gap and exact distance curves by enumeration (small L only).
    Exact(ExactArgs),
    /// Monte Carlo mixing-time sweep driven by a config file.
    Mix(MixArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long = "L")]
    length: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long = "L")]
    length: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Comma-separated evaluation times; defaults to 21 points up to 4 L² log L / π².
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Also evolve the chain with contacts censored until t_{δ/2}.
    #[arg(long)]
    censor: bool,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated system sizes.
    #[arg(long = "L")]
    lengths: Option<String>,
    /// Comma-separated pinning strengths.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Absolute time, or a multiple of L² log L / π² written as `4x`.
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated ε levels for the cutoff table.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Run the censored-wedge and vee protocols for λ ∈ (1, 2).
    #[arg(long)]
    censor: bool,
    /// Run the no-wall sandwich comparison.
    #[arg(long)]
    sep: bool,
    #[arg(long = "M")]
    boundary_m: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Cap(String),
    Invariant(String),
    Interrupted,
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::CapExceeded { .. } => Failure::Cap(e.to_string()),
            other => Failure::Invariant(other.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Exact(inner) => inner.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Cap(_) => 3,
            Failure::Invariant(_) => 4,
            Failure::Interrupted => 130,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => run_sample(a),
        Command::Exact(a) => run_exact(a),
        Command::Mix(a) => run_mix(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Cap(m) => eprintln!("error: {m}"),
                Failure::Invariant(m) => eprintln!("invariant violation: {m}"),
                Failure::Interrupted => eprintln!("interrupted; partial results flushed, manifest marked incomplete"),
                Failure::Io(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn open_output(out: Option<&FsPath>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_sample(a: SampleArgs) -> Result<(), Failure> {
    let params = ModelParams::new(a.length, a.lambda).map_err(|e| Failure::Usage(e.to_string()))?;
    let sampler = EquilibriumSampler::new(params);
    let mut rng = stream(a.seed, &[SAMPLE_STREAM]);
    let mut out = open_output(a.out.as_deref())?;
    for _ in 0..a.count {
        writeln!(out, "{}", sampler.sample(&mut rng))?;
    }
    out.flush()?;
    Ok(())
}

fn run_exact(a: ExactArgs) -> Result<(), Failure> {
    let params = ModelParams::new(a.length, a.lambda).map_err(|e| Failure::Usage(e.to_string()))?;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Failure::Usage(format!("delta must lie in (0, 1) (got {})", a.delta)));
    }
    let grid = match a.times {
        Some(t) => {
            if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Failure::Usage("times must be finite and ≥ 0".into()));
            }
            t
        }
        None => default_grid(&params),
    };
    let until = a.censor.then(|| params.t_delta(a.delta / 2.0));
    let report = exact_report(&params, &grid, until)?;
    let mut out = open_output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    if report.censoring_inequality_ok == Some(false) {
        return Err(Failure::Invariant("censored distance fell below the uncensored one".into()));
    }
    Ok(())
}

impl MixArgs {
    /// Flag overrides as `(flag, config line)` pairs.
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |flag, line: Option<String>| {
            if let Some(line) = line {
                v.push((flag, line));
            }
        };
        push("--L", self.lengths.as_ref().map(|x| format!("L = {x}")));
        push("--lambda", self.lambda.as_ref().map(|x| format!("lambda = {x}")));
        push("--seed", self.seed.map(|x| format!("master_seed = {x}")));
        push("--replicas", self.replicas.map(|x| format!("replicas = {x}")));
        push("--horizon", self.horizon.as_ref().map(|x| format!("horizon = {x}")));
        push("--delta", self.delta.map(|x| format!("delta = {x:?}")));
        push("--epsilon", self.epsilon.as_ref().map(|x| format!("epsilon = {x}")));
        push("--beta", self.beta.map(|x| format!("beta = {x:?}")));
        push("--eta", self.eta.map(|x| format!("eta = {x:?}")));
        push("--censor", self.censor.then(|| "censor = true".to_string()));
        push("--sep", self.sep.then(|| "sep = true".to_string()));
        push("--M", self.boundary_m.map(|x| format!("M = {x}")));
        push("--out-dir", self.out_dir.as_ref().map(|x| format!("out_dir = {}", x.display())));
        v
    }
}

fn load_config(a: &MixArgs) -> Result<ExperimentConfig, Failure> {
    let file_text = match &a.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let source = a.config.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<flags>".into());
    if a.config.is_some() {
        ExperimentConfig::parse(&file_text).map_err(|e| Failure::Usage(format!("{source}: {e}")))?;
    }
    let overrides = a.overrides();
    let file_lines = file_text.lines().count();
    let mut text = file_text;
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    for (_, line) in &overrides {
        text += line;
        text.push('\n');
    }
    ExperimentConfig::parse(&text).map_err(|e| {
        let line = match &e {
            ConfigError::Syntax { line, .. } | ConfigError::Field { line, .. } => Some(*line),
            ConfigError::Invalid { .. } => None,
        };
        match line.and_then(|l| l.checked_sub(file_lines + 1)).and_then(|k| overrides.get(k)) {
            Some((flag, _)) => Failure::Usage(format!("{flag}: {e}")),
            None => Failure::Usage(format!("{source}: {e}")),
        }
    })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    complete: bool,
    worst_case_scope: &'static str,
    tau: Vec<&'a TauSummary>,
    cutoff: Vec<&'a CutoffRow>,
}

#[derive(Serialize)]
struct SepSummary {
    length: usize,
    m: i32,
    horizon: f64,
    replicas: usize,
    order_checks: u64,
    order_violations: u64,
    /// Replicas where the walled and free chains from the lifted maximum ever differ.
    splits: usize,
    /// Replicas where the chain from a uniform bridge reached height ≤ 0.
    uniform_reached_zero: usize,
    /// Exact probability that a uniform bridge starts at height ≤ 0 somewhere.
    bridge_min_tail_exact: f64,
}

const WORST_CASE_SCOPE: &str = "distances are over the extremal starts ∧ and ∨ only";

struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn create(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()
    }
}

fn init_pool(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(())
}

fn run_mix(a: MixArgs, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(&a)?;
    init_pool(threads.or(cfg.threads))?;
    fs::create_dir_all(&cfg.out_dir)?;
    // a failure to install the handler only loses graceful interruption
    let _ = ctrlc::set_handler(|| CANCEL.store(true, Ordering::SeqCst));
    let cancel = Some(&CANCEL);
    let started = now_unix();
    let mut out = OutDir { dir: cfg.out_dir.clone(), files: Vec::new() };
    let mut violations = Vec::new();

    let sweep = mixing_sweep(&cfg, cancel)?;
    let farms: Vec<_> = sweep.entries.iter().map(|e| &e.farm).collect();
    let curve: Vec<_> = sweep.entries.iter().flat_map(|e| e.curve.iter().cloned()).collect();
    let cutoff: Vec<_> = sweep.entries.iter().flat_map(|e| e.cutoff.iter().cloned()).collect();
    let mut w = out.create("tau_samples.csv")?;
    write_tau_samples(&mut w, farms.iter().copied())?;
    w.flush()?;
    let mut w = out.create("mixing_curve.csv")?;
    write_mixing_curve(&mut w, &curve)?;
    w.flush()?;
    let mut w = out.create("cutoff_table.csv")?;
    write_cutoff_table(&mut w, &cutoff)?;
    w.flush()?;
    out.json(
        "summary.json",
        &SweepSummary {
            complete: sweep.complete,
            worst_case_scope: WORST_CASE_SCOPE,
            tau: sweep.entries.iter().map(|e| &e.summary).collect(),
            cutoff: sweep.entries.iter().flat_map(|e| &e.cutoff).collect(),
        },
    )?;

    let cancelled = || CANCEL.load(Ordering::SeqCst);
    if cfg.censor && !cancelled() {
        if cfg.lambdas.iter().any(|&l| l > 1.0 && l < 2.0) {
            let wedge = censored_wedge_protocol(&cfg, cancel)?;
            for r in &wedge {
                if r.exact.as_ref().is_some_and(|x| !x.inequality_ok) {
                    violations.push(format!("exact censored distance below uncensored at L = {}", r.length));
                }
            }
            out.json("wedge.json", &wedge)?;
            if !cancelled() {
                out.json("vee.json", &vee_boundary_contact_check(&cfg, cancel)?)?;
            }
        } else {
            eprintln!("note: censoring protocols need λ ∈ (1, 2); none configured, skipped");
        }
    }
    if cfg.sep && !cancelled() {
        let mut reports = Vec::new();
        for &l in &cfg.lengths {
            let m = sep_height(l);
            let horizon = cfg.horizon.resolve(l);
            let runs = (0..cfg.replicas)
                .into_par_iter()
                .filter(|_| !cancelled())
                .map(|r| three_chain_sandwich(l, m, horizon, derive_seed(cfg.master_seed, &[l as u64, SEP_STREAM, r as u64])))
                .collect::<Result<Vec<_>, _>>()?;
            let s = SepSummary {
                length: l,
                m,
                horizon,
                replicas: runs.len(),
                order_checks: runs.iter().map(|r| r.checks).sum(),
                order_violations: runs.iter().map(|r| r.violations).sum(),
                splits: runs.iter().filter(|r| r.first_split.is_some()).count(),
                uniform_reached_zero: runs.iter().filter(|r| r.uniform_running_min <= 0).count(),
                bridge_min_tail_exact: bridge_min_tail_exact(l, m),
            };
            if s.order_violations > 0 {
                violations.push(format!("sandwich order broken {} times at L = {l}", s.order_violations));
            }
            reports.push(s);
        }
        out.json("sep.json", &reports)?;
    }

    let complete = sweep.complete && !cancelled();
    let outputs = out.files.iter().map(|f| OutputFile::digest(&out.dir, f)).collect::<io::Result<Vec<_>>>()?;
    RunManifest {
        artifact: "pinmix".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: std::env::args().collect(),
        config: cfg.to_text(),
        master_seed: cfg.master_seed,
        started_unix: started,
        finished_unix: now_unix(),
        complete,
        outside_repulsive_phase: cfg.outside_repulsive_phase(),
        worst_case_scope: WORST_CASE_SCOPE.into(),
        outputs,
    }
    .write_atomic(&out.dir)?;
    if cfg.outside_repulsive_phase() {
        eprintln!("note: λ ≥ 2 lies outside the repulsive phase; results are labelled accordingly");
    }
    if !violations.is_empty() {
        return Err(Failure::Invariant(violations.join("; ")));
    }
    if !complete {
        return Err(Failure::Interrupted);
    }
    println!("wrote {} files to {}", out.files.len() + 1, out.dir.display());
    Ok(())
}
