//! Subcommands of the `tdkit` binary.
//!
//! Output files never contain thread counts or timings, so any command run
//! twice with the same flags writes the same bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tdkit::experiments::io::{curve_csv, file_stem, one_state_csv, two_state_csv, write_json, write_sweep};
use tdkit::experiments::seed::{Purpose, SeedPlan};
use tdkit::experiments::{
    run_challenge_one_state, run_challenge_two_state, run_sweep, OneStateConfig, SweepConfig, SweepResult,
    TwoStateConfig,
};
use tdkit::gvf::{
    load_signals, sweep_nexting, synth_signals, GvfSpec, NextingSweep, NextingSweepConfig, Signals, SynthKind,
    TileCoder, TileCoderConfig, DEFAULT_GVF_GAMMA,
};
use tdkit::suite::{make_random_mrp, RandomMrpSpec, DEFAULT_CHALLENGE_P, DEFAULT_RANDOM_GAMMA};
use tdkit::{Execution, FeatureVector, Mrp, OpCounter, Representation, RepresentationKind, TdConfig, TdLearner, Variant};

/// Environment variable that, when set, replaces every `--seed`.
pub const SEED_ENV: &str = "TDKIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "tdkit", version, about = "Linear TD(lambda) experiments")]
pub struct Cli {
    /// Worker threads for experiment cells (default: all cores; 1 = sequential).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random MRP and write it as JSON.
    GenMrp(GenMrpArgs),
    /// Run the one-state or two-state example.
    Challenge(ChallengeArgs),
    /// Sweep (method, alpha, lambda) on a random MRP.
    Sweep(SweepArgs),
    /// Tile-coded prediction of a signal's discounted future sum.
    Nexting(NextingArgs),
    /// Count arithmetic operations per learning step.
    BenchOps(BenchOpsArgs),
}

#[derive(Debug, Args)]
pub struct GenMrpArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_RANDOM_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    OneState,
    TwoState,
}

#[derive(Debug, Args)]
pub struct ChallengeArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long, default_value_t = DEFAULT_CHALLENGE_P)]
    pub p: f64,
    /// Independent runs (default 100 for one-state, 20 for two-state).
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// MRP archive written by gen-mrp, or `k,b,sigma`.
    #[arg(long, required_unless_present = "batch")]
    pub mrp: Option<String>,
    #[arg(long, value_enum, required_unless_present = "batch")]
    pub rep: Option<RepArg>,
    /// All three domains with all three representations.
    #[arg(long, conflicts_with_all = ["mrp", "rep"])]
    pub batch: bool,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Steps per run (default 100 for k < 100, else 1000).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Variant>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepArg {
    Tabular,
    Binary,
    Normal,
}

impl RepArg {
    fn kind(self) -> RepresentationKind {
        match self {
            RepArg::Tabular => RepresentationKind::Tabular,
            RepArg::Binary => RepresentationKind::Binary,
            RepArg::Normal => RepresentationKind::Normal,
        }
    }
}

#[derive(Debug, Args)]
pub struct NextingArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub data: Option<PathBuf>,
    /// Use the built-in five-channel synthetic stream.
    #[arg(long)]
    pub synth: bool,
    /// Columns to read from --data (default: all).
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Target channel name or index; repeat for several targets.
    #[arg(long, required = true)]
    pub target: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GVF_GAMMA)]
    pub gamma: f64,
    /// Length of the synthetic stream.
    #[arg(long, default_value_t = 10_000)]
    pub synth_steps: usize,
    /// Use only the first N frames.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    pub hash_size: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 8)]
    pub tilings: usize,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchOpsArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Active features of the sparse case.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Write the (deterministic) counts here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = Execution::from_threads(cli.threads);
    match cli.command {
        Command::GenMrp(a) => cmd_gen_mrp(a),
        Command::Challenge(a) => cmd_challenge(a, exec),
        Command::Sweep(a) => cmd_sweep(a, exec),
        Command::Nexting(a) => cmd_nexting(a, exec),
        Command::BenchOps(a) => cmd_bench_ops(a),
    }
}

/// `TDKIT_SEED` wins over the flag when set.
pub fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}='{v}' is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

/// What gen-mrp writes and sweep --mrp reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrpArchive {
    pub spec: RandomMrpSpec,
    pub redraws: u32,
    pub mrp: Mrp,
}

fn cmd_gen_mrp(a: GenMrpArgs) -> Result<()> {
    let spec = RandomMrpSpec {
        gamma: a.gamma,
        ..RandomMrpSpec::new(a.k, a.b, a.sigma, resolve_seed(a.seed)?)
    };
    let out = make_random_mrp(&spec)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_json(
        &a.out,
        &MrpArchive {
            spec,
            redraws: out.redraws,
            mrp: out.mrp,
        },
    )?;
    println!(
        "{}: {} states, branching {}, sigma {}, {} reducible draws discarded -> {}",
        spec.tag(),
        spec.k,
        spec.b,
        spec.sigma,
        out.redraws,
        a.out.display()
    );
    Ok(())
}

fn cmd_challenge(a: ChallengeArgs, exec: Execution) -> Result<()> {
    let seed = resolve_seed(a.seed)?;
    fs::create_dir_all(&a.out_dir)?;
    match a.which {
        Which::OneState => {
            let mut cfg = OneStateConfig::new(seed);
            cfg.p = a.p;
            if let Some(r) = a.runs {
                cfg.runs = r;
            }
            let res = run_challenge_one_state(&cfg, exec)?;
            let stem = file_stem("challenge_one_state", seed);
            fs::write(a.out_dir.join(format!("{stem}.csv")), one_state_csv(&res))?;
            write_json(&a.out_dir.join(format!("{stem}.json")), &res)?;
            for &m in &cfg.methods {
                if let Some(b) = res.best(m) {
                    println!("{m}: best alpha {} mean RMS {}", b.alpha, b.mean_rms);
                }
            }
        }
        Which::TwoState => {
            let mut cfg = TwoStateConfig::new(seed);
            cfg.p = a.p;
            if let Some(r) = a.runs {
                cfg.runs = r;
            }
            let res = run_challenge_two_state(&cfg, exec)?;
            let stem = file_stem("challenge_two_state", seed);
            fs::write(a.out_dir.join(format!("{stem}.csv")), two_state_csv(&res))?;
            write_json(&a.out_dir.join(format!("{stem}.json")), &res)?;
            println!("LMS floor {}", res.lms_floor);
            for r in &res.rows {
                println!("{} lambda {}: {}", r.method, r.lambda, r.converged_error);
            }
        }
    }
    Ok(())
}

/// The three random-process domains swept in batch mode.
pub const BATCH_DOMAINS: [(usize, usize, f64); 3] = [(10, 3, 0.1), (100, 10, 0.1), (100, 3, 0.0)];
pub const BATCH_REPS: [RepArg; 3] = [RepArg::Tabular, RepArg::Binary, RepArg::Normal];

fn parse_spec(text: &str) -> Result<(usize, usize, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("expected an MRP archive path or 'k,b,sigma', got '{text}'");
    }
    Ok((parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
}

fn load_or_make_mrp(arg: &str, plan: &SeedPlan, domain: u64) -> Result<(Mrp, String)> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let archive: MrpArchive =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok((archive.mrp, archive.spec.tag()));
    }
    let (k, b, sigma) = parse_spec(arg)?;
    let spec = RandomMrpSpec::new(k, b, sigma, plan.seed(domain, Purpose::MrpGeneration));
    Ok((make_random_mrp(&spec)?.mrp, spec.tag()))
}

fn build_rep(rep: RepArg, k: usize, plan: &SeedPlan, domain: u64) -> Result<Representation> {
    Ok(match rep {
        RepArg::Tabular => Representation::tabular(k)?,
        RepArg::Binary => Representation::binary(k)?,
        RepArg::Normal => Representation::normal(k, &mut plan.rng(domain, Purpose::Representation))?,
    })
}

fn sweep_config(a: &SweepArgs, k: usize, seed: u64, methods: Vec<Variant>) -> SweepConfig {
    let mut cfg = SweepConfig::new(a.horizon.unwrap_or(SweepConfig::default_horizon(k)), seed);
    cfg.runs = a.runs;
    cfg.methods = methods;
    if let Some(al) = &a.alphas {
        cfg.alphas = al.clone();
    }
    if let Some(l) = &a.lambdas {
        cfg.lambdas = l.clone();
    }
    cfg
}

fn write_curves(dir: &Path, id: &str, res: &SweepResult) -> Result<()> {
    let curves: Vec<(Variant, Vec<(f64, f64)>)> = res
        .config
        .methods
        .iter()
        .map(|&m| (m, tdkit::experiments::best_alpha_curve(&res.means, m)))
        .collect();
    let text = curve_csv(&res.config.lambdas, &res.config.methods, |m, l| {
        curves
            .iter()
            .find(|(cm, _)| *cm == m)
            .and_then(|(_, c)| c.iter().find(|(cl, _)| *cl == l))
            .map_or(f64::NAN, |(_, v)| *v)
    });
    fs::write(dir.join(format!("{}_curve.csv", file_stem(id, res.config.master_seed))), text)?;
    Ok(())
}

/// One row of the domain x representation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRow {
    pub domain: String,
    pub representation: String,
    /// Normalised best error per method; `None` where a method does not apply.
    pub accumulate: Option<f64>,
    pub replace: Option<f64>,
    pub true_online: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BatchDoc<'a> {
    master_seed: u64,
    runs: usize,
    alphas: Vec<f64>,
    lambdas: Vec<f64>,
    rows: &'a [BatchRow],
}

fn cmd_sweep(a: SweepArgs, exec: Execution) -> Result<()> {
    let seed = resolve_seed(a.seed)?;
    let plan = SeedPlan::new(seed);
    fs::create_dir_all(&a.out_dir)?;
    let requested = a.methods.clone().unwrap_or_else(|| Variant::ALL.to_vec());

    if !a.batch {
        let (mrp, tag) = load_or_make_mrp(a.mrp.as_deref().unwrap_or_default(), &plan, 0)?;
        let rep_arg = a.rep.expect("clap enforces --rep");
        let rep = build_rep(rep_arg, mrp.k(), &plan, 0)?;
        let cfg = sweep_config(&a, mrp.k(), seed, requested);
        let res = run_sweep(&mrp, &rep, &cfg, exec)?;
        let id = format!("sweep_{tag}_{}", rep_arg.kind().name());
        write_sweep(&a.out_dir, &id, &res)?;
        write_curves(&a.out_dir, &id, &res)?;
        for s in &res.summary {
            println!(
                "{}: normalized {} (alpha {}, lambda {})",
                s.method, s.normalized, s.best_alpha, s.best_lambda
            );
        }
        return Ok(());
    }

    let mut rows = Vec::new();
    let mut grid = None;
    for (d, &(k, b, sigma)) in BATCH_DOMAINS.iter().enumerate() {
        let spec = RandomMrpSpec::new(k, b, sigma, plan.seed(d as u64, Purpose::MrpGeneration));
        let mrp = make_random_mrp(&spec)?.mrp;
        for &rep_arg in &BATCH_REPS {
            let rep = build_rep(rep_arg, k, &plan, d as u64)?;
            // Replace traces are undefined for real-valued features.
            let methods: Vec<Variant> = requested
                .iter()
                .copied()
                .filter(|m| rep.is_binary() || !m.needs_binary_features())
                .collect();
            let cfg = sweep_config(&a, k, seed, methods);
            let res = run_sweep(&mrp, &rep, &cfg, exec)?;
            let id = format!("sweep_{}_{}", spec.tag(), rep_arg.kind().name());
            write_sweep(&a.out_dir, &id, &res)?;
            write_curves(&a.out_dir, &id, &res)?;
            let get = |m: Variant| res.summary_for(m).map(|s| s.normalized);
            let row = BatchRow {
                domain: format!("({k}, {b}, {sigma})"),
                representation: rep_arg.kind().name().to_string(),
                accumulate: get(Variant::Accumulate),
                replace: get(Variant::Replace),
                true_online: get(Variant::TrueOnline),
            };
            println!(
                "{} {}: accumulate {:?} replace {:?} true_online {:?}",
                row.domain, row.representation, row.accumulate, row.replace, row.true_online
            );
            rows.push(row);
            grid.get_or_insert((cfg.alphas.clone(), cfg.lambdas.clone()));
        }
    }
    let (alphas, lambdas) = grid.unwrap_or_default();
    let stem = file_stem("sweep_table", seed);
    fs::write(a.out_dir.join(format!("{stem}.csv")), batch_csv(&rows))?;
    write_json(
        &a.out_dir.join(format!("{stem}.json")),
        &BatchDoc {
            master_seed: seed,
            runs: a.runs,
            alphas,
            lambdas,
            rows: &rows,
        },
    )?;
    Ok(())
}

/// Domain/representation table; empty cells where a method does not apply.
pub fn batch_csv(rows: &[BatchRow]) -> String {
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("k,b,sigma,representation,accumulate,replace,true_online\n");
    for r in rows {
        let domain = r.domain.trim_matches(|c| c == '(' || c == ')').replace(' ', "");
        out.push_str(&format!(
            "{domain},{},{},{},{}\n",
            r.representation,
            cell(r.accumulate),
            cell(r.replace),
            cell(r.true_online)
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct NextingDoc<'a> {
    source: String,
    channels: &'a [String],
    normalization: &'a [tdkit::gvf::ChannelRange],
    frames: usize,
    gamma: f64,
    #[serde(flatten)]
    sweep: &'a NextingSweep,
}

fn cmd_nexting(a: NextingArgs, exec: Execution) -> Result<()> {
    let seed = resolve_seed(a.seed)?;
    let (mut signals, source): (Signals, String) = match &a.data {
        Some(path) => (load_signals(path, a.channels.as_deref())?, path.display().to_string()),
        None if a.synth => (
            synth_signals(SynthKind::Mixed, a.synth_steps, seed)?,
            format!("synthetic(seed = {seed}, steps = {})", a.synth_steps),
        ),
        None => bail!("pass --data <csv> or --synth"),
    };
    if let Some(n) = a.steps {
        signals.frames.truncate(n);
    }
    let coder_cfg = TileCoderConfig {
        bins_per_signal: a.bins,
        num_tilings: a.tilings,
        hash_size: a.hash_size,
        ..TileCoderConfig::new(signals.channels.len())
    };
    let active = TileCoder::new(coder_cfg.clone())?.active_count();
    let mut cfg = NextingSweepConfig::for_active(active);
    if let Some(al) = &a.alphas {
        cfg.alphas = al.clone();
    }
    if let Some(l) = &a.lambdas {
        cfg.lambdas = l.clone();
    }
    fs::create_dir_all(&a.out_dir)?;

    let targets = a
        .target
        .iter()
        .map(|t| signals.channel_index(t))
        .collect::<tdkit::Result<Vec<_>>>()?;
    let gvfs: Vec<GvfSpec> = targets
        .iter()
        .map(|&target_channel| GvfSpec {
            target_channel,
            gamma: a.gamma,
        })
        .collect();
    for gvf in &gvfs {
        let res = sweep_nexting(&signals, &coder_cfg, gvf, &cfg, exec)?;
        let stem = file_stem(&format!("nexting_{}", res.target_name), seed);
        let text = curve_csv(&cfg.lambdas, &cfg.methods, |m, l| {
            res.curve(m).and_then(|c| c.at(l)).map_or(f64::NAN, |p| p.normalized)
        });
        fs::write(a.out_dir.join(format!("{stem}.csv")), text)?;
        write_json(
            &a.out_dir.join(format!("{stem}.json")),
            &NextingDoc {
                source: source.clone(),
                channels: &signals.channels,
                normalization: &signals.ranges,
                frames: signals.len(),
                gamma: gvf.gamma,
                sweep: &res,
            },
        )?;
        for s in &res.summary {
            println!(
                "{} {}: normalized {} (alpha {}, lambda {})",
                res.target_name, s.method, s.normalized, s.best_alpha, s.best_lambda
            );
        }
    }
    Ok(())
}

/// Counted operations per step for one method and feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsLine {
    pub method: Variant,
    pub layout: String,
    pub n: usize,
    pub m: usize,
    pub additions_per_step: f64,
    pub multiplications_per_step: f64,
    pub total_per_step: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsReport {
    pub steps: usize,
    pub lines: Vec<OpsLine>,
}

fn bench_features(n: usize, m: usize, dense: bool, shift: usize) -> Result<FeatureVector> {
    if dense {
        return Ok(FeatureVector::dense(
            (0..n).map(|i| ((i + shift) % 2) as f64).collect(),
        ));
    }
    let stride = (n / m.max(1)).max(1);
    Ok(FeatureVector::binary(n, (0..m).map(|i| (i * stride + shift) % n).collect::<std::collections::BTreeSet<_>>().into_iter().collect())?)
}

/// Counts for `steps` steps of each applicable method on dense (m = n) and
/// sparse binary features. Timings go to stderr only.
pub fn bench_ops(n: usize, m: usize, steps: usize) -> Result<(OpsReport, Vec<(String, f64)>)> {
    if n == 0 || m == 0 || m > n {
        bail!("need 1 <= m <= n, got n = {n}, m = {m}");
    }
    let mut lines = Vec::new();
    let mut times = Vec::new();
    if steps == 0 {
        return Ok((OpsReport { steps, lines }, times));
    }
    for (layout, dense) in [("dense", true), ("sparse", false)] {
        let active = if dense { n } else { m };
        let phis = [bench_features(n, m, dense, 0)?, bench_features(n, m, dense, 1)?];
        for method in Variant::ALL {
            if dense && method.needs_binary_features() {
                continue;
            }
            let mut td = TdLearner::new(TdConfig::new(method, 1e-4, 0.9, 0.99), n)?;
            // The first step after a reset skips the trace decay; keep it out of the counts.
            td.step(&phis[1], 0.5, &phis[0], false)?;
            let mut ops = OpCounter::new();
            let start = Instant::now();
            for t in 0..steps {
                td.step_counted(&phis[t % 2], 0.5, &phis[(t + 1) % 2], false, &mut ops)?;
            }
            let per_step = start.elapsed().as_secs_f64() / steps as f64;
            let s = steps as f64;
            let budget = match method {
                Variant::TrueOnline if dense => 14.0 * n as f64,
                _ if dense => 8.0 * n as f64,
                Variant::TrueOnline => 3.0 * n as f64 + 11.0 * active as f64,
                _ => 3.0 * n as f64 + 5.0 * active as f64,
            };
            lines.push(OpsLine {
                method,
                layout: layout.to_string(),
                n,
                m: active,
                additions_per_step: ops.additions as f64 / s,
                multiplications_per_step: ops.multiplications as f64 / s,
                total_per_step: ops.total() as f64 / s,
                budget,
            });
            times.push((format!("{method}/{layout}"), per_step));
        }
    }
    Ok((OpsReport { steps, lines }, times))
}

fn cmd_bench_ops(a: BenchOpsArgs) -> Result<()> {
    let (report, times) = bench_ops(a.n, a.m, a.steps)?;
    for l in &report.lines {
        println!(
            "{:<11} {:<6} n={} m={}: {} ops/step (budget {})",
            l.method.name(),
            l.layout,
            l.n,
            l.m,
            l.total_per_step,
            l.budget
        );
    }
    for (name, secs) in &times {
        eprintln!("{name}: {:.3} us/step", secs * 1e6);
    }
    let ratio = |layout: &str| {
        let t = |m: Variant| times.iter().find(|(k, _)| *k == format!("{m}/{layout}")).map(|x| x.1);
        Some(t(Variant::TrueOnline)? / t(Variant::Accumulate)?)
    };
    if let (Some(d), Some(s)) = (ratio("dense"), ratio("sparse")) {
        eprintln!("wall-time ratio true_online/accumulate: dense {d:.2}, sparse {s:.2}");
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}
