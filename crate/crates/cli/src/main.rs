//! `afdx-sim`: validate, generate, simulate and analyze AFDX networks.
//!
//! Exit status: 0 on success, 1 when a domain violation is found, 2 on usage
//! or I/O errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use afdx::analysis::{build_ecdf, series_stats};
use afdx::engine::{
    self, parse_duration, EngineError, ModelLevel, Pacing, PolicerKind, Scenario, SystemClock, TraceLog,
};
use afdx::generators::{
    csv_to_topology, csv_violations, emit_csv, fms_topology, generate_random, parse_csv_lenient, replicate,
    replicate_topology, topology_to_csv, RandomGenSpec,
};
use afdx::models::PlanError;
use afdx::monitors::{monitor_report, JitterClass, ReportOptions};
use afdx::policing::{check_equivalence, seeded_arrivals, BucketParams, Equivalence};
use afdx::topology::TopologySpec;
use afdx::vl::{format_us, FrameSize, Nanos, NetworkConstants, NS_PER_MS, NS_PER_US};

const SEED_ENV: &str = "AFDX_SIM_SEED";

/// `println!` that drops its output once stdout is closed (for example when
/// piped into `head`) so the command still writes its files and exit status.
macro_rules! out {
    ($($t:tt)*) => { emit!(writeln, $($t)*) };
}

macro_rules! out_raw {
    ($($t:tt)*) => { emit!(write, $($t)*) };
}

macro_rules! emit {
    ($w:ident, $($t:tt)*) => {
        match $w!(std::io::stdout(), $($t)*) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        }
    };
}

#[derive(Parser)]
#[command(
    name = "afdx-sim",
    version,
    about = "Discrete-event simulator and analysis toolkit for AFDX networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every VL contract of a topology (CSV template or JSON).
    Validate(ValidateArgs),
    /// Write a random or replicated topology.
    Generate(GenerateArgs),
    /// Run a scenario and write its trace.
    Simulate(SimulateArgs),
    /// Summarize a trace: latency statistics, jitter classes, drops.
    Analyze(AnalyzeArgs),
    /// Run the policing automaton against the account oracle.
    PolicingCheck(PolicingArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Integer seed, or `random` to draw one. Falls back to $AFDX_SIM_SEED.
    #[arg(long, env = SEED_ENV)]
    seed: Option<String>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        match self.seed.as_deref() {
            None => Ok(engine::DEFAULT_SEED),
            Some("random") => Ok(rand::random()),
            Some(s) => s.trim().parse().with_context(|| format!("bad seed {s:?}")),
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    topology: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["random", "template", "fms"]))]
struct GenerateArgs {
    /// The reference flight management network, with names and traversal bounds.
    #[arg(long)]
    fms: bool,
    /// Number of point-to-point VLs through one switch.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=32767))]
    random: Option<u64>,
    /// CSV or JSON topology to copy.
    #[arg(long, requires = "copies")]
    template: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    copies: Option<u64>,
    /// Extra room above the transmission time for synthetic WCTTs, in µs.
    #[arg(long, default_value_t = 100)]
    wctt_margin_us: u64,
    #[command(flatten)]
    seed: SeedArg,
    /// Output file; `.csv` writes the template format, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Tc,
    Dvl,
    Svl,
}

#[derive(Clone, Copy, ValueEnum)]
enum PacingArg {
    Fast,
    Realtime,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicerArg {
    Automaton,
    Oracle,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, value_enum, default_value = "tc")]
    model: ModelArg,
    /// Seconds, or short (10 s), medium (60 s), long (300 s).
    #[arg(long, default_value = "short")]
    duration: String,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value = "fast")]
    pacing: PacingArg,
    #[arg(long, value_enum, default_value = "automaton")]
    policer: PolicerArg,
    /// Disable policing in the switched model.
    #[arg(long)]
    no_policing: bool,
    /// Trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Flagged frames (trace CSV plus a reason column).
    #[arg(long)]
    flagged: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Percent of the run dropped at each end.
    #[arg(long, default_value_t = 0.0)]
    trim: f64,
    /// Directory receiving one latency CDF CSV per path.
    #[arg(long)]
    cdf: Option<PathBuf>,
    /// Topology giving traversal bounds and jitter windows.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Run length used for trimming; defaults to the last event time.
    #[arg(long)]
    duration: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["arrivals", "random"]))]
struct PolicingArgs {
    /// BAG in milliseconds.
    #[arg(long)]
    bag: u32,
    /// Maximum jitter in microseconds.
    #[arg(long)]
    jmax: f64,
    /// Maximum frame size in bytes.
    #[arg(long)]
    smax: FrameSize,
    /// Arrival times in ms, inline (`0,3,7`) or a file of such values.
    #[arg(long)]
    arrivals: Option<String>,
    /// Number of random arrivals.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    random: Option<u64>,
    #[command(flatten)]
    seed: SeedArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::PolicingCheck(a) => policing_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn is_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{')
}

/// Loads a topology without validating contracts.
fn load_topology(path: &Path) -> Result<TopologySpec> {
    let text = read(path)?;
    if is_json(path, &text) {
        Ok(TopologySpec::from_json(&text).with_context(|| format!("{} is not a topology", path.display()))?)
    } else {
        let csv = parse_csv_lenient(&text).with_context(|| format!("{} is not a topology", path.display()))?;
        if let Some(v) = csv_violations(&csv).first() {
            bail!("{}: {v}", path.display());
        }
        Ok(csv_to_topology(&csv, &NetworkConstants::default())?)
    }
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let text = read(&a.topology)?;
    let (vls, problems): (usize, Vec<String>) = if is_json(&a.topology, &text) {
        let topo = TopologySpec::from_json(&text)?;
        (topo.vls.len(), topo.validate().iter().map(|v| v.to_string()).collect())
    } else {
        let csv = parse_csv_lenient(&text)?;
        (
            csv.rows.len(),
            csv_violations(&csv).iter().map(|v| v.to_string()).collect(),
        )
    };
    if problems.is_empty() {
        out!("{}: {vls} VLs, all valid", a.topology.display());
        return Ok(ExitCode::SUCCESS);
    }
    for p in &problems {
        out!("{p}");
    }
    out!("{}: {} violation(s)", a.topology.display(), problems.len());
    Ok(ExitCode::from(1))
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let consts = NetworkConstants::default();
    let topo = if a.fms {
        fms_topology()
    } else if let Some(n) = a.random {
        let seed = a.seed.resolve()?;
        eprintln!("seed: {seed}");
        let mut spec = RandomGenSpec::new(n as usize, seed);
        spec.wctt_margin_ns = a.wctt_margin_us * NS_PER_US;
        generate_random(&spec, &consts)?
    } else {
        let path = a.template.as_deref().expect("clap enforces the group");
        let k = a.copies.unwrap_or(1) as usize;
        let text = read(path)?;
        if is_json(path, &text) {
            replicate_topology(&TopologySpec::from_json(&text)?, k)?
        } else {
            let csv = parse_csv_lenient(&text)?;
            if let Some(v) = csv_violations(&csv).first() {
                bail!("{}: {v}", path.display());
            }
            replicate(&csv, k, &consts)?
        }
    };
    let as_csv = a
        .out
        .as_deref()
        .is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    let text = if as_csv {
        emit_csv(&topology_to_csv(&topo))
    } else {
        topo.to_json() + "\n"
    };
    match &a.out {
        Some(p) => {
            write(p, &text)?;
            eprintln!("wrote {} VLs to {}", topo.vls.len(), p.display());
        }
        None => out_raw!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let topology = load_topology(&a.topology)?;
    let model = match a.model {
        ModelArg::Tc => ModelLevel::TimedChannel,
        ModelArg::Dvl => ModelLevel::DirectVl,
        ModelArg::Svl => ModelLevel::SwitchedVl,
    };
    let seed = a.seed.resolve()?;
    let mut s = Scenario::new(topology, model);
    s.duration_ns = parse_duration(&a.duration).map_err(anyhow::Error::msg)?;
    s.speed = a.speed;
    s.seed = seed;
    s.policing = !a.no_policing;
    s.policer = match a.policer {
        PolicerArg::Automaton => PolicerKind::Automaton,
        PolicerArg::Oracle => PolicerKind::Oracle,
    };
    s.pacing = match a.pacing {
        PacingArg::Fast => Pacing::Fast,
        PacingArg::Realtime => Pacing::Realtime,
    };
    out!(
        "seed: {seed}  model: {model}  duration: {} s  speed: {}",
        s.duration_ns as f64 / 1e9,
        s.speed
    );
    let outcome = match s.pacing {
        Pacing::Fast => engine::run(&s).map(|t| (t, None)),
        Pacing::Realtime => engine::run_paced(&s, &SystemClock::new()).map(|(t, r)| (t, Some(r))),
    };
    let (trace, pacing) = match outcome {
        Ok(v) => v,
        Err(e @ (EngineError::Occupancy(_) | EngineError::Plan(PlanError::Calibration { .. }))) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = &a.trace {
        let file = fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        trace
            .write_csv(std::io::BufWriter::new(file))
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    let options = ReportOptions {
        speed: s.speed,
        duration_ns: Some(s.duration_ns),
        ..ReportOptions::default()
    };
    let report = monitor_report(&trace, &s.topology, &options);
    if a.json {
        out!("{}", report.to_json());
    } else {
        out!("events: {}", trace.len());
        out_raw!("{}", report.to_table());
        out!(
            "above wctt: {}  rejected: {}  drops: {}",
            report.total(|p| p.latency.above_wctt),
            report.total(|p| p.rejected),
            report.total(|p| p.drops.lost)
        );
    }
    if let Some(r) = pacing {
        out!(
            "pacing: {} events, mean drift {:.1} us ({:.4}% of run), max drift {} us, {} over {} us",
            r.events,
            r.mean_drift_ns / 1000.0,
            100.0 * r.mean_drift_ratio(),
            format_us(r.max_drift_ns),
            r.events_over_bound,
            format_us(r.drift_bound_ns)
        );
    }
    if let Some(p) = &a.flagged {
        write(p, &report.flagged_csv())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    if !(0.0..50.0).contains(&a.trim) {
        bail!("--trim must be in [0, 50)");
    }
    let text = read(&a.trace)?;
    let trace = match TraceLog::parse(&text) {
        Ok(t) if t.is_empty() => {
            eprintln!("{}: trace has no events", a.trace.display());
            return Ok(ExitCode::from(1));
        }
        Ok(t) => t,
        Err(engine::TraceError::Malformed(rows)) => {
            for r in &rows {
                eprintln!("{}: {r}", a.trace.display());
            }
            return Ok(ExitCode::from(1));
        }
        Err(e) => {
            eprintln!("{}: {e}", a.trace.display());
            return Ok(ExitCode::from(1));
        }
    };
    let topology = match &a.topology {
        Some(p) => load_topology(p)?,
        None => TopologySpec::default(),
    };
    let options = ReportOptions {
        speed: a.speed,
        trim_percent: a.trim,
        duration_ns: a
            .duration
            .as_deref()
            .map(parse_duration)
            .transpose()
            .map_err(anyhow::Error::msg)?,
    };
    let report = monitor_report(&trace, &topology, &options);
    if let Some(dir) = &a.cdf {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut json_paths = Vec::new();
    if !a.json {
        out!(
            "window: [{}, {}] ns  paths: {}",
            report.window_ns.0,
            report.window_ns.1,
            report.paths.len()
        );
    }
    for p in &report.paths {
        let latencies: Vec<i64> = p.latencies.iter().map(|&l| l as i64).collect();
        let stats = series_stats(&latencies).ok();
        let jitter_stats = series_stats(&p.jitters).ok();
        let name = format!("VL{} {}->{}", p.vl_id, p.src, p.dst);
        if let (Some(dir), Ok(e)) = (&a.cdf, build_ecdf(&latencies)) {
            let file = dir.join(format!("vl{}_{}_{}_latency.csv", p.vl_id, p.src, p.dst));
            write(&file, &e.to_csv())?;
        }
        if a.json {
            json_paths.push(serde_json::json!({
                "path": name,
                "latency": stats,
                "jitter": jitter_stats,
                "jitter_classes": p.jitter,
                "above_wctt": p.latency.above_wctt,
                "below_bctt": p.latency.below_bctt,
                "rejected": p.rejected,
                "drops": p.drops.lost,
            }));
            continue;
        }
        match &stats {
            Some(s) => out!(
                "{name}: n={} min={} p50={} p95={} p99={} max={} mean={:.0} outliers={} (ns)",
                s.count,
                s.min,
                s.p50,
                s.p95,
                s.p99,
                s.max,
                s.mean,
                s.outliers
            ),
            None => out!("{name}: no deliveries in window"),
        }
        if !p.jitter.is_empty() {
            let classes: Vec<String> = JitterClass::ALL
                .iter()
                .map(|c| format!("{c}={}", p.jitter.get(c).copied().unwrap_or(0)))
                .collect();
            out!("  jitter: {}", classes.join(" "));
        }
        out!(
            "  above_wctt={} below_bctt={} rejected={} drops={}",
            p.latency.above_wctt,
            p.latency.below_bctt,
            p.rejected,
            p.drops.lost
        );
    }
    let above = report.total(|p| p.latency.above_wctt);
    if a.json {
        let doc = serde_json::json!({
            "window_ns": report.window_ns,
            "paths": json_paths,
            "above_wctt_total": above,
        });
        out!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        out!("AboveWcTT total: {above}");
    }
    Ok(ExitCode::SUCCESS)
}

/// Milliseconds (decimals allowed) to nanoseconds.
fn ms_to_ns(v: &str) -> Result<Nanos> {
    let ms: f64 = v.parse().with_context(|| format!("bad arrival time {v:?}"))?;
    if !(ms.is_finite() && ms >= 0.0) {
        bail!("arrival time must be non-negative, got {v}");
    }
    Ok((ms * NS_PER_MS as f64).round() as Nanos)
}

fn parse_arrivals(spec: &str) -> Result<Vec<Nanos>> {
    let text = if Path::new(spec).is_file() {
        read(Path::new(spec))?
    } else {
        spec.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(ms_to_ns)
        .collect()
}

fn policing_check(a: PolicingArgs) -> Result<ExitCode> {
    if !(a.jmax.is_finite() && a.jmax >= 0.0) {
        bail!("--jmax must be a non-negative number of microseconds");
    }
    let bag_ns = Nanos::from(a.bag) * NS_PER_MS;
    let j_max_ns = (a.jmax * NS_PER_US as f64).round() as Nanos;
    let params = BucketParams::new(a.smax, bag_ns, j_max_ns).context("unsound policing parameters")?;
    let arrivals = match (&a.arrivals, a.random) {
        (Some(spec), _) => parse_arrivals(spec)?,
        (None, Some(n)) => {
            let seed = a.seed.resolve()?;
            out!("seed: {seed}");
            seeded_arrivals(&params, n as usize, seed)
        }
        (None, None) => unreachable!("clap enforces the group"),
    };
    out!(
        "bag: {} ms  j_max: {} us  s_max: {} B  delta1: {} ns  delta2: {} ns",
        a.bag,
        format_us(j_max_ns),
        a.smax,
        params.delta1(),
        params.delta2()
    );
    out!("export: {}", params.export());
    match check_equivalence(&params, &arrivals)? {
        Equivalence::Match(decisions) => {
            let accepted = decisions
                .iter()
                .filter(|d| **d == afdx::policing::Decision::Accept)
                .count();
            if decisions.len() <= 64 {
                let letters: Vec<String> = decisions.iter().map(|d| d.letter().to_string()).collect();
                out!("decisions: {}", letters.join(","));
            }
            out!(
                "match: {} arrivals, {accepted} accepted, {} rejected",
                decisions.len(),
                decisions.len() - accepted
            );
            Ok(ExitCode::SUCCESS)
        }
        Equivalence::Diverged {
            index,
            oracle,
            automaton,
        } => {
            out!(
                "MISMATCH at arrival {index} ({} ns): oracle {} automaton {}",
                arrivals[index],
                oracle.letter(),
                automaton.letter()
            );
            Ok(ExitCode::from(1))
        }
    }
}
