//! Command-line surface: graph generation, parameter tables, protocol runs,
//! attack demos, bound values and the zero-knowledge enumeration test.
//!
//! Exit codes: 0 success, 1 a run was rejected (or the ZK test failed),
//! 2 usage or configuration error. Data goes to stdout or files, progress to
//! stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use relzkp_core::bounds::{chsh_parallel_quantum_upper, chsh_quantum_upper, protocol_parameters, GameBound};
use relzkp_core::commitment::DyadicEpsilon;
use relzkp_core::field::{Field, FieldSpec};
use relzkp_core::graph::{generate_with_budget, generate_with_edge_count, ColoredGraph, DEFAULT_RESTART_BUDGET};
use relzkp_core::protocol::net::run_networked;
use relzkp_core::protocol::{run_protocol, threads_from_env, CheatStrategy, Mode, RunReport, RunSettings, Verdict};
use relzkp_core::rng::SeededRng;
use relzkp_core::spacetime::SpacetimeConfig;
use relzkp_core::zksim::zk_equality_check;
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Field width used when neither a preset nor an explicit spec is given.
pub const DEFAULT_FIELD_BITS: u32 = 112;

#[derive(Debug, Parser)]
#[command(name = "relzkp", version, about = "Two-prover relativistic zero-knowledge proof for graph 3-coloring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a connected 3-colorable graph with a planted witness.
    GenGraph(GenGraphArgs),
    /// Field size, round count, soundness and resources for a parameter set.
    Params(ParamsArgs),
    /// Run the protocol and write a transcript and report.
    Run(RunArgs),
    /// Exhaustively compare real and simulated views on a tiny instance.
    ZkTest(ZkTestArgs),
    /// Quantum-value upper bounds for the CHSH_Q(P) games.
    Bounds(BoundsArgs),
    /// Shorthand for `run --mode cheat:<strategy>`.
    Attack(AttackArgs),
}

#[derive(Debug, Args)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub vertices: usize,
    /// Probability of each differently-colored pair becoming an edge.
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    pub edge_prob: Option<f64>,
    /// Redraw with a calibrated probability until exactly this many edges.
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Graph file, witness included.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the witness-free public graph here.
    #[arg(long)]
    pub public_out: Option<PathBuf>,
    /// Generation attempts before giving up.
    #[arg(long, default_value_t = DEFAULT_RESTART_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub vertices: u64,
    #[arg(long)]
    pub edges: u64,
    /// Soundness exponent: m = k|E| rounds give soundness about e^-k.
    #[arg(long)]
    pub k: u64,
    /// Binding parameter, a power of two such as 2^-32.
    #[arg(long, default_value = "2^-32")]
    pub epsilon_b: DyadicEpsilon,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    /// Discrete-event timing simulation.
    Sim,
    /// Real TCP sockets on 127.0.0.1. Not a relativistic setting; needs a relaxed --tau-ns.
    Loopback,
}

/// Flags shared by `run` and `attack`. Each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct RunFlags {
    /// JSON file with any subset of the RunConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Preset field width (3, 4, 8, 16, 32 or 112).
    #[arg(long)]
    pub field_bits: Option<u32>,
    /// Rounds as a multiple of |E|.
    #[arg(long, conflicts_with = "m")]
    pub k: Option<u64>,
    /// Rounds, exactly.
    #[arg(long)]
    pub m: Option<u64>,
    /// Spacetime profile: testbed or zero.
    #[arg(long)]
    pub profile: Option<String>,
    /// Override the timing threshold τ in ns.
    #[arg(long)]
    pub tau_ns: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSONL transcript, one round per line.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Report JSON; stdout if absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Widen each timing gap by 2Δ before comparing with τ.
    #[arg(long)]
    pub worst_case_timing: bool,
    #[arg(long, value_enum)]
    pub transport: Option<Transport>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// honest or cheat:{one-bad-edge,random-coloring,relay,equivocation}.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[command(flatten)]
    pub flags: RunFlags,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: CheatStrategy,
    #[command(flatten)]
    pub flags: RunFlags,
}

fn parse_strategy(s: &str) -> Result<CheatStrategy, String> {
    match s.parse::<Mode>() {
        Ok(Mode::Cheat(c)) => Ok(c),
        _ => Err(format!("unknown strategy {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ZkTestArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub field_bits: u32,
    /// Print the full JSON report instead of the per-instance lines.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GameArg {
    Chsh,
    ParallelChsh,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum, default_value = "chsh")]
    pub game: GameArg,
    /// Alphabet size P.
    #[arg(long = "P", default_value_t = 3)]
    pub p: u32,
    /// log2 of the field order Q.
    #[arg(long = "Q-bits")]
    pub q_bits: u32,
    /// Parallel repetitions (parallel-chsh only).
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long)]
    pub json: bool,
}

/// Everything `run` needs. Field names are the config-file keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub field_bits: Option<u32>,
    pub field: Option<FieldSpec>,
    pub k: Option<u64>,
    pub m: Option<u64>,
    pub mode: Option<Mode>,
    pub profile: Option<String>,
    pub spacetime: Option<SpacetimeConfig>,
    pub tau_ns: Option<f64>,
    pub seed: Option<u64>,
    pub transcript: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub worst_case_timing: Option<bool>,
    pub transport: Option<Transport>,
}

/// A usage or configuration problem (exit 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub graph: ColoredGraph,
    pub field: Field,
    pub rounds: u64,
    pub settings: RunSettings,
    pub transcript: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub transport: Transport,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    fn apply(&mut self, flags: &RunFlags, mode: Option<Mode>) {
        macro_rules! over {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f.clone(); } )* };
        }
        over!(graph, field_bits, profile, tau_ns, seed, transcript, report, transport);
        if flags.k.is_some() || flags.m.is_some() {
            self.k = flags.k;
            self.m = flags.m;
        }
        if flags.worst_case_timing {
            self.worst_case_timing = Some(true);
        }
        if flags.field_bits.is_some() {
            self.field = None;
        }
        if mode.is_some() {
            self.mode = mode;
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun, UsageError> {
        let seed = self
            .seed
            .ok_or_else(|| UsageError("a seed is required (--seed or \"seed\" in the config)".into()))?;
        let path = self.graph.as_ref().ok_or_else(|| UsageError("a graph file is required".into()))?;
        let graph = ColoredGraph::load(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let field = match (&self.field, self.field_bits) {
            (Some(_), Some(_)) => return Err(UsageError("give field or field_bits, not both".into())),
            (Some(spec), None) => Field::new(*spec)?,
            (None, bits) => Field::preset(bits.unwrap_or(DEFAULT_FIELD_BITS))?,
        };
        let edges = graph.graph().num_edges() as u64;
        let rounds = match (self.k, self.m) {
            (Some(k), None) => k
                .checked_mul(edges)
                .ok_or_else(|| UsageError("k·|E| overflows".into()))?,
            (None, Some(m)) => m,
            _ => return Err(UsageError("exactly one of k and m must be set".into())),
        };
        let mut spacetime = match (&self.spacetime, &self.profile) {
            (Some(_), Some(_)) => return Err(UsageError("give spacetime or profile, not both".into())),
            (Some(s), None) => s.clone(),
            (None, p) => SpacetimeConfig::profile(p.as_deref().unwrap_or("testbed"))?,
        };
        if self.tau_ns.is_some() {
            spacetime.tau_ns = self.tau_ns;
        }
        spacetime.validate()?;
        Ok(ResolvedRun {
            graph,
            field,
            rounds,
            settings: RunSettings {
                mode: self.mode.unwrap_or(Mode::Honest),
                spacetime,
                seed,
                worst_case_timing: self.worst_case_timing.unwrap_or(false),
            },
            transcript: self.transcript.clone(),
            report: self.report.clone(),
            transport: self.transport.unwrap_or(Transport::Sim),
        })
    }
}

/// Merge a config file with flags and resolve it.
pub fn resolve_run(flags: &RunFlags, mode: Option<Mode>) -> Result<ResolvedRun, UsageError> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(flags, mode);
    cfg.resolve()
}

fn create(path: &Path) -> Result<BufWriter<File>, UsageError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

/// Execute a resolved run; returns the report.
pub fn execute_run(run: &ResolvedRun, threads: Option<usize>) -> Result<RunReport, UsageError> {
    match run.transport {
        Transport::Sim => {
            let mut sink = run.transcript.as_deref().map(create).transpose()?;
            Ok(run_protocol(
                &run.graph,
                &run.field,
                run.rounds,
                &run.settings,
                sink.as_mut().map(|w| w as &mut dyn Write),
                threads,
            )?)
        }
        Transport::Loopback => {
            let started = std::time::Instant::now();
            let tau = run.settings.spacetime.tau_ns();
            let ts = run_networked(&run.graph, &run.field, run.settings.mode, run.rounds, run.settings.seed, tau)?;
            if let Some(path) = &run.transcript {
                let mut w = create(path)?;
                for t in &ts {
                    writeln!(w, "{}", t.to_json_line())?;
                }
                w.flush()?;
            }
            let mut report = run_protocol(&run.graph, &run.field, 0, &run.settings, None, threads)?;
            report.rounds = run.rounds;
            report.wall_time_ns = started.elapsed().as_nanos() as u64;
            for t in &ts {
                match t.verdict {
                    Verdict::Accept => report.accepts += 1,
                    Verdict::Reject(r) => *report.rejects_by_reason.entry(r).or_insert(0) += 1,
                }
            }
            report.accept = report.accepts == run.rounds;
            report.params.clocks = relzkp_core::spacetime::ClockModel::ideal();
            Ok(report)
        }
    }
}

fn cmd_gen_graph(a: &GenGraphArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, UsageError> {
    let mut rng = SeededRng::derive(a.seed, "graph", 0);
    let result = match (a.edge_prob, a.edges) {
        (Some(p), _) => generate_with_budget(a.vertices, p, a.budget, &mut rng),
        (None, Some(e)) => generate_with_edge_count(a.vertices, e, a.budget, &mut rng),
        (None, None) => return Err(UsageError("give --edge-prob or --edges".into())),
    };
    let g = result?;
    g.save(&a.out)?;
    if let Some(p) = &a.public_out {
        g.strip_witness().save(p)?;
    }
    writeln!(
        err,
        "wrote {} ({} vertices, {} edges)",
        a.out.display(),
        g.graph().num_vertices(),
        g.graph().num_edges()
    )?;
    writeln!(
        out,
        "{}",
        serde_json::json!({
            "vertices": g.graph().num_vertices(),
            "edges": g.graph().num_edges(),
            "path": a.out,
        })
    )?;
    Ok(EXIT_OK)
}

fn cmd_params(a: &ParamsArgs, out: &mut dyn Write) -> Result<i32, UsageError> {
    let p = protocol_parameters(a.vertices, a.edges, a.k, a.epsilon_b)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&p)?)?;
        return Ok(EXIT_OK);
    }
    let rows: [(&str, String); 11] = [
        ("vertices", p.vertices.to_string()),
        ("edges", p.edges.to_string()),
        ("k", p.k.to_string()),
        ("epsilon_b", p.epsilon_b.to_string()),
        ("field bits N", p.n_bits.to_string()),
        ("rounds m", p.rounds.to_string()),
        ("soundness", format!("{:.6e} (ln {:.4})", p.soundness, p.ln_soundness)),
        ("binding epsilon", format!("{:.6e}", p.binding_epsilon)),
        ("resource bytes", p.resource_bytes.to_string()),
        ("resource MB", format!("{:.3}", p.resource_megabytes)),
        ("prior-work rounds", format!("{:.3e}", p.prior_work_rounds)),
    ];
    for (k, v) in rows {
        writeln!(out, "{k:<18} {v}")?;
    }
    Ok(EXIT_OK)
}

fn cmd_run(flags: &RunFlags, mode: Option<Mode>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, UsageError> {
    let run = resolve_run(flags, mode)?;
    writeln!(
        err,
        "running {} rounds, mode {}, GF(2^{}), |V|={}, |E|={}",
        run.rounds,
        run.settings.mode,
        run.field.width_bits(),
        run.graph.graph().num_vertices(),
        run.graph.graph().num_edges()
    )?;
    let report = execute_run(&run, threads_from_env())?;
    let json = serde_json::to_string_pretty(&report)?;
    match &run.report {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => writeln!(out, "{json}")?,
    }
    writeln!(
        err,
        "{}: {} accepted, {} rejected in {:.3} s",
        if report.accept { "ACCEPT" } else { "REJECT" },
        report.accepts,
        report.rejects(),
        report.wall_time_ns as f64 * 1e-9
    )?;
    Ok(if report.accept { EXIT_OK } else { EXIT_REJECT })
}

fn cmd_zk_test(a: &ZkTestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, UsageError> {
    let graph = ColoredGraph::load(&a.graph).map_err(|e| UsageError(format!("{}: {e}", a.graph.display())))?;
    let field = Field::preset(a.field_bits)?;
    let report = zk_equality_check(&graph, &field)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(p) = &a.out {
        let mut w = create(p)?;
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    if a.json {
        writeln!(out, "{json}")?;
    } else {
        for i in &report.instances {
            let x: Vec<String> = i.x.iter().map(|v| v.to_string()).collect();
            let (u, v) = i.c.endpoints();
            writeln!(out, "X=[{}] C=({u},{v}) tv={}", x.join(","), i.tv)?;
        }
        writeln!(
            out,
            "{} ({} instances, max tv {})",
            if report.pass { "PASS" } else { "FAIL" },
            report.instances.len(),
            report.max_tv
        )?;
    }
    writeln!(err, "zk-test {}", if report.pass { "PASS" } else { "FAIL" })?;
    Ok(if report.pass { EXIT_OK } else { EXIT_REJECT })
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<i32, UsageError> {
    let b: GameBound = match a.game {
        GameArg::Chsh => chsh_quantum_upper(a.p, a.q_bits)?,
        GameArg::ParallelChsh => chsh_parallel_quantum_upper(a.p, a.q_bits, a.n)?,
    };
    if a.json {
        let mut v = serde_json::to_value(b)?;
        v["quantum_upper"] = serde_json::json!(b.quantum_upper());
        v["vacuous"] = serde_json::json!(b.is_vacuous());
        writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    } else {
        writeln!(out, "quantum upper bound {:.15}", b.quantum_upper())?;
        writeln!(out, "leading term        {:.15e}", b.leading)?;
        writeln!(out, "excess term         {:.15e}", b.excess)?;
        if !b.approximation_valid {
            writeln!(out, "note: n(P-1)/Q > 1, outside the regime the bound was derived for")?;
        }
        if b.is_vacuous() {
            writeln!(out, "note: bound exceeds 1")?;
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and run. Never exits the process.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenGraph(a) => cmd_gen_graph(a, out, err),
        Command::Params(a) => cmd_params(a, out),
        Command::Run(a) => cmd_run(&a.flags, a.mode, out, err),
        Command::Attack(a) => cmd_run(&a.flags, Some(Mode::Cheat(a.strategy)), out, err),
        Command::ZkTest(a) => cmd_zk_test(a, out, err),
        Command::Bounds(a) => cmd_bounds(a, out),
    };
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}
