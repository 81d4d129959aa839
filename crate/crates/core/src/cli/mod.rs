//! Command-line front end: `verify`, `replay` and `export-promela`.
//!
//! Exit statuses: 0 holds, 1 violated, 2 depth bound or resource ceiling
//! reached, 3 configuration or usage error, 4 trace replay failed.

pub mod config;
pub mod promela;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::checker::{
    self, explore, parse_property_list, ExploreOptions, DEFAULT_MEMORY_LIMIT, Outcome, Property, PropertyContext, PropertyStatus, Trace,
    Verdict,
};
use crate::netmodel::{self, Action, ScenarioConfig, SystemState};
use crate::saodv::Mode;

pub use config::{parse_config, render_config, DiagCode, Diagnostic};
pub use promela::export_promela;

pub const EXIT_HOLDS: u8 = 0;
pub const EXIT_VIOLATED: u8 = 1;
pub const EXIT_BOUND: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_REPLAY: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "rndcheck", version, about = "Explicit-state checker for RND + SA-AODV scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore every interleaving of a scenario and check properties.
    Verify(VerifyArgs),
    /// Re-execute a counterexample trace and narrate it.
    Replay(ReplayArgs),
    /// Print a PROMELA skeleton of the scenario.
    ExportPromela(ExportArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub config: PathBuf,
    /// Comma-separated codes or names (P1..P7), or `all`.
    #[arg(long, default_value = "all")]
    pub props: String,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Collect one witness per violated property instead of stopping.
    #[arg(long)]
    pub keep_going: bool,
    /// Where to write the counterexample; defaults to the config path with
    /// a `.trace` extension.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Override the scenario's routing mode.
    #[arg(long, value_parser = ["sa", "plain"])]
    pub mode: Option<String>,
    /// Approximate memory ceiling for the search, in MiB.
    #[arg(long, default_value_t = DEFAULT_MEMORY_LIMIT >> 20)]
    pub memory_limit_mib: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub config: PathBuf,
    pub trace: PathBuf,
    /// Override the scenario's routing mode; must match the verify run.
    #[arg(long, value_parser = ["sa", "plain"])]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_HOLDS,
                _ => EXIT_CONFIG,
            };
        }
    };
    match &cli.command {
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Replay(a) => cmd_replay(a, out, err),
        Command::ExportPromela(a) => cmd_export(a, out, err),
    }
}

/// Reads and parses a scenario, printing diagnostics to `err` on failure.
pub fn load_config(path: &Path, err: &mut dyn Write) -> Option<ScenarioConfig> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let d = Diagnostic { line: 0, code: DiagCode::Io, message: format!("cannot read {}: {e}", path.display()) };
            let _ = writeln!(err, "{d}");
            return None;
        }
    };
    match parse_config(&text) {
        Ok(cfg) => Some(cfg),
        Err(diags) => {
            for d in diags {
                let _ = writeln!(err, "{}: {d}", path.display());
            }
            None
        }
    }
}

fn apply_mode(cfg: &mut ScenarioConfig, mode: Option<&str>) {
    match mode {
        Some("plain") => cfg.routing.mode = Mode::Plain,
        Some("sa") => cfg.routing.mode = Mode::Sa,
        _ => {}
    }
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Holds => "holds",
        Outcome::Violated => "violated",
        Outcome::BoundReached => "bound reached",
        Outcome::ResourceExhausted => "resource exhausted",
    }
}

pub fn exit_code(o: Outcome) -> u8 {
    match o {
        Outcome::Holds => EXIT_HOLDS,
        Outcome::Violated => EXIT_VIOLATED,
        Outcome::BoundReached | Outcome::ResourceExhausted => EXIT_BOUND,
    }
}

/// Text of a trace file: a comment header followed by the steps.
pub fn render_trace_file(prop: Property, description: &str, mode: Mode, trace: &Trace) -> String {
    format!(
        "# {} {}\n# {}\n# mode {}\n{}",
        prop.code(),
        prop.name(),
        description,
        config::mode_name(mode),
        trace
    )
}

/// Trace path for the `k`-th witness. The first uses `base` as is.
fn witness_path(base: &Path, k: usize, prop: Property) -> PathBuf {
    if k == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}.{}.trace", prop.code()))
}

pub fn render_report(config_path: &Path, props: &[Property], verdict: &Verdict, millis: f64) -> String {
    let mut s = String::new();
    s += &format!("scenario: {}\n", config_path.display());
    s += &format!("verdict: {}\n", outcome_word(verdict.outcome));
    s += &format!("states explored: {}\n", verdict.states_explored);
    s += &format!("max depth: {}\n", verdict.max_depth_seen);
    s += &format!("wall time: {millis:.1} ms\n");
    for &p in props {
        let status = match verdict.violations.iter().find(|v| v.property == p) {
            Some(v) => format!("VIOLATED ({} steps): {}", v.trace.len(), v.description),
            None if verdict.complete => "holds".to_string(),
            None => "no violation found before the search stopped".to_string(),
        };
        s += &format!("  {} {}: {status}\n", p.code(), p.name());
    }
    s
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let Some(mut cfg) = load_config(&args.config, err) else {
        return EXIT_CONFIG;
    };
    let props = match parse_property_list(&args.props) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(depth) = args.max_depth {
        cfg.max_depth = depth;
    }
    apply_mode(&mut cfg, args.mode.as_deref());
    let options = ExploreOptions {
        keep_going: args.keep_going,
        memory_limit: args.memory_limit_mib.saturating_mul(1 << 20),
        ..ExploreOptions::for_config(&cfg)
    };

    let started = Instant::now();
    let verdict = match explore(&cfg, &props, &options) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let millis = started.elapsed().as_secs_f64() * 1e3;
    let _ = write!(out, "{}", render_report(&args.config, &props, &verdict, millis));

    let base = args.trace_out.clone().unwrap_or_else(|| args.config.with_extension("trace"));
    for (k, v) in verdict.violations.iter().enumerate() {
        let path = witness_path(&base, k, v.property);
        if let Err(e) = fs::write(&path, render_trace_file(v.property, &v.description, cfg.routing.mode, &v.trace)) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
        let _ = writeln!(out, "trace for {} written to {}", v.property.code(), path.display());
    }
    exit_code(verdict.outcome)
}

fn describe_ranks(state: &SystemState, out: &mut String) {
    *out += "post-discovery neighbor records:\n";
    for node in &state.nodes {
        if node.neighbors.is_empty() {
            *out += &format!("  node {}: none\n", node.id);
            continue;
        }
        let parts: Vec<String> = node
            .neighbors
            .values()
            .map(|r| format!("{} rank {} (d' {})", r.neighbor, r.rank, r.d_prime))
            .collect();
        *out += &format!("  node {}: {}\n", node.id, parts.join(", "));
    }
}

/// Human-readable account of one step from `before` to `after`.
fn describe_step(index: usize, action: Action, before: &SystemState, after: &SystemState, cfg: &ScenarioConfig) -> String {
    let mut s = format!("step {index}: {action}\n");
    let actor = match action {
        Action::Originate => {
            let src = cfg.topology.source;
            s += &format!("  node {src} starts route discovery toward {}\n", cfg.topology.dest);
            src
        }
        Action::Deliver { from, to } => {
            if let Some(msg) = before.channel(from, to).and_then(|c| c.queue.first()) {
                s += &format!("  node {to} consumes {msg} from {from}\n");
            }
            match before.nodes[to.index()].rank_of(from) {
                Some(rank) => s += &format!("  node {to} holds rank {rank} for {from}\n"),
                None => s += &format!("  node {to} has no record of {from}\n"),
            }
            to
        }
    };
    let (old, new) = (&before.nodes[actor.index()].routes, &after.nodes[actor.index()].routes);
    for (dest, entry) in new {
        if old.get(dest) != Some(entry) {
            let verb = if old.contains_key(dest) { "replaced" } else { "added" };
            s += &format!(
                "  route {verb} at {actor}: to {dest} via {}, {} hop(s), seq {}\n",
                entry.next_hop, entry.hop_count, entry.dest_seq
            );
        }
    }
    for (b, a) in before.channels.iter().zip(&after.channels) {
        if a.from != actor {
            continue;
        }
        for msg in a.queue.iter().skip(b.queue.len()) {
            s += &format!("  sends {msg} to {}\n", a.to);
        }
    }
    s
}

pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let Some(mut cfg) = load_config(&args.config, err) else {
        return EXIT_CONFIG;
    };
    let text = match fs::read_to_string(&args.trace) {
        Ok(text) => text,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", args.trace.display());
            return EXIT_REPLAY;
        }
    };
    let trace = match text.parse::<Trace>() {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", args.trace.display());
            return EXIT_REPLAY;
        }
    };
    // verify records a mode override in the header; an explicit flag wins
    let recorded = text.lines().find_map(|l| l.strip_prefix("# mode ")).map(str::trim);
    apply_mode(&mut cfg, args.mode.as_deref().or(recorded));
    let states = match checker::replay_path(&cfg, &trace) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "replay failed: {e}");
            return EXIT_REPLAY;
        }
    };

    let mut s = String::new();
    describe_ranks(&states[0], &mut s);
    for (step, pair) in trace.steps.iter().zip(states.windows(2)) {
        s += &describe_step(step.index, step.action, &pair[0], &pair[1], &cfg);
    }
    let last = states.last().expect("replay yields at least the start state");
    let quiescent = netmodel::is_quiescent(last, &cfg).unwrap_or(false);
    s += &format!("final state: {}\n", if quiescent { "quiescent" } else { "still in progress" });
    let ctx = PropertyContext::new(&cfg, &states[0]);
    let mut violated = 0;
    for prop in Property::ALL {
        if prop.quiescent_only() && !quiescent {
            continue;
        }
        if let Ok(PropertyStatus::Violated(why)) = checker::eval_property(last, prop, &cfg, &ctx) {
            violated += 1;
            s += &format!("{} {} violated: {why}\n", prop.code(), prop.name());
        }
    }
    if violated == 0 {
        s += "no property is violated in the final state\n";
    }
    let _ = write!(out, "{s}");
    EXIT_HOLDS
}

pub fn cmd_export(args: &ExportArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let Some(cfg) = load_config(&args.config, err) else {
        return EXIT_CONFIG;
    };
    let text = match export_promela(&cfg) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => {
            let _ = write!(out, "{text}");
        }
    }
    EXIT_HOLDS
}
