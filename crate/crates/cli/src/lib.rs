//! The `pinball` command line.
//!
//! Exit codes: 0 success, 1 a verification or check failed, 2 bad usage
//! (including unreadable inputs).

pub mod render;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinball_core::configuration::FORMAT_VERSION as CONFIG_FORMAT_VERSION;
use pinball_core::enhancement::{
    check_pattern, enhance_with_matches, match_pattern, search_patterns, EssentialSearch, PATTERN_FORMAT_VERSION,
};
use pinball_core::events::{
    radial_closed_path, rect_crossing, surrounding_circuit_4rect, surrounding_circuit_exact, EventResult,
    WITNESS_FORMAT_VERSION,
};
use pinball_core::io::write_atomic;
use pinball_core::montecarlo::{compare_enhanced, estimate_event, estimates_csv, verify_theorem, EventDescriptor, EventKind};
use pinball_core::rng::GENERATOR_ID;
use pinball_core::tracer::{default_max_steps, trace, Trajectory, TRAJECTORY_FORMAT_VERSION};
use pinball_core::{Configuration, Pattern, RayState, RegionKind, TiltedRegion, TraceStatus};

use render::{render_svg, Layer, Overlays, RenderSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn version_text() -> &'static str {
    static TEXT: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    TEXT.get_or_init(|| {
        format!(
            "{}\nconfiguration format {CONFIG_FORMAT_VERSION}\ntrajectory format {TRAJECTORY_FORMAT_VERSION}\n\
             witness format {WITNESS_FORMAT_VERSION}\npattern format {PATTERN_FORMAT_VERSION}\ngenerator {GENERATOR_ID}",
            env!("CARGO_PKG_VERSION")
        )
    })
}

#[derive(Debug, Parser)]
#[command(name = "pinball", about = "Mirror-model experiments on the Manhattan lattice", version = version_text())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Bernoulli(p) mirror configuration.
    Sample(SampleArgs),
    /// Trace the ray leaving the origin eastwards.
    Trace(TraceArgs),
    /// Close the red site of every pattern copy.
    Enhance(EnhanceArgs),
    /// Decide one event on a configuration file.
    Event(EventArgs),
    /// Estimate event probabilities.
    Estimate(EstimateArgs),
    /// Replay the containment argument on random samples.
    Verify(VerifyArgs),
    /// Check or search enhancement patterns.
    #[command(subcommand)]
    Pattern(PatternCommand),
    /// Draw a configuration and overlays as SVG.
    Render(RenderArgs),
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_parser = parse_probability)]
    pub p: f64,
    #[arg(long)]
    pub extent: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Defaults to 16 (2M + 1)^2.
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// A pattern file, or `default` for the shipped pattern.
    #[arg(long, default_value = "default")]
    pub pattern: String,
    /// Leave copies whose red edge lies inside Q_k alone.
    #[arg(long)]
    pub exclude_core: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the list of changed sites.
    #[arg(long)]
    pub diff: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EventArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// A, Aprime, Acirc or Acirc4.
    #[arg(long)]
    pub event: String,
    #[arg(long)]
    pub n: u32,
    /// Witness file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// closure, A, Aprime, Acirc or Acirc4.
    #[arg(long)]
    pub event: String,
    /// One or more values, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_probability, required = true)]
    pub p: Vec<f64>,
    /// One or more values, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<u32>,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Evaluate on the enhanced sample.
    #[arg(long)]
    pub enhanced: bool,
    /// With Aprime: report plain and enhanced rows from the same samples.
    #[arg(long, conflicts_with = "enhanced")]
    pub paired: bool,
    #[arg(long, default_value = "default")]
    pub pattern: String,
    #[arg(long)]
    pub csv: PathBuf,
    /// Record wall time in the CSV instead of `NA`.
    #[arg(long)]
    pub walltime: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_probability)]
    pub p: f64,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "default")]
    pub pattern: String,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum PatternCommand {
    /// Run the translation, essentiality and detour checks.
    Check {
        #[arg(long, default_value = "default")]
        pattern: String,
        /// Random trials for the essentiality search.
        #[arg(long, default_value_t = 2000)]
        trials: u32,
    },
    /// Enumerate valid patterns up to a radius.
    Search {
        #[arg(long)]
        radius: u32,
        /// Ray steps explored before giving up.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        /// Write the smallest pattern found here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// Pattern whose matches the pattern_matches layer shows.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Regions to outline, e.g. `Q:8,T1:4`.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "lattice,mirrors,trajectory,circuit_witness")]
    pub layers: Vec<Layer>,
    #[arg(long, default_value_t = 12.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    Failed,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Failed) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Trace(a) => trace_cmd(a),
        Command::Enhance(a) => enhance_cmd(a),
        Command::Event(a) => event_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Pattern(c) => pattern_cmd(c),
        Command::Render(a) => render_cmd(a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn load_config(path: &Path) -> Result<Configuration> {
    Configuration::load(path).with_context(|| format!("--config {}", path.display()))
}

fn load_pattern(spec: &str) -> Result<Pattern> {
    if spec == "default" {
        Ok(Pattern::default_pattern())
    } else {
        Pattern::load(spec).with_context(|| format!("--pattern {spec}"))
    }
}

fn sample(a: SampleArgs) -> Result<Outcome> {
    let c = Configuration::sample(a.p, a.extent, a.seed, a.stream).context("--extent")?;
    write(&a.out, &c.to_text())?;
    println!("sampled extent {} with {} closed sites", a.extent, c.closed_count());
    Ok(Outcome::Ok)
}

fn trace_cmd(a: TraceArgs) -> Result<Outcome> {
    let c = load_config(&a.config)?;
    let max = a.max_steps.unwrap_or_else(|| default_max_steps(&c));
    let t = trace(&c, RayState::ORIGIN_EAST, max).context("--max-steps")?;
    write(&a.out, &t.to_text())?;
    if let Some(svg) = &a.svg {
        let overlays = Overlays {
            trajectory: Some((t.states.clone(), t.status == TraceStatus::Closed)),
            ..Default::default()
        };
        let spec = RenderSpec::new([Layer::Lattice, Layer::Mirrors, Layer::Trajectory], 12.0);
        write(svg, &render_svg(&c, &overlays, &spec)?)?;
    }
    println!(
        "status {} steps {} q_radius {} linf_diameter {}",
        t.status.as_str(),
        t.states.len(),
        t.metrics.q_radius,
        t.metrics.linf_diameter
    );
    Ok(Outcome::Ok)
}

fn enhance_cmd(a: EnhanceArgs) -> Result<Outcome> {
    let c = load_config(&a.config)?;
    let g = load_pattern(&a.pattern)?;
    let (e, matches) = enhance_with_matches(&c, &g, a.exclude_core);
    write(&a.out, &e.to_text())?;
    let changed = e.difference(&c);
    if let Some(diff) = &a.diff {
        let text: String = changed.iter().map(|s| format!("{} {}\n", s.a, s.b)).collect();
        write(diff, &text)?;
    }
    println!("{} matches, {} sites closed", matches.offsets.len(), changed.len());
    Ok(Outcome::Ok)
}

fn event_cmd(a: EventArgs) -> Result<Outcome> {
    let c = load_config(&a.config)?;
    let kind: EventKind = a.event.parse().context("--event")?;
    let result: EventResult = match kind {
        EventKind::A => radial_closed_path(&c, a.n),
        EventKind::Aprime => rect_crossing(&c, a.n, RegionKind::T),
        EventKind::Acirc => surrounding_circuit_exact(&c, a.n),
        EventKind::Acirc4 => surrounding_circuit_4rect(&c, a.n),
        EventKind::Closure => bail!("--event: closure is a trajectory event; use `trace`"),
    }
    .context("--n")?;
    let text = result.to_text(kind.as_str(), a.n);
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            println!("{} n={} holds={}", kind, a.n, result.holds);
        }
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

fn estimate_cmd(a: EstimateArgs) -> Result<Outcome> {
    let kind: EventKind = a.event.parse().context("--event")?;
    let g = load_pattern(&a.pattern)?;
    if a.paired && kind != EventKind::Aprime {
        bail!("--paired is only defined for --event Aprime");
    }
    let descriptor = if a.enhanced {
        EventDescriptor::enhanced(kind, g.clone())
    } else {
        EventDescriptor::plain(kind)
    };
    let mut reports = Vec::new();
    let mut violations = 0;
    for &p in &a.p {
        for &n in &a.n {
            if a.paired {
                let r = compare_enhanced(&g, p, n, a.trials, a.seed, a.workers)?;
                println!(
                    "p={p} n={n} plain={:.6} enhanced={:.6} gap={:.6} [{:.6}, {:.6}] violations={}",
                    r.plain.estimate, r.enhanced.estimate, r.gap, r.gap_ci.0, r.gap_ci.1, r.violations
                );
                violations += r.violations;
                reports.push(r.plain);
                reports.push(r.enhanced);
            } else {
                reports.push(estimate_event(&descriptor, p, n, a.trials, a.seed, a.workers)?);
            }
        }
    }
    let csv = estimates_csv(&reports, a.walltime);
    write(&a.csv, &csv)?;
    print!("{}", csv.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    Ok(if violations == 0 { Outcome::Ok } else { Outcome::Failed })
}

fn verify_cmd(a: VerifyArgs) -> Result<Outcome> {
    let g = load_pattern(&a.pattern)?;
    let report = check_pattern(&g, &EssentialSearch::default());
    if !report.is_valid() {
        eprintln!("pattern {} failed validation: {}", a.pattern, report.summary());
        return Ok(Outcome::Failed);
    }
    let summary = verify_theorem(&g, a.p, a.n, a.trials, a.seed, a.workers)?;
    write(&a.csv, &summary.csv())?;
    print!("{}", summary.summary_text());
    Ok(if summary.all_pass() { Outcome::Ok } else { Outcome::Failed })
}

fn pattern_cmd(c: PatternCommand) -> Result<Outcome> {
    match c {
        PatternCommand::Check { pattern, trials } => {
            let g = load_pattern(&pattern)?;
            let report = check_pattern(
                &g,
                &EssentialSearch {
                    trials,
                    ..Default::default()
                },
            );
            println!("pattern {} (R={}, {} sites)", g.name, g.radius(), g.size());
            println!("{}", report.summary());
            for d in &report.diagnostics {
                println!(
                    "entering {}: {}",
                    d.entry,
                    match (&d.exit_dir, &d.failure) {
                        (Some(dir), _) => format!("returns leaving {dir} (D={})", d.radius),
                        (None, Some(f)) => f.clone(),
                        (None, None) => "no return".into(),
                    }
                );
            }
            Ok(if report.is_valid() { Outcome::Ok } else { Outcome::Failed })
        }
        PatternCommand::Search { radius, budget, out } => {
            let found = search_patterns(radius, budget, &EssentialSearch::default()).context("--radius")?;
            println!(
                "{} valid patterns, {} ray steps{}",
                found.patterns.len(),
                found.nodes_used,
                if found.budget_exhausted { ", budget exhausted" } else { "" }
            );
            for g in found.patterns.iter().take(3) {
                print!("{}", g.to_text());
            }
            if let (Some(path), Some(g)) = (&out, found.patterns.first()) {
                write(path, &g.to_text())?;
            }
            Ok(if found.patterns.is_empty() { Outcome::Failed } else { Outcome::Ok })
        }
    }
}

fn parse_region(s: &str) -> Result<TiltedRegion> {
    let (kind, n) = s.split_once(':').ok_or_else(|| anyhow!("--regions: expected KIND:n, got {s:?}"))?;
    let kind = match kind {
        "Q" => RegionKind::Q,
        "T" => RegionKind::T,
        "T1" => RegionKind::T1,
        "T2" => RegionKind::T2,
        "T3" => RegionKind::T3,
        "T4" => RegionKind::T4,
        _ => bail!("--regions: unknown region {kind:?}"),
    };
    let n: u32 = n.parse().map_err(|_| anyhow!("--regions: bad scale {n:?}"))?;
    if n == 0 {
        bail!("--regions: scale must be positive");
    }
    Ok(TiltedRegion::new(kind, n))
}

fn render_cmd(a: RenderArgs) -> Result<Outcome> {
    let c = load_config(&a.config)?;
    let mut overlays = Overlays::default();
    if let Some(path) = &a.trajectory {
        let text = std::fs::read_to_string(path).with_context(|| format!("--trajectory {}", path.display()))?;
        let (status, states) = Trajectory::states_from_text(&text).context("--trajectory")?;
        overlays.trajectory = Some((states, status == TraceStatus::Closed));
    }
    if let Some(path) = &a.witness {
        let text = std::fs::read_to_string(path).with_context(|| format!("--witness {}", path.display()))?;
        overlays.witness = EventResult::witness_from_text(&text).context("--witness")?;
    }
    if let Some(spec) = &a.pattern {
        let g = load_pattern(spec)?;
        let m = match_pattern(&c, &g, None);
        overlays.matches = Some((g, m));
    }
    overlays.regions = a.regions.iter().map(|s| parse_region(s)).collect::<Result<_>>()?;
    let spec = RenderSpec::new(a.layers.iter().copied(), a.scale);
    let svg = render_svg(&c, &overlays, &spec).context("--config")?;
    write(&a.out, &svg)?;
    Ok(Outcome::Ok)
}
