//! Monte Carlo estimation and the per-sample replay of the containment
//! argument.
//!
//! Sample `i` of a run always uses stream `i` of the run's seed, so a run is
//! a pure function of its parameters and the worker count only changes how
//! fast it finishes.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::configuration::Configuration;
use crate::enhancement::{check_detour, enhance, Pattern};
use crate::error::{Error, Result};
use crate::events::{radial_closed_path, rect_crossing, surrounding_circuit_4rect, surrounding_circuit_exact};
use crate::geometry::{RegionKind, TiltedRegion};
use crate::rng::GENERATOR_ID;
use crate::tracer::{trace_origin_summary, TraceStatus};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Radius of the core where the hybrid configuration keeps the original sites.
pub const HYBRID_CORE: u32 = 100;

pub const ESTIMATES_HEADER: &str = "event,p,n,N,hits,estimate,ci_lo,ci_hi,seed,generator,walltime_ms";
pub const VERIFICATION_HEADER: &str = "sample,circuit,closed,contained,hybrid_contained,pass";
pub const FITS_HEADER: &str = "c_hat,intercept,r2,points_used";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// The origin trajectory is closed and stays inside `Q_n`.
    Closure,
    /// Closed path from the centre vertex to outside `Q_n`.
    A,
    /// Long-way crossing of `T_n`.
    Aprime,
    /// Closed circuit in `Q_{2n}` around `Q_n`, exact detector.
    Acirc,
    /// All four rectangle crossings around `Q_n`.
    Acirc4,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::Closure,
        EventKind::A,
        EventKind::Aprime,
        EventKind::Acirc,
        EventKind::Acirc4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Closure => "closure",
            EventKind::A => "A",
            EventKind::Aprime => "Aprime",
            EventKind::Acirc => "Acirc",
            EventKind::Acirc4 => "Acirc4",
        }
    }

    /// Extent needed to decide the event on a plain sample.
    pub fn required_extent(self, n: u32) -> u32 {
        match self {
            EventKind::Closure | EventKind::A => TiltedRegion::q(n).required_extent(),
            EventKind::Aprime => TiltedRegion::new(RegionKind::T, n).required_extent(),
            EventKind::Acirc | EventKind::Acirc4 => TiltedRegion::q(2 * n).required_extent(),
        }
    }

    pub fn holds(self, c: &Configuration, n: u32) -> Result<bool> {
        Ok(match self {
            EventKind::Closure => trace_origin_summary(c).closed_within(n),
            EventKind::A => radial_closed_path(c, n)?.holds,
            EventKind::Aprime => rect_crossing(c, n, RegionKind::T)?.holds,
            EventKind::Acirc => surrounding_circuit_exact(c, n)?.holds,
            EventKind::Acirc4 => surrounding_circuit_4rect(c, n)?.holds,
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown event {s:?} (expected closure, A, Aprime, Acirc or Acirc4)")))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An event, evaluated on the sample itself or on its enhancement.
#[derive(Clone, Debug)]
pub struct EventDescriptor {
    pub kind: EventKind,
    pub enhanced: Option<Pattern>,
}

impl EventDescriptor {
    pub fn plain(kind: EventKind) -> Self {
        EventDescriptor { kind, enhanced: None }
    }

    pub fn enhanced(kind: EventKind, g: Pattern) -> Self {
        EventDescriptor {
            kind,
            enhanced: Some(g),
        }
    }

    pub fn label(&self) -> String {
        match &self.enhanced {
            None => self.kind.as_str().to_string(),
            Some(_) => format!("{}+enhanced", self.kind),
        }
    }

    /// Extent covering the event, padded so that every pattern copy that
    /// can touch the event's region lies fully inside the sample.
    pub fn extent(&self, n: u32) -> u32 {
        let base = self.kind.required_extent(n);
        match &self.enhanced {
            None => base,
            Some(g) => base + 2 * g.radius() + 2,
        }
    }

    pub fn holds(&self, c: &Configuration, n: u32) -> Result<bool> {
        match &self.enhanced {
            None => self.kind.holds(c, n),
            Some(g) => self.kind.holds(&enhance(c, g, None), n),
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let nf = n as f64;
    let phat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // Clamp so the interval always contains the point estimate exactly.
    let lo = if k == 0 { 0.0 } else { (centre - half).clamp(0.0, phat) };
    let hi = if k == n { 1.0 } else { (centre + half).clamp(phat, 1.0) };
    (lo, hi)
}

#[derive(Clone, Debug)]
pub struct EstimationReport {
    pub event: String,
    pub p: f64,
    pub n: u32,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci: (f64, f64),
    pub seed: u64,
    pub generator: &'static str,
    pub walltime_ms: u128,
}

impl EstimationReport {
    fn new(event: String, p: f64, n: u32, trials: u64, hits: u64, seed: u64, walltime_ms: u128) -> Self {
        EstimationReport {
            event,
            p,
            n,
            trials,
            hits,
            estimate: hits as f64 / trials as f64,
            ci: wilson_interval(hits, trials, Z95),
            seed,
            generator: GENERATOR_ID,
            walltime_ms,
        }
    }

    /// Standard error of the estimate, `sqrt(q (1 - q) / N)`.
    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }

    /// One CSV row. Wall time varies between runs, so it is written only on
    /// request and `NA` otherwise.
    pub fn csv_row(&self, with_walltime: bool) -> String {
        let wall = if with_walltime {
            self.walltime_ms.to_string()
        } else {
            "NA".to_string()
        };
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            self.event, self.p, self.n, self.trials, self.hits, self.estimate, self.ci.0, self.ci.1, self.seed,
            self.generator, wall
        )
    }
}

pub fn estimates_csv(reports: &[EstimationReport], with_walltime: bool) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row(with_walltime));
        out.push('\n');
    }
    out
}

/// Runs `f` on a pool of `workers` threads (`0` means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn check_common(p: f64, trials: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p = {p} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if trials > u32::MAX as u64 {
        return Err(Error::invalid("trial count exceeds the number of streams"));
    }
    Ok(())
}

/// Per-sample outcomes of `f` on samples `0..trials`, in sample order.
fn per_sample<T: Send>(
    p: f64,
    extent: u32,
    trials: u64,
    seed: u64,
    workers: usize,
    f: impl Fn(u32, &Configuration) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    // Fail early on an oversized extent rather than once per sample.
    crate::configuration::check_budget("configuration", extent, 1.0 / 8.0, crate::configuration::DEFAULT_MEMORY_BUDGET)?;
    with_workers(workers, || {
        (0..trials as u32)
            .into_par_iter()
            .map(|i| {
                let c = Configuration::sample(p, extent, seed, i)?;
                f(i, &c)
            })
            .collect::<Result<Vec<T>>>()
    })?
}

pub fn estimate_event(
    event: &EventDescriptor,
    p: f64,
    n: u32,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<EstimationReport> {
    check_common(p, trials)?;
    let start = Instant::now();
    let extent = event.extent(n);
    let outcomes = per_sample(p, extent, trials, seed, workers, |_, c| event.holds(c, n))?;
    let hits = outcomes.iter().filter(|&&h| h).count() as u64;
    Ok(EstimationReport::new(
        event.label(),
        p,
        n,
        trials,
        hits,
        seed,
        start.elapsed().as_millis(),
    ))
}

#[derive(Clone, Debug)]
pub struct PairedReport {
    pub plain: EstimationReport,
    pub enhanced: EstimationReport,
    /// Samples with the event in both.
    pub both: u64,
    /// Event only after enhancement.
    pub gained: u64,
    /// Event only before enhancement; the implication fails on these.
    pub violations: u64,
    /// Indices of violating samples.
    pub violating_samples: Vec<u32>,
    /// Mean of the per-sample difference (enhanced minus plain).
    pub gap: f64,
    pub gap_ci: (f64, f64),
}

/// Tallies `(omega in A'_n, enhanced omega in A'_n)` on the same samples.
pub fn compare_enhanced(
    g: &Pattern,
    p: f64,
    n: u32,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<PairedReport> {
    check_common(p, trials)?;
    let start = Instant::now();
    let enhanced_event = EventDescriptor::enhanced(EventKind::Aprime, g.clone());
    let extent = enhanced_event.extent(n);
    let pairs = per_sample(p, extent, trials, seed, workers, |_, c| {
        Ok((
            EventKind::Aprime.holds(c, n)?,
            EventKind::Aprime.holds(&enhance(c, g, None), n)?,
        ))
    })?;
    let wall = start.elapsed().as_millis();
    let plain_hits = pairs.iter().filter(|x| x.0).count() as u64;
    let enh_hits = pairs.iter().filter(|x| x.1).count() as u64;
    let both = pairs.iter().filter(|x| x.0 && x.1).count() as u64;
    let gained = pairs.iter().filter(|x| !x.0 && x.1).count() as u64;
    let violating_samples: Vec<u32> = pairs
        .iter()
        .enumerate()
        .filter(|(_, x)| x.0 && !x.1)
        .map(|(i, _)| i as u32)
        .collect();
    let violations = violating_samples.len() as u64;
    let nf = trials as f64;
    let gap = (gained as f64 - violations as f64) / nf;
    let gap_ci = if violations == 0 {
        // The difference is then a 0/1 variable: Wilson on the gained count.
        wilson_interval(gained, trials, Z95)
    } else {
        let mean_sq = (gained + violations) as f64 / nf;
        let sd = ((mean_sq - gap * gap) * nf / (nf - 1.0).max(1.0)).max(0.0).sqrt();
        let half = Z95 * sd / nf.sqrt();
        (gap - half, gap + half)
    };
    Ok(PairedReport {
        plain: EstimationReport::new(EventKind::Aprime.as_str().into(), p, n, trials, plain_hits, seed, wall),
        enhanced: EstimationReport::new(enhanced_event.label(), p, n, trials, enh_hits, seed, wall),
        both,
        gained,
        violations,
        violating_samples,
        gap,
        gap_ci,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationRecord {
    pub sample: u32,
    /// Exact circuit around `Q_n` in the enhanced sample.
    pub circuit_found: bool,
    /// Four-rectangle circuit in the enhanced sample (weaker cross-check).
    pub circuit_4rect: bool,
    pub trajectory_closed: bool,
    /// Origin trajectory of the plain sample inside `Q_{2n+2D}`.
    pub contained: bool,
    /// Origin trajectory of the hybrid sample inside `Q_{2n}`.
    pub hybrid_contained: bool,
    pub pass: bool,
    pub diagnostics: String,
}

impl VerificationRecord {
    pub fn csv_row(&self) -> String {
        let b = |x: bool| if x { "1" } else { "0" };
        format!(
            "{},{},{},{},{},{}",
            self.sample,
            b(self.circuit_found),
            b(self.trajectory_closed),
            b(self.contained),
            b(self.hybrid_contained),
            b(self.pass)
        )
    }
}

#[derive(Clone, Debug)]
pub struct VerificationSummary {
    pub p: f64,
    pub n: u32,
    pub trials: u64,
    pub seed: u64,
    pub detour_radius: u32,
    pub extent: u32,
    pub circuits: u64,
    pub passes_given_circuit: u64,
    pub failures: u64,
    /// Samples where the four-rectangle check fires but the exact one does not.
    pub rect_without_exact: u64,
    pub records: Vec<VerificationRecord>,
}

impl VerificationSummary {
    /// Pass rate among samples with a circuit; 1 when there are none.
    pub fn conditional_pass_rate(&self) -> f64 {
        if self.circuits == 0 {
            1.0
        } else {
            self.passes_given_circuit as f64 / self.circuits as f64
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failures == 0 && self.rect_without_exact == 0
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(VERIFICATION_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "p={} n={} N={} seed={} D={} extent={} generator={}",
            self.p, self.n, self.trials, self.seed, self.detour_radius, self.extent, GENERATOR_ID
        );
        let _ = writeln!(
            out,
            "circuits={} passes={} failures={} conditional_pass_rate={:.6} rect_without_exact={}",
            self.circuits,
            self.passes_given_circuit,
            self.failures,
            self.conditional_pass_rate(),
            self.rect_without_exact
        );
        for r in self.records.iter().filter(|r| !r.pass) {
            let _ = writeln!(
                out,
                "FAIL sample={} seed={} stream={} n={}: {}",
                r.sample, self.seed, r.sample, self.n, r.diagnostics
            );
        }
        out
    }
}

/// Extent used by [`verify_theorem`]: `Q_{2n+2D}` plus pattern padding.
pub fn verification_extent(n: u32, detour_radius: u32, g: &Pattern) -> u32 {
    TiltedRegion::q(2 * n + 2 * detour_radius).required_extent() + 2 * g.radius() + 2
}

/// Replays the containment argument on each sample: whenever the enhanced
/// sample has a circuit around `Q_n`, the plain origin trajectory must close
/// inside `Q_{2n+2D}` and the hybrid one inside `Q_{2n}`.
pub fn verify_theorem(g: &Pattern, p: f64, n: u32, trials: u64, seed: u64, workers: usize) -> Result<VerificationSummary> {
    check_common(p, trials)?;
    if n <= HYBRID_CORE {
        return Err(Error::invalid(format!("verification needs n > {HYBRID_CORE}, got {n}")));
    }
    let detours = check_detour(g);
    if let Some(bad) = detours.iter().find(|d| !d.ok) {
        return Err(Error::invalid(format!(
            "pattern {:?} fails the detour check entering {}: {}",
            g.name,
            bad.entry,
            bad.failure.clone().unwrap_or_default()
        )));
    }
    let d = detours.iter().map(|x| x.radius).max().unwrap_or(0);
    let extent = verification_extent(n, d, g);
    let bound = 2 * n + 2 * d;
    let records = per_sample(p, extent, trials, seed, workers, |i, c| {
        let enhanced = enhance(c, g, None);
        let circuit = surrounding_circuit_exact(&enhanced, n)?.holds;
        let circuit_4rect = surrounding_circuit_4rect(&enhanced, n)?.holds;
        let plain = trace_origin_summary(c);
        let hybrid = Configuration::hybrid(c, &enhanced, HYBRID_CORE)?;
        let hybrid_trace = trace_origin_summary(&hybrid);
        let closed = plain.status == TraceStatus::Closed;
        let contained = plain.contained_in(bound);
        let hybrid_contained = hybrid_trace.status == TraceStatus::Closed && hybrid_trace.contained_in(2 * n);
        let pass = !circuit || (closed && contained && hybrid_contained);
        let diagnostics = format!(
            "plain {} steps={} q_radius={}; hybrid {} steps={} q_radius={}; bound={}",
            plain.status.as_str(),
            plain.steps,
            plain.metrics.q_radius,
            hybrid_trace.status.as_str(),
            hybrid_trace.steps,
            hybrid_trace.metrics.q_radius,
            bound
        );
        Ok(VerificationRecord {
            sample: i,
            circuit_found: circuit,
            circuit_4rect,
            trajectory_closed: closed,
            contained,
            hybrid_contained,
            pass,
            diagnostics,
        })
    })?;
    let circuits = records.iter().filter(|r| r.circuit_found).count() as u64;
    let passes_given_circuit = records.iter().filter(|r| r.circuit_found && r.pass).count() as u64;
    Ok(VerificationSummary {
        p,
        n,
        trials,
        seed,
        detour_radius: d,
        extent,
        circuits,
        passes_given_circuit,
        failures: records.iter().filter(|r| !r.pass).count() as u64,
        rect_without_exact: records.iter().filter(|r| r.circuit_4rect && !r.circuit_found).count() as u64,
        records,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    /// `(n, 1 - estimate)` for every input point.
    pub points: Vec<(f64, f64)>,
    /// Negated slope of `log(1 - estimate)` against `n`.
    pub c_hat: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
    /// Some estimate equalled 1 and its point was dropped.
    pub degenerate: bool,
}

impl DecayFit {
    pub fn csv(&self) -> String {
        format!(
            "{FITS_HEADER}\n{:.9},{:.9},{:.9},{}\n",
            self.c_hat, self.intercept, self.r2, self.points_used
        )
    }
}

/// Least-squares fit of `log(1 - estimate) = intercept - c n`.
pub fn fit_decay(series: &[(u32, f64)]) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = series.iter().map(|&(n, q)| (n as f64, 1.0 - q)).collect();
    let usable: Vec<(f64, f64)> = points.iter().filter(|&&(_, y)| y > 0.0).map(|&(x, y)| (x, y.ln())).collect();
    let degenerate = usable.len() < points.len();
    if usable.len() < 3 {
        return Err(Error::invalid(format!(
            "decay fit needs at least 3 points with estimate < 1, got {}{}",
            usable.len(),
            if degenerate { " (estimates equal to 1 were dropped)" } else { "" }
        )));
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("decay fit needs at least two distinct n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        points,
        c_hat: -slope,
        intercept,
        r2,
        points_used: usable.len(),
        degenerate,
    })
}
