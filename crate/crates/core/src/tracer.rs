//! Light dynamics on a mirror configuration.
//!
//! A [`RayState`] is the site the ray has just left (after any deflection
//! there) and the outgoing direction. The step map is injective, so an orbit
//! either returns to its start state or runs off the configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{is_manhattan_step, mirror_orientation, reflect, Direction, Site, TiltedRegion};

pub const TRAJECTORY_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RayState {
    pub site: Site,
    pub dir: Direction,
}

impl RayState {
    pub const fn new(site: Site, dir: Direction) -> Self {
        RayState { site, dir }
    }

    /// The ray leaving the origin eastwards.
    pub const ORIGIN_EAST: RayState = RayState::new(Site::ORIGIN, Direction::E);

    /// The state of the time-reversed ray at the same site, given the
    /// direction the forward ray arrived with.
    pub fn reversed(self, arrived_with: Direction) -> Self {
        RayState::new(self.site, arrived_with.reverse())
    }
}

/// The ray would step to a site outside the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Escape {
    pub last: RayState,
}

/// One step of the dynamics.
#[inline]
pub fn step(s: RayState, c: &Configuration) -> Result<RayState, Escape> {
    let next = s.site.step(s.dir);
    match c.get(next) {
        None => Err(Escape { last: s }),
        Some(true) => Ok(RayState::new(next, reflect(s.dir, mirror_orientation(next)))),
        Some(false) => Ok(RayState::new(next, s.dir)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceStatus {
    Closed,
    Escaped,
    BudgetExceeded,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Closed => "closed",
            TraceStatus::Escaped => "escaped",
            TraceStatus::BudgetExceeded => "budget_exceeded",
        }
    }
}

/// Size metrics of a set of visited sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryMetrics {
    pub linf_diameter: u32,
    /// Smallest `m` with every visited site inside `Q_m`.
    pub q_radius: u32,
    pub closed: bool,
}

#[derive(Clone, Copy, Debug)]
struct Extremes {
    a_min: i32,
    a_max: i32,
    b_min: i32,
    b_max: i32,
    q_radius: u32,
}

impl Extremes {
    fn new(s: Site) -> Self {
        Extremes {
            a_min: s.a,
            a_max: s.a,
            b_min: s.b,
            b_max: s.b,
            q_radius: s.q_radius(),
        }
    }

    #[inline]
    fn add(&mut self, s: Site) {
        self.a_min = self.a_min.min(s.a);
        self.a_max = self.a_max.max(s.a);
        self.b_min = self.b_min.min(s.b);
        self.b_max = self.b_max.max(s.b);
        self.q_radius = self.q_radius.max(s.q_radius());
    }

    fn diameter(&self) -> u32 {
        ((self.a_max - self.a_min) as u32).max((self.b_max - self.b_min) as u32)
    }
}

/// Outcome of a trace without the state list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceSummary {
    pub status: TraceStatus,
    pub steps: usize,
    pub metrics: TrajectoryMetrics,
    /// The last state before leaving the configuration.
    pub exit: Option<RayState>,
}

impl TraceSummary {
    pub fn contained_in(&self, m: u32) -> bool {
        self.metrics.q_radius <= m
    }

    /// Closed and inside `Q_n`.
    pub fn closed_within(&self, n: u32) -> bool {
        self.status == TraceStatus::Closed && self.contained_in(n)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: RayState,
    pub states: Vec<RayState>,
    pub status: TraceStatus,
    pub exit: Option<RayState>,
    pub metrics: TrajectoryMetrics,
}

/// `16 (2M + 1)^2`, four times the number of ray states.
pub fn default_max_steps(c: &Configuration) -> usize {
    let side = 2 * c.extent() as usize + 1;
    16 * side * side
}

/// Bitset over ray states used to check that nothing but the start repeats.
struct SeenStates {
    extent: i32,
    side: usize,
    bits: Vec<u64>,
}

impl SeenStates {
    fn new(c: &Configuration) -> Self {
        let side = 2 * c.extent() as usize + 1;
        SeenStates {
            extent: c.extent() as i32,
            side,
            bits: vec![0; (4 * side * side).div_ceil(64)],
        }
    }

    /// Returns false if the state was already present.
    #[inline]
    fn insert(&mut self, s: RayState) -> bool {
        let cell = (s.site.b + self.extent) as usize * self.side + (s.site.a + self.extent) as usize;
        let idx = cell * 4 + s.dir as usize;
        let (w, bit) = (idx / 64, 1u64 << (idx % 64));
        let fresh = self.bits[w] & bit == 0;
        self.bits[w] |= bit;
        fresh
    }
}

fn run(
    c: &Configuration,
    start: RayState,
    max_steps: usize,
    mut record: impl FnMut(RayState),
) -> Result<TraceSummary> {
    if !c.contains(start.site) {
        return Err(Error::invalid(format!("start site {} outside extent", start.site)));
    }
    if max_steps == 0 {
        return Err(Error::invalid("max_steps must be at least 1"));
    }
    let mut seen = SeenStates::new(c);
    let mut ext = Extremes::new(start.site);
    let mut cur = start;
    seen.insert(start);
    record(start);
    let mut steps = 1;
    let (status, exit) = loop {
        match step(cur, c) {
            Err(Escape { last }) => break (TraceStatus::Escaped, Some(last)),
            Ok(next) if next == start => break (TraceStatus::Closed, None),
            Ok(next) => {
                if steps >= max_steps {
                    break (TraceStatus::BudgetExceeded, None);
                }
                assert!(seen.insert(next), "state {next:?} repeated before returning to start");
                ext.add(next.site);
                record(next);
                steps += 1;
                cur = next;
            }
        }
    };
    Ok(TraceSummary {
        status,
        steps,
        metrics: TrajectoryMetrics {
            linf_diameter: ext.diameter(),
            q_radius: ext.q_radius,
            closed: status == TraceStatus::Closed,
        },
        exit,
    })
}

/// Follows the ray from `start` until it closes, escapes or exhausts the
/// step budget, recording every state.
pub fn trace(c: &Configuration, start: RayState, max_steps: usize) -> Result<Trajectory> {
    let mut states = Vec::new();
    let summary = run(c, start, max_steps, |s| states.push(s))?;
    Ok(Trajectory {
        start,
        states,
        status: summary.status,
        exit: summary.exit,
        metrics: summary.metrics,
    })
}

/// As [`trace`], keeping only the summary.
pub fn trace_summary(c: &Configuration, start: RayState, max_steps: usize) -> Result<TraceSummary> {
    run(c, start, max_steps, |_| {})
}

/// Trace of the ray leaving the origin eastwards with the default budget.
pub fn trace_origin(c: &Configuration) -> Trajectory {
    trace(c, RayState::ORIGIN_EAST, default_max_steps(c)).expect("origin lies in every extent")
}

pub fn trace_origin_summary(c: &Configuration) -> TraceSummary {
    trace_summary(c, RayState::ORIGIN_EAST, default_max_steps(c)).expect("origin lies in every extent")
}

/// Metrics over a non-empty list of states.
pub fn trajectory_metrics(states: &[RayState], closed: bool) -> Result<TrajectoryMetrics> {
    let (first, rest) = states
        .split_first()
        .ok_or_else(|| Error::invalid("trajectory has no states"))?;
    let mut ext = Extremes::new(first.site);
    for s in rest {
        ext.add(s.site);
    }
    Ok(TrajectoryMetrics {
        linf_diameter: ext.diameter(),
        q_radius: ext.q_radius,
        closed,
    })
}

impl Trajectory {
    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            status: self.status,
            steps: self.states.len(),
            metrics: self.metrics,
            exit: self.exit,
        }
    }

    pub fn visited(&self) -> BTreeSet<Site> {
        self.states.iter().map(|s| s.site).collect()
    }

    pub fn contained_in(&self, m: u32) -> bool {
        self.metrics.q_radius <= m
    }

    pub fn contained_in_region(&self, r: &TiltedRegion) -> bool {
        self.states.iter().all(|s| r.contains_site(s.site))
    }

    /// Every step follows the street orientation of the Manhattan lattice.
    pub fn is_manhattan_consistent(&self) -> bool {
        self.states.iter().all(|s| is_manhattan_step(s.site, s.dir))
    }

    /// Each state's site is one unit step from its predecessor, in the
    /// predecessor's direction.
    pub fn is_connected(&self) -> bool {
        self.states.windows(2).all(|w| w[0].site.step(w[0].dir) == w[1].site)
    }

    /// The start state of the time-reversed ray at the last recorded site.
    pub fn reversed_start(&self) -> RayState {
        let n = self.states.len();
        if n >= 2 {
            self.states[n - 1].reversed(self.states[n - 2].dir)
        } else {
            // Only the start: the ray arrived there with its own direction,
            // possibly deflected; any pre-image works as long as it is consistent.
            self.start.reversed(self.start.dir)
        }
    }

    /// Text dump: a header with status and metrics, then one `a b dir` line
    /// per state.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "trajectory {TRAJECTORY_FORMAT_VERSION}");
        let _ = writeln!(out, "status {}", self.status.as_str());
        let _ = writeln!(out, "steps {}", self.states.len());
        let _ = writeln!(out, "linf_diameter {}", self.metrics.linf_diameter);
        let _ = writeln!(out, "q_radius {}", self.metrics.q_radius);
        let _ = writeln!(out, "start {} {} {}", self.start.site.a, self.start.site.b, self.start.dir);
        match self.exit {
            Some(e) => {
                let _ = writeln!(out, "exit {} {} {}", e.site.a, e.site.b, e.dir);
            }
            None => {
                let _ = writeln!(out, "exit -");
            }
        }
        for s in &self.states {
            let _ = writeln!(out, "{} {} {}", s.site.a, s.site.b, s.dir);
        }
        out
    }

    /// Reads the states back from a dump; only the state lines and the
    /// status header are interpreted.
    pub fn states_from_text(text: &str) -> Result<(TraceStatus, Vec<RayState>)> {
        let mut status = None;
        let mut states = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["status", s] => {
                    status = Some(match *s {
                        "closed" => TraceStatus::Closed,
                        "escaped" => TraceStatus::Escaped,
                        "budget_exceeded" => TraceStatus::BudgetExceeded,
                        other => return Err(Error::parse(i + 1, format!("unknown status {other:?}"))),
                    })
                }
                [a, b, d] if a.parse::<i32>().is_ok() => {
                    let parse = |x: &str| x.parse::<i32>().map_err(|_| Error::parse(i + 1, "bad coordinate"));
                    let dir = Direction::from_letter(d)
                        .ok_or_else(|| Error::parse(i + 1, format!("bad direction {d:?}")))?;
                    states.push(RayState::new(Site::new(parse(a)?, parse(b)?), dir));
                }
                _ => {}
            }
        }
        let status = status.ok_or_else(|| Error::parse(0, "missing status line"))?;
        Ok((status, states))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    fn single(extent: u32, sites: &[(i32, i32)]) -> Configuration {
        Configuration::from_closed_sites(extent, sites.iter().map(|&(a, b)| Site::new(a, b))).unwrap()
    }

    #[test]
    fn step_examples() {
        let c = single(3, &[(1, 0)]);
        assert_eq!(
            step(RayState::ORIGIN_EAST, &c),
            Ok(RayState::new(Site::new(1, 0), S))
        );
        let c = Configuration::all_open(3);
        assert_eq!(
            step(RayState::ORIGIN_EAST, &c),
            Ok(RayState::new(Site::new(1, 0), E))
        );
        let c = single(3, &[(1, -1)]);
        assert_eq!(
            step(RayState::new(Site::new(1, 0), S), &c),
            Ok(RayState::new(Site::new(1, -1), W))
        );
        let c = Configuration::all_open(1);
        assert_eq!(
            step(RayState::new(Site::new(1, 0), E), &c),
            Err(Escape { last: RayState::new(Site::new(1, 0), E) })
        );
    }

    #[test]
    fn all_closed_orbit() {
        let c = Configuration::all_closed(5);
        let t = trace_origin(&c);
        assert_eq!(t.status, TraceStatus::Closed);
        assert_eq!(
            t.states,
            vec![
                RayState::new(Site::new(0, 0), E),
                RayState::new(Site::new(1, 0), S),
                RayState::new(Site::new(1, -1), W),
                RayState::new(Site::new(0, -1), N),
            ]
        );
        assert_eq!(t.visited().len(), 4);
        assert_eq!(t.metrics.linf_diameter, 1);
        assert_eq!(t.metrics.q_radius, 2);
    }

    #[test]
    fn all_closed_closes_in_four_from_any_state() {
        let c = Configuration::all_closed(4);
        for a in -2..=2 {
            for b in -2..=2 {
                for d in Direction::ALL {
                    let t = trace(&c, RayState::new(Site::new(a, b), d), 100).unwrap();
                    assert_eq!(t.status, TraceStatus::Closed);
                    assert_eq!(t.states.len(), 4);
                }
            }
        }
    }

    #[test]
    fn empty_config_escapes_east() {
        let m = 9;
        let t = trace_origin(&Configuration::all_open(m));
        assert_eq!(t.status, TraceStatus::Escaped);
        assert_eq!(t.exit, Some(RayState::new(Site::new(m as i32, 0), E)));
        assert_eq!(t.states.len() as u32, m + 1);
        assert_eq!(t.metrics.linf_diameter, m);
    }

    #[test]
    fn single_mirror_turns_south() {
        let m = 6;
        let t = trace_origin(&single(m, &[(1, 0)]));
        assert_eq!(t.status, TraceStatus::Escaped);
        assert_eq!(t.exit, Some(RayState::new(Site::new(1, -(m as i32)), S)));
        assert!(t.is_connected());
    }

    #[test]
    fn budget_is_reported() {
        let c = Configuration::all_closed(3);
        let t = trace(&c, RayState::ORIGIN_EAST, 2).unwrap();
        assert_eq!(t.status, TraceStatus::BudgetExceeded);
        assert!(trace(&c, RayState::ORIGIN_EAST, 0).is_err());
        assert!(trace(&c, RayState::new(Site::new(9, 0), E), 10).is_err());
    }

    #[test]
    fn metrics_reject_empty() {
        assert!(trajectory_metrics(&[], false).is_err());
        let run: Vec<RayState> = (0..=5).map(|a| RayState::new(Site::new(a, 0), E)).collect();
        assert_eq!(trajectory_metrics(&run, false).unwrap().linf_diameter, 5);
    }

    #[test]
    fn dump_round_trip() {
        let t = trace_origin(&Configuration::all_closed(2));
        let (status, states) = Trajectory::states_from_text(&t.to_text()).unwrap();
        assert_eq!(status, TraceStatus::Closed);
        assert_eq!(states, t.states);
    }
}
