//! Pattern enhancement.
//!
//! A [`Pattern`] fixes some sites closed and some open around an anchor; one
//! of the open sites is the red site. Enhancing a configuration closes the
//! red site of every translated copy of the pattern found in it. Patterns
//! are data: they are read from files and accepted only if they pass three
//! checks:
//!
//! * translation: the red site of one copy never lands on an open site of
//!   another compatible copy, so enhancement leaves the rest of every copy
//!   untouched;
//! * essentiality: some window exists in which closing the red site creates
//!   a closed crossing that was absent before;
//! * detour: with the red site open, a ray entering it from the west or the
//!   south runs around a short loop inside the pattern and leaves the red
//!   site exactly as the mirror would have sent it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::configuration::{Configuration, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{edge_for_site, mirror_orientation, reflect, Direction, Orientation, Site, TiltedRegion, TiltedVertex};
use crate::rng::RowUniforms;
use crate::tracer::{step, RayState};

pub const PATTERN_FORMAT_VERSION: u32 = 1;

/// The pattern shipped with the repository.
pub const DEFAULT_PATTERN_TEXT: &str = include_str!("../data/default.pattern");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub name: String,
    closed: BTreeSet<Site>,
    open: BTreeSet<Site>,
    red: Site,
}

impl Pattern {
    /// `open` need not list `red`; it is added.
    pub fn new(
        name: impl Into<String>,
        closed: impl IntoIterator<Item = Site>,
        open: impl IntoIterator<Item = Site>,
        red: Site,
    ) -> Result<Self> {
        let closed: BTreeSet<Site> = closed.into_iter().collect();
        let mut open: BTreeSet<Site> = open.into_iter().collect();
        open.insert(red);
        if let Some(s) = closed.intersection(&open).next() {
            return Err(Error::invalid(format!("site {s} is required both closed and open")));
        }
        Ok(Pattern {
            name: name.into(),
            closed,
            open,
            red,
        })
    }

    pub fn default_pattern() -> Self {
        Pattern::from_text(DEFAULT_PATTERN_TEXT).expect("shipped pattern parses")
    }

    pub fn closed_sites(&self) -> &BTreeSet<Site> {
        &self.closed
    }

    pub fn open_sites(&self) -> &BTreeSet<Site> {
        &self.open
    }

    pub fn red_site(&self) -> Site {
        self.red
    }

    /// Smallest `R` with every site in `[-R, R]^2`.
    pub fn radius(&self) -> u32 {
        self.closed
            .iter()
            .chain(&self.open)
            .map(|s| s.a.unsigned_abs().max(s.b.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        self.closed.len() + self.open.len()
    }

    fn support(&self) -> impl Iterator<Item = Site> + '_ {
        self.closed.iter().chain(&self.open).copied()
    }

    /// Translates by an offset with even coordinate sum.
    pub fn translated(&self, t: (i32, i32)) -> Pattern {
        assert!((t.0 + t.1) % 2 == 0, "offset {t:?} does not preserve the tilted lattice");
        let mv = |s: &Site| s.offset(t.0, t.1);
        Pattern {
            name: self.name.clone(),
            closed: self.closed.iter().map(mv).collect(),
            open: self.open.iter().map(mv).collect(),
            red: mv(&self.red),
        }
    }

    /// The parity-preserving translate with the smallest radius; ties go to
    /// the lexicographically smallest site list.
    pub fn centered(&self) -> Pattern {
        let (mut a0, mut a1, mut b0, mut b1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for s in self.support() {
            a0 = a0.min(s.a);
            a1 = a1.max(s.a);
            b0 = b0.min(s.b);
            b1 = b1.max(s.b);
        }
        let ca = -(a0 + a1).div_euclid(2);
        let cb = -(b0 + b1).div_euclid(2);
        let mut best: Option<Pattern> = None;
        for da in -1..=1 {
            for db in -1..=1 {
                let t = (ca + da, cb + db);
                if (t.0 + t.1).rem_euclid(2) != 0 {
                    continue;
                }
                let cand = self.translated(t);
                let better = match &best {
                    None => true,
                    Some(b) => (cand.radius(), cand.sorted_sites()) < (b.radius(), b.sorted_sites()),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        best.expect("some offset has even sum")
    }

    fn sorted_sites(&self) -> Vec<(Site, u8)> {
        let mut v: Vec<(Site, u8)> = self
            .closed
            .iter()
            .map(|&s| (s, 1))
            .chain(self.open.iter().map(|&s| (s, if s == self.red { 2 } else { 0 })))
            .collect();
        v.sort();
        v
    }

    /// Whether the copy at offset `t` appears in `c` (all its sites inside the extent).
    pub fn matches_at(&self, c: &Configuration, t: (i32, i32)) -> bool {
        self.closed.iter().all(|s| c.get(s.offset(t.0, t.1)) == Some(true))
            && self.open.iter().all(|s| c.get(s.offset(t.0, t.1)) == Some(false))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pattern {PATTERN_FORMAT_VERSION}");
        let _ = writeln!(out, "name {}", self.name);
        for s in &self.closed {
            let _ = writeln!(out, "closed {} {}", s.a, s.b);
        }
        for s in self.open.iter().filter(|&&s| s != self.red) {
            let _ = writeln!(out, "open {} {}", s.a, s.b);
        }
        let _ = writeln!(out, "red {} {}", self.red.a, self.red.b);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let (n, header) = lines.next().ok_or_else(|| Error::parse(0, "empty pattern file"))?;
        let version = header
            .trim()
            .strip_prefix("pattern ")
            .ok_or_else(|| Error::parse(n + 1, "not a pattern file"))?;
        if version.trim() != PATTERN_FORMAT_VERSION.to_string() {
            return Err(Error::parse(n + 1, format!("unsupported pattern version {version:?}")));
        }
        let mut name = String::from("unnamed");
        let mut closed = Vec::new();
        let mut open = Vec::new();
        let mut red = None;
        for (i, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let site = |parts: &[&str]| -> Result<Site> {
                match parts {
                    [a, b] => Ok(Site::new(
                        a.parse().map_err(|_| Error::parse(i + 1, format!("bad coordinate {a:?}")))?,
                        b.parse().map_err(|_| Error::parse(i + 1, format!("bad coordinate {b:?}")))?,
                    )),
                    _ => Err(Error::parse(i + 1, "expected two coordinates")),
                }
            };
            match parts.split_first() {
                Some((&"name", rest)) => name = rest.join(" "),
                Some((&"closed", rest)) => closed.push(site(rest)?),
                Some((&"open", rest)) => open.push(site(rest)?),
                Some((&"red", rest)) => {
                    if red.is_some() {
                        return Err(Error::parse(i + 1, "more than one red site"));
                    }
                    red = Some(site(rest)?);
                }
                _ => return Err(Error::parse(i + 1, format!("unrecognised line {line:?}"))),
            }
        }
        let red = red.ok_or_else(|| Error::parse(0, "pattern has no red site"))?;
        Pattern::new(name, closed, open, red).map_err(|e| Error::parse(0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Pattern::from_text(&std::fs::read_to_string(path)?)
    }

    /// Loads and runs all three checks; fails unless every check passes.
    pub fn load_validated(path: impl AsRef<Path>) -> Result<(Self, PatternReport)> {
        let g = Pattern::load(path)?;
        let report = check_pattern(&g, &EssentialSearch::default());
        if !report.is_valid() {
            return Err(Error::invalid(format!("pattern {:?} failed validation: {}", g.name, report.summary())));
        }
        Ok((g, report))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

/// Offsets (even coordinate sum) at which a copy of the pattern appears.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchSet {
    pub offsets: Vec<(i32, i32)>,
}

impl MatchSet {
    /// Red sites of all matched copies.
    pub fn red_sites(&self, g: &Pattern) -> Vec<Site> {
        self.offsets.iter().map(|t| g.red.offset(t.0, t.1)).collect()
    }
}

/// Every parity-valid offset whose translated copy lies fully inside the
/// extent and appears in `c`. With `excluded_core = Some(k)`, copies whose
/// red edge is inside `Q_k` are dropped.
pub fn match_pattern(c: &Configuration, g: &Pattern, excluded_core: Option<u32>) -> MatchSet {
    let m = c.extent() as i32;
    let (mut a0, mut a1, mut b0, mut b1) = (0, 0, 0, 0);
    for s in g.support() {
        a0 = a0.min(s.a);
        a1 = a1.max(s.a);
        b0 = b0.min(s.b);
        b1 = b1.max(s.b);
    }
    let core = excluded_core.map(TiltedRegion::q);
    // Closed requirements first: they reject quickly at small p.
    let closed: Vec<Site> = g.closed.iter().copied().collect();
    let open: Vec<Site> = g.open.iter().copied().collect();
    let mut offsets = Vec::new();
    for tb in (-m - b0)..=(m - b1) {
        for ta in (-m - a0)..=(m - a1) {
            if (ta + tb).rem_euclid(2) != 0 {
                continue;
            }
            let hit = closed.iter().all(|s| c.is_closed(s.offset(ta, tb)))
                && open.iter().all(|s| !c.is_closed(s.offset(ta, tb)));
            if !hit {
                continue;
            }
            if let Some(q) = &core {
                if q.contains_edge(g.red.offset(ta, tb)) {
                    continue;
                }
            }
            offsets.push((ta, tb));
        }
    }
    offsets.sort();
    MatchSet { offsets }
}

/// Closes the red site of every match, all matches found on the input.
pub fn enhance(c: &Configuration, g: &Pattern, excluded_core: Option<u32>) -> Configuration {
    enhance_with_matches(c, g, excluded_core).0
}

pub fn enhance_with_matches(c: &Configuration, g: &Pattern, excluded_core: Option<u32>) -> (Configuration, MatchSet) {
    let matches = match_pattern(c, g, excluded_core);
    let mut out = c.clone();
    for s in matches.red_sites(g) {
        out.set_raw(s);
    }
    (out.with_provenance(Provenance::Enhanced), matches)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationReport {
    pub ok: bool,
    pub counterexample: Option<(i32, i32)>,
    pub offsets_checked: usize,
}

/// Exhaustive check over all overlapping, jointly satisfiable copies that
/// neither copy's red site is an open site of the other.
pub fn check_translation_lemma(g: &Pattern) -> TranslationReport {
    let r = 2 * g.radius() as i32;
    let mut checked = 0;
    for ta in -r..=r {
        for tb in -r..=r {
            if (ta, tb) == (0, 0) || (ta + tb).rem_euclid(2) != 0 {
                continue;
            }
            let conflict = g.closed.iter().any(|s| {
                g.open.contains(&s.offset(-ta, -tb)) || g.open.contains(&s.offset(ta, tb))
            });
            if conflict {
                continue;
            }
            checked += 1;
            if g.open.contains(&g.red.offset(ta, tb)) || g.open.contains(&g.red.offset(-ta, -tb)) {
                return TranslationReport {
                    ok: false,
                    counterexample: Some((ta, tb)),
                    offsets_checked: checked,
                };
            }
        }
    }
    TranslationReport {
        ok: true,
        counterexample: None,
        offsets_checked: checked,
    }
}

/// Which pair of window sides a crossing joins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingAxis {
    /// West side to east side.
    Horizontal,
    /// South side to north side.
    Vertical,
}

/// Whether closed edges of `c` join the two opposite sides of its window.
pub fn window_crossing(c: &Configuration, axis: CrossingAxis) -> bool {
    let m = c.extent() as i32;
    let coord = |v: TiltedVertex| match axis {
        CrossingAxis::Horizontal => v.i,
        CrossingAxis::Vertical => v.j,
    };
    // Vertices incident to sites of the first / last column (row).
    let on_low = |v: TiltedVertex| coord(v) <= -m;
    let on_high = |v: TiltedVertex| coord(v) >= m - 1;
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for s in c.closed_sites() {
        let (v, w) = edge_for_site(s);
        for x in [v, w] {
            if on_low(x) && seen.insert(x) {
                queue.push_back(x);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        if on_high(v) {
            return true;
        }
        for (w, s) in v.neighbors() {
            if c.get(s) == Some(true) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}

/// Settings for the essentiality witness search.
#[derive(Clone, Debug)]
pub struct EssentialSearch {
    /// Window radius; at least `2R + 4`. `None` uses `2R + 6`.
    pub window: Option<u32>,
    /// Random trials after the constructive attempts.
    pub trials: u32,
    pub seed: u64,
}

impl Default for EssentialSearch {
    fn default() -> Self {
        EssentialSearch {
            window: None,
            trials: 2000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EssentialReport {
    pub window: u32,
    pub witness: Option<Configuration>,
    pub axis: Option<CrossingAxis>,
    /// `"constructive"` or `"random trial k"`.
    pub found_by: Option<String>,
    pub trials_used: u32,
}

fn planted_window(g: &Pattern, w: u32) -> Configuration {
    let mut c = Configuration::all_open(w);
    for &s in &g.closed {
        c.set(s, true);
    }
    c
}

fn is_essential_witness(c: &Configuration, g: &Pattern) -> Option<CrossingAxis> {
    if !g.matches_at(c, (0, 0)) {
        return None;
    }
    let enhanced = enhance(c, g, None);
    [CrossingAxis::Horizontal, CrossingAxis::Vertical]
        .into_iter()
        .find(|&axis| !window_crossing(c, axis) && window_crossing(&enhanced, axis))
}

/// Shortest path of free sites from `from` to a vertex satisfying `goal`,
/// avoiding `blocked` vertices. Free sites are those the pattern does not
/// require open.
fn free_path(
    g: &Pattern,
    w: u32,
    from: TiltedVertex,
    goal: impl Fn(TiltedVertex) -> bool,
    blocked: &BTreeSet<TiltedVertex>,
) -> Option<Vec<Site>> {
    let m = w as i32;
    let mut parent: BTreeMap<TiltedVertex, (TiltedVertex, Site)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(v) = queue.pop_front() {
        if goal(v) {
            let mut sites = Vec::new();
            let mut cur = v;
            while let Some(&(p, s)) = parent.get(&cur) {
                sites.push(s);
                cur = p;
            }
            return Some(sites);
        }
        for (x, s) in v.neighbors() {
            if s.a.abs() > m || s.b.abs() > m || g.open.contains(&s) || blocked.contains(&x) {
                continue;
            }
            if seen.insert(x) {
                parent.insert(x, (v, s));
                queue.push_back(x);
            }
        }
    }
    None
}

/// Searches for a window with a planted copy at the centre in which the
/// red edge is pivotal for a side-to-side closed crossing. Absence of a
/// witness is inconclusive.
pub fn check_essential(g: &Pattern, search: &EssentialSearch) -> Result<EssentialReport> {
    let min_w = 2 * g.radius() + 4;
    let w = search.window.unwrap_or(2 * g.radius() + 6);
    if w < min_w {
        return Err(Error::invalid(format!("window {w} smaller than 2R + 4 = {min_w}")));
    }
    let m = w as i32;
    let base = planted_window(g, w);
    let (v1, v2) = edge_for_site(g.red);

    // Constructive attempts: join one red endpoint to one side and the
    // other endpoint to the opposite side.
    for axis in [CrossingAxis::Horizontal, CrossingAxis::Vertical] {
        let coord = move |v: TiltedVertex| match axis {
            CrossingAxis::Horizontal => v.i,
            CrossingAxis::Vertical => v.j,
        };
        let low = move |v: TiltedVertex| coord(v) <= -m;
        let high = move |v: TiltedVertex| coord(v) >= m - 1;
        for (p, q) in [(v1, v2), (v2, v1)] {
            let Some(first) = free_path(g, w, p, low, &BTreeSet::from([q])) else {
                continue;
            };
            let mut trial = base.clone();
            for &s in &first {
                trial.set(s, true);
            }
            // Keep the second arm away from everything already attached to p.
            let blocked = component(&trial, p);
            if blocked.contains(&q) {
                continue;
            }
            let Some(second) = free_path(g, w, q, high, &blocked) else {
                continue;
            };
            for &s in &second {
                trial.set(s, true);
            }
            if let Some(axis) = is_essential_witness(&trial, g) {
                return Ok(EssentialReport {
                    window: w,
                    witness: Some(trial),
                    axis: Some(axis),
                    found_by: Some("constructive".into()),
                    trials_used: 0,
                });
            }
        }
    }

    // Random fill of the free sites.
    let levels = [0.5, 0.45, 0.55, 0.4, 0.6];
    for k in 0..search.trials {
        let p = levels[k as usize % levels.len()];
        let mut trial = base.clone();
        for b in -m..=m {
            let mut gen = RowUniforms::new(search.seed, k, b, -m);
            for a in -m..=m {
                let u = gen.next_uniform();
                let s = Site::new(a, b);
                if u < p && !g.open.contains(&s) {
                    trial.set(s, true);
                }
            }
        }
        if let Some(axis) = is_essential_witness(&trial, g) {
            return Ok(EssentialReport {
                window: w,
                witness: Some(trial),
                axis: Some(axis),
                found_by: Some(format!("random trial {k}")),
                trials_used: k + 1,
            });
        }
    }
    Ok(EssentialReport {
        window: w,
        witness: None,
        axis: None,
        found_by: None,
        trials_used: search.trials,
    })
}

fn component(c: &Configuration, from: TiltedVertex) -> BTreeSet<TiltedVertex> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for (w, s) in v.neighbors() {
            if c.get(s) == Some(true) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen
}

#[derive(Clone, Debug)]
pub struct DetourReport {
    /// Direction of travel when the ray reaches the red site.
    pub entry: Direction,
    pub ok: bool,
    /// Outgoing direction at the second visit to the red site.
    pub exit_dir: Option<Direction>,
    /// Largest l-infinity distance from the red site along the loop.
    pub radius: u32,
    /// Loop sites the pattern leaves unspecified; a copy embedded in a
    /// larger configuration would not control them.
    pub uncovered: Vec<Site>,
    pub trace: Vec<RayState>,
    pub failure: Option<String>,
}

/// Largest detour radius the harness accepts.
pub const MAX_DETOUR_RADIUS: u32 = 5;

/// Traces the ray that reaches the open red site travelling `entry`, on a
/// window holding exactly the pattern's closed sites.
pub fn trace_detour(g: &Pattern, entry: Direction) -> DetourReport {
    let window = (4 * g.radius()).max(g.radius() + 2);
    let c = planted_window(g, window);
    let expected = reflect(entry, mirror_orientation(g.red));
    let mut report = DetourReport {
        entry,
        ok: false,
        exit_dir: None,
        radius: 0,
        uncovered: Vec::new(),
        trace: Vec::new(),
        failure: None,
    };
    let (da, db) = entry.unit();
    let mut cur = RayState::new(g.red.offset(-da, -db), entry);
    let budget = 16 * (2 * window as usize + 1).pow(2);
    let mut visits = 0;
    for _ in 0..budget {
        match step(cur, &c) {
            Err(_) => {
                report.failure = Some(format!("ray left the window after {} steps", report.trace.len()));
                return report;
            }
            Ok(next) => {
                cur = next;
                report.trace.push(cur);
                report.radius = report.radius.max(cur.site.linf_distance(g.red));
                if cur.site != g.red && !g.closed.contains(&cur.site) && !g.open.contains(&cur.site) {
                    report.uncovered.push(cur.site);
                }
                if cur.site == g.red {
                    visits += 1;
                    if visits == 2 {
                        report.exit_dir = Some(cur.dir);
                        report.uncovered.sort();
                        report.uncovered.dedup();
                        if cur.dir != expected {
                            report.failure = Some(format!("returned leaving {} instead of {expected}", cur.dir));
                        } else if report.radius > MAX_DETOUR_RADIUS {
                            report.failure = Some(format!("detour radius {} exceeds {MAX_DETOUR_RADIUS}", report.radius));
                        } else if !report.uncovered.is_empty() {
                            report.failure = Some(format!("detour uses unspecified sites {:?}", report.uncovered));
                        } else {
                            report.ok = true;
                        }
                        return report;
                    }
                }
            }
        }
    }
    report.failure = Some("never returned to the red site".into());
    report
}

/// Detour check for entries from the west (travelling east) and from the
/// south (travelling north).
pub fn check_detour(g: &Pattern) -> [DetourReport; 2] {
    [trace_detour(g, Direction::E), trace_detour(g, Direction::N)]
}

#[derive(Clone, Debug)]
pub struct PatternReport {
    pub translation: TranslationReport,
    pub essential: EssentialReport,
    pub detour: [DetourReport; 2],
    /// Entries from the east and the north, recorded for inspection only.
    pub diagnostics: [DetourReport; 2],
}

impl PatternReport {
    pub fn detour_ok(&self) -> bool {
        self.detour.iter().all(|d| d.ok)
    }

    pub fn is_valid(&self) -> bool {
        self.translation.ok && self.essential.witness.is_some() && self.detour_ok()
    }

    /// The detour radius `D` the harness uses (largest over both entries).
    pub fn detour_radius(&self) -> u32 {
        self.detour.iter().map(|d| d.radius).max().unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = write!(
            out,
            "translation={} ({} offsets{}) ",
            if self.translation.ok { "pass" } else { "fail" },
            self.translation.offsets_checked,
            self.translation
                .counterexample
                .map(|t| format!(", counterexample {t:?}"))
                .unwrap_or_default()
        );
        let _ = write!(
            out,
            "essential={} ",
            match (&self.essential.witness, &self.essential.found_by) {
                (Some(_), Some(how)) => format!("witness ({how})"),
                _ => format!("not-found after {} trials", self.essential.trials_used),
            }
        );
        for d in &self.detour {
            let _ = write!(
                out,
                "detour[{}]={} (D={}{}) ",
                d.entry,
                if d.ok { "pass" } else { "fail" },
                d.radius,
                d.failure.as_ref().map(|f| format!(", {f}")).unwrap_or_default()
            );
        }
        out.trim_end().to_string()
    }
}

pub fn check_pattern(g: &Pattern, search: &EssentialSearch) -> PatternReport {
    // An undersized window only arises from an explicit override; report it
    // as no witness found.
    let essential = match check_essential(g, search) {
        Ok(r) => r,
        Err(_) => EssentialReport {
            window: search.window.unwrap_or(0),
            witness: None,
            axis: None,
            found_by: None,
            trials_used: 0,
        },
    };
    PatternReport {
        translation: check_translation_lemma(g),
        essential,
        detour: check_detour(g),
        diagnostics: [trace_detour(g, Direction::W), trace_detour(g, Direction::S)],
    }
}

/// Largest search radius accepted by [`search_patterns`].
pub const MAX_SEARCH_RADIUS: u32 = 4;
/// Largest number of closed sites in a searched pattern.
pub const MAX_SEARCH_CLOSED: usize = 12;

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Valid patterns, smallest first.
    pub patterns: Vec<Pattern>,
    /// True if the budget ran out before the search space was exhausted.
    pub budget_exhausted: bool,
    pub nodes_used: u64,
}

struct DetourSearch<'a> {
    r_max: i32,
    budget: u64,
    nodes: u64,
    red: Site,
    assigned: BTreeMap<Site, bool>,
    closed_count: usize,
    found: &'a mut Vec<BTreeMap<Site, bool>>,
}

impl DetourSearch<'_> {
    fn run(&mut self, cur: RayState) {
        let target = reflect(Direction::E, Orientation::NW);
        let mut cur = cur;
        let mut trail = Vec::new();
        loop {
            if self.nodes >= self.budget {
                break;
            }
            self.nodes += 1;
            let next = cur.site.step(cur.dir);
            if next.a.abs() > self.r_max || next.b.abs() > self.r_max {
                break;
            }
            if next == self.red {
                if cur.dir == target {
                    self.found.push(self.assigned.clone());
                }
                break;
            }
            match self.assigned.get(&next) {
                Some(&closed) => {
                    let dir = if closed { reflect(cur.dir, mirror_orientation(next)) } else { cur.dir };
                    cur = RayState::new(next, dir);
                }
                None => {
                    // Branch: open first, then closed.
                    self.assigned.insert(next, false);
                    self.run(RayState::new(next, cur.dir));
                    if self.closed_count < MAX_SEARCH_CLOSED {
                        self.assigned.insert(next, true);
                        self.closed_count += 1;
                        self.run(RayState::new(next, reflect(cur.dir, mirror_orientation(next))));
                        self.closed_count -= 1;
                    }
                    self.assigned.remove(&next);
                    break;
                }
            }
            trail.push(next);
        }
    }
}

/// Enumerates patterns whose red site carries a `\` mirror and whose
/// detour loop fits in `[-r_max, r_max]^2`, keeping those that pass all
/// three checks. `budget` bounds the number of ray steps explored.
pub fn search_patterns(r_max: u32, budget: u64, essential: &EssentialSearch) -> Result<SearchOutcome> {
    if r_max > MAX_SEARCH_RADIUS {
        return Err(Error::invalid(format!("search radius {r_max} exceeds {MAX_SEARCH_RADIUS}")));
    }
    let mut outcome = SearchOutcome {
        patterns: Vec::new(),
        budget_exhausted: false,
        nodes_used: 0,
    };
    if budget == 0 {
        outcome.budget_exhausted = true;
        return Ok(outcome);
    }
    let r = r_max as i32;
    let mut reds: Vec<Site> = (-r..=r)
        .flat_map(|a| (-r..=r).map(move |b| Site::new(a, b)))
        .filter(|&s| mirror_orientation(s) == Orientation::NW)
        .collect();
    reds.sort_by_key(|s| (s.a.abs().max(s.b.abs()), *s));

    let mut seen = BTreeSet::new();
    let mut nodes = 0;
    for red in reds {
        let mut found = Vec::new();
        let mut search = DetourSearch {
            r_max: r,
            budget: budget - nodes,
            nodes: 0,
            red,
            assigned: BTreeMap::from([(red, false)]),
            closed_count: 0,
            found: &mut found,
        };
        search.run(RayState::new(red, Direction::E));
        nodes += search.nodes;
        for assignment in found {
            let closed = assignment.iter().filter(|(_, &c)| c).map(|(&s, _)| s);
            let open = assignment.iter().filter(|(_, &c)| !c).map(|(&s, _)| s);
            let g = Pattern::new("", closed, open, red)?.centered();
            let key = g.sorted_sites();
            if !seen.insert(key) {
                continue;
            }
            let report = check_pattern(&g, essential);
            if report.is_valid() {
                outcome.patterns.push(g);
            }
        }
        if nodes >= budget {
            outcome.budget_exhausted = true;
            break;
        }
    }
    outcome.nodes_used = nodes;
    outcome.patterns.sort_by_key(|g| (g.size(), g.closed.len(), g.radius(), g.sorted_sites()));
    for (k, g) in outcome.patterns.iter_mut().enumerate() {
        g.name = format!("search-r{r_max}-{k}");
    }
    Ok(outcome)
}
