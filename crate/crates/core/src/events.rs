//! Detectors for closed-path events on the tilted lattice.
//!
//! All detectors are closed-increasing: adding a mirror never turns a
//! positive answer negative.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{site_between, RegionKind, Site, TiltedRegion, TiltedVertex};

/// Adjacency of tilted vertices through closed edges.
#[derive(Clone, Copy)]
pub struct ClosedGraphView<'a> {
    config: &'a Configuration,
}

impl<'a> ClosedGraphView<'a> {
    pub fn new(config: &'a Configuration) -> Self {
        ClosedGraphView { config }
    }

    /// Sites outside the configuration count as open.
    #[inline]
    pub fn is_closed_edge(&self, s: Site) -> bool {
        self.config.get(s).unwrap_or(false)
    }

    /// Neighbours through closed edges, in lexicographic order.
    pub fn neighbors(&self, v: TiltedVertex) -> impl Iterator<Item = TiltedVertex> + '_ {
        v.neighbors()
            .into_iter()
            .filter(|&(_, s)| self.is_closed_edge(s))
            .map(|(w, _)| w)
    }

    pub fn adjacent(&self, v: TiltedVertex, w: TiltedVertex) -> bool {
        site_between(v, w).is_some_and(|s| self.is_closed_edge(s))
    }
}

pub const WITNESS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Consecutive vertices are joined by closed edges.
    Path(Vec<TiltedVertex>),
    /// A closed walk, listed without repeating the first vertex.
    Circuit(Vec<TiltedVertex>),
}

impl Witness {
    pub fn vertices(&self) -> &[TiltedVertex] {
        match self {
            Witness::Path(v) | Witness::Circuit(v) => v,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Witness::Path(_) => "path",
            Witness::Circuit(_) => "circuit",
        }
    }

    /// Every consecutive pair (and the closing pair of a circuit) is a
    /// closed edge of `c`.
    pub fn is_valid_in(&self, c: &Configuration) -> bool {
        let view = ClosedGraphView::new(c);
        let v = self.vertices();
        if v.is_empty() {
            return false;
        }
        let ok = v.windows(2).all(|w| view.adjacent(w[0], w[1]));
        match self {
            Witness::Path(_) => ok,
            Witness::Circuit(_) => ok && v.len() >= 4 && view.adjacent(v[v.len() - 1], v[0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventResult {
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl EventResult {
    fn no() -> Self {
        EventResult {
            holds: false,
            witness: None,
        }
    }

    fn yes(w: Witness) -> Self {
        EventResult {
            holds: true,
            witness: Some(w),
        }
    }

    /// Text dump: a header naming the event, then one `u v` line per vertex.
    pub fn to_text(&self, event: &str, n: u32) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "witness {WITNESS_FORMAT_VERSION}");
        let _ = writeln!(out, "event {event}");
        let _ = writeln!(out, "n {n}");
        let _ = writeln!(out, "holds {}", self.holds);
        match &self.witness {
            None => {
                let _ = writeln!(out, "kind none");
            }
            Some(w) => {
                let _ = writeln!(out, "kind {}", w.kind());
                let _ = writeln!(out, "length {}", w.vertices().len());
                for v in w.vertices() {
                    let _ = writeln!(out, "{v}");
                }
            }
        }
        out
    }

    /// Reads the witness vertices of a dump.
    pub fn witness_from_text(text: &str) -> Result<Option<Witness>> {
        let mut kind = None;
        let mut verts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["kind", k] => kind = Some(k.to_string()),
                [u, v] if u.parse::<f64>().is_ok() => {
                    let u: f64 = u.parse().map_err(|_| Error::parse(i + 1, "bad u"))?;
                    let v: f64 = v.parse().map_err(|_| Error::parse(i + 1, "bad v"))?;
                    let (x, y) = (u - 0.5, v - 0.5);
                    if x.fract() != 0.0 || y.fract() != 0.0 {
                        return Err(Error::parse(i + 1, format!("({u}, {v}) is not a tilted vertex")));
                    }
                    let vert = TiltedVertex::try_new(x as i32, y as i32)
                        .ok_or_else(|| Error::parse(i + 1, format!("({u}, {v}) is not a tilted vertex")))?;
                    verts.push(vert);
                }
                _ => {}
            }
        }
        match kind.as_deref() {
            Some("path") => Ok(Some(Witness::Path(verts))),
            Some("circuit") => Ok(Some(Witness::Circuit(verts))),
            Some("none") | None => Ok(None),
            Some(other) => Err(Error::parse(0, format!("unknown witness kind {other:?}"))),
        }
    }
}

fn require_extent(c: &Configuration, region: TiltedRegion, what: &str) -> Result<()> {
    let need = region.required_extent();
    if c.extent() < need {
        return Err(Error::invalid(format!(
            "{what} needs extent >= {need}, configuration has {}",
            c.extent()
        )));
    }
    Ok(())
}

/// Dense index over a rotated box of vertices.
struct VertexIndex {
    s_min: i64,
    d_min: i64,
    width: usize,
    len: usize,
}

impl VertexIndex {
    fn new(s_min: i64, s_max: i64, d_min: i64, d_max: i64) -> Self {
        let width = (d_max - d_min + 1).max(0) as usize;
        let height = (s_max - s_min + 1).max(0) as usize;
        VertexIndex {
            s_min,
            d_min,
            width,
            len: width * height,
        }
    }

    fn around_origin(r: i64) -> Self {
        Self::new(-r, r, -r, r)
    }

    #[inline]
    fn get(&self, v: TiltedVertex) -> usize {
        let (s, d) = v.rotated();
        (s - self.s_min) as usize * self.width + (d - self.d_min) as usize
    }
}

fn reconstruct(parent: &[u32], idx: &VertexIndex, verts: &[TiltedVertex], end: usize) -> Vec<TiltedVertex> {
    let _ = idx;
    let mut path = vec![verts[end]];
    let mut cur = end;
    while parent[cur] != u32::MAX {
        cur = parent[cur] as usize;
        path.push(verts[cur]);
    }
    path.reverse();
    path
}

/// Event `A_n`: a closed path from `(1/2, 1/2)` to a vertex outside `Q_n`.
pub fn radial_closed_path(c: &Configuration, n: u32) -> Result<EventResult> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let q = TiltedRegion::q(n);
    require_extent(c, q, "radial path")?;
    let view = ClosedGraphView::new(c);
    let idx = VertexIndex::around_origin(n as i64 + 2);
    let mut parent = vec![u32::MAX; idx.len];
    let mut seen = vec![false; idx.len];
    let mut verts = vec![TiltedVertex::CENTER; idx.len];
    let start = TiltedVertex::CENTER;
    let si = idx.get(start);
    seen[si] = true;
    verts[si] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let vi = idx.get(v);
        for w in view.neighbors(v) {
            let wi = idx.get(w);
            if seen[wi] {
                continue;
            }
            seen[wi] = true;
            parent[wi] = vi as u32;
            verts[wi] = w;
            if !q.contains_vertex(w) {
                return Ok(EventResult::yes(Witness::Path(reconstruct(&parent, &idx, &verts, wi))));
            }
            queue.push_back(w);
        }
    }
    Ok(EventResult::no())
}

/// The two sides a crossing of `kind` must join: `(along_s, low, high)`.
/// For `along_s == false` the sides are `d = low` and `d = high`.
fn crossing_sides(region: &TiltedRegion) -> (bool, i64, i64) {
    let b = region.rotated_box();
    match region.kind {
        RegionKind::T | RegionKind::T1 | RegionKind::T2 => (false, b.d_min, b.d_max),
        RegionKind::T3 | RegionKind::T4 => (true, b.s_min, b.s_max),
        RegionKind::Q => (false, b.d_min, b.d_max),
    }
}

/// Long-direction crossing of one of the tilted rectangles by a closed path
/// staying inside it. `which` must be a rectangle kind.
pub fn rect_crossing(c: &Configuration, n: u32, which: RegionKind) -> Result<EventResult> {
    if which == RegionKind::Q {
        return Err(Error::invalid("rect_crossing takes a rectangle, not Q"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let region = TiltedRegion::new(which, n);
    require_extent(c, region, "rectangle crossing")?;
    let view = ClosedGraphView::new(c);
    let b = region.rotated_box();
    let idx = VertexIndex::new(b.s_min, b.s_max, b.d_min, b.d_max);
    let (along_s, low, high) = crossing_sides(&region);
    let coord = |v: TiltedVertex| {
        let (s, d) = v.rotated();
        if along_s {
            s
        } else {
            d
        }
    };

    let mut parent = vec![u32::MAX; idx.len];
    let mut seen = vec![false; idx.len];
    let mut verts = vec![TiltedVertex::CENTER; idx.len];
    let mut queue = VecDeque::new();
    for v in region.vertices() {
        if coord(v) == low {
            let vi = idx.get(v);
            seen[vi] = true;
            verts[vi] = v;
            if coord(v) == high {
                return Ok(EventResult::yes(Witness::Path(vec![v])));
            }
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        let vi = idx.get(v);
        for w in view.neighbors(v) {
            if !region.contains_vertex(w) {
                continue;
            }
            let wi = idx.get(w);
            if seen[wi] {
                continue;
            }
            seen[wi] = true;
            parent[wi] = vi as u32;
            verts[wi] = w;
            if coord(w) == high {
                return Ok(EventResult::yes(Witness::Path(reconstruct(&parent, &idx, &verts, wi))));
            }
            queue.push_back(w);
        }
    }
    Ok(EventResult::no())
}

/// Whether a vertex lies in the annulus `Q_{2n} \ Q_n`.
#[inline]
fn in_annulus(v: TiltedVertex, n: u32) -> bool {
    let r = v.q_radius();
    r > n && r <= 2 * n
}

/// Signed crossing of the cut `{(x, 1) : x > 1/2}` when moving from `v` to
/// an adjacent `w`. Together with the segment from `(1/2, 1/2)` to
/// `(1/2, 1)`, which no annulus edge meets, the cut joins the centre to
/// infinity without touching a vertex.
#[inline]
pub fn cut_crossing(v: TiltedVertex, w: TiltedVertex) -> i32 {
    let s = match site_between(v, w) {
        Some(s) => s,
        None => return 0,
    };
    if s.b != 1 || s.a < 1 {
        return 0;
    }
    if w.j > v.j {
        1
    } else {
        -1
    }
}

/// Winding number about `(1/2, 1/2)` of a closed walk (first vertex not
/// repeated at the end).
pub fn winding_number(cycle: &[TiltedVertex]) -> i32 {
    if cycle.len() < 2 {
        return 0;
    }
    let mut total = 0;
    for k in 0..cycle.len() {
        total += cut_crossing(cycle[k], cycle[(k + 1) % cycle.len()]);
    }
    total
}

/// Event `A''_n`: the closed edges with both ends in `Q_{2n} \ Q_n` contain a
/// circuit winding once around `(1/2, 1/2)`.
///
/// Breadth-first search labels every annulus vertex with the signed cut
/// crossings along its tree path. An edge whose endpoints' labels disagree
/// with its own crossing closes a cycle of nonzero winding; the tree paths
/// from the edge ends back to their common ancestor form a simple circuit.
pub fn surrounding_circuit_exact(c: &Configuration, n: u32) -> Result<EventResult> {
    if n < 2 {
        return Err(Error::invalid("surrounding circuit needs n >= 2"));
    }
    let outer = TiltedRegion::q(2 * n);
    require_extent(c, outer, "surrounding circuit")?;
    let view = ClosedGraphView::new(c);
    let r = 2 * n as i64;
    let idx = VertexIndex::around_origin(r);
    let mut label = vec![i32::MIN; idx.len];
    let mut parent = vec![u32::MAX; idx.len];
    let mut depth = vec![0u32; idx.len];
    let mut verts = vec![TiltedVertex::CENTER; idx.len];
    let mut queue = VecDeque::new();

    for root in outer.vertices() {
        if !in_annulus(root, n) {
            continue;
        }
        let ri = idx.get(root);
        if label[ri] != i32::MIN {
            continue;
        }
        label[ri] = 0;
        verts[ri] = root;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let vi = idx.get(v);
            for w in view.neighbors(v) {
                if !in_annulus(w, n) {
                    continue;
                }
                let wi = idx.get(w);
                let expected = label[vi] + cut_crossing(v, w);
                if label[wi] == i32::MIN {
                    label[wi] = expected;
                    parent[wi] = vi as u32;
                    depth[wi] = depth[vi] + 1;
                    verts[wi] = w;
                    queue.push_back(w);
                } else if label[wi] != expected {
                    let circuit = tree_cycle(vi, wi, &parent, &depth, &verts);
                    return Ok(EventResult::yes(Witness::Circuit(circuit)));
                }
            }
        }
    }
    Ok(EventResult::no())
}

/// The cycle formed by tree paths from `u` and `w` to their lowest common
/// ancestor plus the edge `u -> w`, listed starting at the ancestor.
fn tree_cycle(u: usize, w: usize, parent: &[u32], depth: &[u32], verts: &[TiltedVertex]) -> Vec<TiltedVertex> {
    let mut left = vec![u];
    let mut right = vec![w];
    let (mut a, mut b) = (u, w);
    while depth[a] > depth[b] {
        a = parent[a] as usize;
        left.push(a);
    }
    while depth[b] > depth[a] {
        b = parent[b] as usize;
        right.push(b);
    }
    while a != b {
        a = parent[a] as usize;
        b = parent[b] as usize;
        left.push(a);
        right.push(b);
    }
    // left: u .. lca, right: w .. lca
    right.pop();
    let mut cycle: Vec<TiltedVertex> = left.iter().rev().map(|&k| verts[k]).collect();
    cycle.extend(right.iter().map(|&k| verts[k]));
    cycle
}

/// The sufficient condition used for `A''_n`: all four rectangles
/// `T^(1)..T^(4)` crossed in the long direction.
pub fn surrounding_circuit_4rect(c: &Configuration, n: u32) -> Result<EventResult> {
    require_extent(c, TiltedRegion::q(2 * n), "four-rectangle circuit")?;
    let mut paths = Vec::new();
    for kind in [RegionKind::T1, RegionKind::T3, RegionKind::T2, RegionKind::T4] {
        let r = rect_crossing(c, n, kind)?;
        if !r.holds {
            return Ok(EventResult::no());
        }
        paths.push(r.witness);
    }
    // The union of the four crossings contains a surrounding circuit; the
    // exact detector extracts one.
    let exact = surrounding_circuit_exact(c, n)?;
    debug_assert!(exact.holds);
    Ok(EventResult {
        holds: true,
        witness: exact.witness,
    })
}

/// A face of the tilted lattice, `(i + 1/2, j + 1/2)` with `i - j` odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualVertex {
    pub i: i32,
    pub j: i32,
}

impl DualVertex {
    fn q_radius(self) -> u32 {
        let (i, j) = (self.i as i64, self.j as i64);
        (i + j).unsigned_abs().max((i - j).unsigned_abs()) as u32
    }

    fn neighbors(self) -> [(DualVertex, Site); 4] {
        let DualVertex { i, j } = self;
        [
            (DualVertex { i: i - 1, j: j - 1 }, Site::new(i, j)),
            (DualVertex { i: i - 1, j: j + 1 }, Site::new(i, j + 1)),
            (DualVertex { i: i + 1, j: j - 1 }, Site::new(i + 1, j)),
            (DualVertex { i: i + 1, j: j + 1 }, Site::new(i + 1, j + 1)),
        ]
    }

    pub fn coords(self) -> (f64, f64) {
        (self.i as f64 + 0.5, self.j as f64 + 0.5)
    }
}

/// A path of faces from next to `(1/2, 1/2)` to outside `Q_{2n}`, crossing only
/// edges that are not closed annulus edges. `None` when no such path exists.
pub fn open_dual_path(c: &Configuration, n: u32) -> Result<Option<Vec<DualVertex>>> {
    if n < 2 {
        return Err(Error::invalid("dual check needs n >= 2"));
    }
    require_extent(c, TiltedRegion::q(2 * n), "dual check")?;
    let view = ClosedGraphView::new(c);
    let r = 2 * n as i64 + 2;
    let width = (2 * r + 1) as usize;
    let key = |f: DualVertex| (f.i as i64 + r) as usize * width + (f.j as i64 + r) as usize;
    let mut parent: Vec<Option<DualVertex>> = vec![None; width * width];
    let mut seen = vec![false; width * width];
    let start = DualVertex { i: 1, j: 0 };
    seen[key(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        for (g, s) in f.neighbors() {
            if seen[key(g)] {
                continue;
            }
            let (v, w) = crate::geometry::edge_for_site(s);
            let blocked = in_annulus(v, n) && in_annulus(w, n) && view.is_closed_edge(s);
            if blocked {
                continue;
            }
            seen[key(g)] = true;
            parent[key(g)] = Some(f);
            if g.q_radius() > 2 * n {
                let mut path = vec![g];
                let mut cur = g;
                while let Some(p) = parent[key(cur)] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Ok(Some(path));
            }
            queue.push_back(g);
        }
    }
    Ok(None)
}

/// Planar-duality counterpart of [`surrounding_circuit_exact`]: true iff no
/// open dual path escapes the annulus.
pub fn dual_crosscheck(c: &Configuration, n: u32) -> Result<bool> {
    Ok(open_dual_path(c, n)?.is_none())
}

/// Closed sites of the diamond contour `max(|x + y - 1|, |x - y|) = m`
/// (`m` even and positive).
pub fn diamond_ring(m: u32) -> Vec<Site> {
    assert!(m >= 2 && m.is_multiple_of(2), "ring radius must be even and positive");
    let m = m as i64;
    let mut sites = Vec::new();
    let mut step = |s1: i64, d1: i64, s2: i64, d2: i64| {
        let v = TiltedVertex::from_rotated(s1, d1).unwrap();
        let w = TiltedVertex::from_rotated(s2, d2).unwrap();
        sites.push(site_between(v, w).unwrap());
    };
    let mut t = -m;
    while t < m {
        step(m, t, m, t + 2);
        step(-m, t, -m, t + 2);
        step(t, m, t + 2, m);
        step(t, -m, t + 2, -m);
        t += 2;
    }
    sites.sort();
    sites
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extent: u32, sites: &[Site]) -> Configuration {
        Configuration::from_closed_sites(extent, sites.iter().copied()).unwrap()
    }

    #[test]
    fn radial_extremes() {
        let c = Configuration::all_closed(8);
        let r = radial_closed_path(&c, 5).unwrap();
        assert!(r.holds);
        assert!(r.witness.as_ref().unwrap().is_valid_in(&c));
        assert!(!radial_closed_path(&Configuration::all_open(8), 5).unwrap().holds);
        assert!(radial_closed_path(&Configuration::all_open(3), 5).is_err());
    }

    #[test]
    fn radial_chain() {
        // NE chain from (1/2, 1/2): vertex (k, k) joined to (k + 1, k + 1) via site (k + 1, k + 1).
        // Vertex (k, k) has q-radius 2k, so the chain up to vertex (3, 3) leaves Q_5 but not Q_7.
        let chain: Vec<Site> = (1..=3).map(|k| Site::new(k, k)).collect();
        let c = config(10, &chain);
        assert!(radial_closed_path(&c, 5).unwrap().holds);
        assert!(!radial_closed_path(&c, 7).unwrap().holds);
    }

    #[test]
    fn rect_extremes() {
        for kind in RegionKind::RECTANGLES {
            let c = Configuration::all_closed(10);
            let r = rect_crossing(&c, 4, kind).unwrap();
            assert!(r.holds, "{kind:?}");
            assert!(r.witness.unwrap().is_valid_in(&c));
            assert!(!rect_crossing(&Configuration::all_open(10), 4, kind).unwrap().holds);
        }
        assert!(rect_crossing(&Configuration::all_closed(10), 4, RegionKind::Q).is_err());
    }

    #[test]
    fn staircase_crossing_of_t() {
        // T with n = 4: s in [1, 4] (vertices at s = 2, 4), d in [-8, 8].
        // Walk along s = 2 from d = -8 to d = 8.
        let mut sites = Vec::new();
        let mut d = -8;
        while d < 8 {
            let v = TiltedVertex::from_rotated(2, d).unwrap();
            let w = TiltedVertex::from_rotated(2, d + 2).unwrap();
            sites.push(site_between(v, w).unwrap());
            d += 2;
        }
        let c = config(10, &sites);
        assert!(rect_crossing(&c, 4, RegionKind::T).unwrap().holds);
        let mut broken = c.clone();
        broken.set(sites[3], false);
        assert!(!rect_crossing(&broken, 4, RegionKind::T).unwrap().holds);
    }

    #[test]
    fn ring_circuit() {
        for n in [2u32, 4, 6] {
            let ring = diamond_ring(n + 2);
            let c = config(2 * n + 2, &ring);
            let r = surrounding_circuit_exact(&c, n).unwrap();
            assert!(r.holds, "n = {n}");
            let w = r.witness.unwrap();
            assert!(w.is_valid_in(&c));
            assert_eq!(winding_number(w.vertices()).abs(), 1);
            assert!(dual_crosscheck(&c, n).unwrap());

            let mut broken = c.clone();
            broken.set(ring[0], false);
            assert!(!surrounding_circuit_exact(&broken, n).unwrap().holds);
            assert!(!dual_crosscheck(&broken, n).unwrap());
        }
    }

    #[test]
    fn circuit_extremes() {
        let c = Configuration::all_closed(9);
        assert!(surrounding_circuit_exact(&c, 4).unwrap().holds);
        assert!(surrounding_circuit_4rect(&c, 4).unwrap().holds);
        assert!(dual_crosscheck(&c, 4).unwrap());
        let c = Configuration::all_open(9);
        assert!(!surrounding_circuit_exact(&c, 4).unwrap().holds);
        assert!(!surrounding_circuit_4rect(&c, 4).unwrap().holds);
        assert!(!dual_crosscheck(&c, 4).unwrap());
        assert!(surrounding_circuit_exact(&c, 1).is_err());
        assert!(surrounding_circuit_exact(&Configuration::all_open(5), 4).is_err());
    }

    #[test]
    fn ring_without_rectangle_crossings() {
        // A tight ring satisfies the exact event but crosses none of the
        // long rectangles end to end.
        let n = 4;
        let c = config(2 * n + 2, &diamond_ring(n + 2));
        assert!(surrounding_circuit_exact(&c, n).unwrap().holds);
        assert!(!surrounding_circuit_4rect(&c, n).unwrap().holds);
    }

    #[test]
    fn witness_text_round_trip() {
        let c = Configuration::all_closed(9);
        let r = surrounding_circuit_exact(&c, 4).unwrap();
        let text = r.to_text("Acirc", 4);
        assert_eq!(EventResult::witness_from_text(&text).unwrap(), r.witness);
    }
}
