//! Slow, obviously-correct reference implementations used by the tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pinball_core::geometry::{edge_for_site, RegionKind, TiltedRegion, TiltedVertex};
use pinball_core::{Configuration, Site};

/// Closed edges of `c` as vertex pairs.
pub fn closed_edges(c: &Configuration) -> Vec<(TiltedVertex, TiltedVertex)> {
    c.closed_sites().map(edge_for_site).collect()
}

pub struct UnionFind {
    parent: BTreeMap<TiltedVertex, TiltedVertex>,
}

impl UnionFind {
    pub fn new() -> Self {
        UnionFind { parent: BTreeMap::new() }
    }

    pub fn find(&mut self, v: TiltedVertex) -> TiltedVertex {
        let p = *self.parent.entry(v).or_insert(v);
        if p == v {
            return v;
        }
        let root = self.find(p);
        self.parent.insert(v, root);
        root
    }

    pub fn union(&mut self, a: TiltedVertex, b: TiltedVertex) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent.insert(ra, rb);
        }
    }
}

fn rotated(v: TiltedVertex) -> (i64, i64) {
    let (x, y) = v.coords();
    ((x + y - 1.0).round() as i64, (x - y).round() as i64)
}

/// `A_n` by union-find over every closed edge of the configuration.
pub fn radial_oracle(c: &Configuration, n: u32) -> bool {
    let mut uf = UnionFind::new();
    let edges = closed_edges(c);
    for &(v, w) in &edges {
        uf.union(v, w);
    }
    let centre = uf.find(TiltedVertex::new(0, 0));
    let n = n as i64;
    edges.iter().flat_map(|&(v, w)| [v, w]).any(|v| {
        let (s, d) = rotated(v);
        (s.abs() > n || d.abs() > n) && uf.find(v) == centre
    })
}

/// Long-direction crossing of a rectangle by union-find over the edges
/// with both ends inside it.
pub fn crossing_oracle(c: &Configuration, n: u32, kind: RegionKind) -> bool {
    let region = TiltedRegion::new(kind, n);
    let b = region.rotated_box();
    let inside = |v: TiltedVertex| {
        let (s, d) = rotated(v);
        b.s_min <= s && s <= b.s_max && b.d_min <= d && d <= b.d_max
    };
    let along_s = matches!(kind, RegionKind::T3 | RegionKind::T4);
    let key = |v: TiltedVertex| {
        let (s, d) = rotated(v);
        if along_s {
            s
        } else {
            d
        }
    };
    let (low, high) = if along_s { (b.s_min, b.s_max) } else { (b.d_min, b.d_max) };
    let mut uf = UnionFind::new();
    let mut verts = BTreeSet::new();
    for (v, w) in closed_edges(c) {
        if inside(v) && inside(w) {
            uf.union(v, w);
            verts.insert(v);
            verts.insert(w);
        }
    }
    let lows: BTreeSet<TiltedVertex> = verts.iter().filter(|&&v| key(v) == low).map(|&v| uf.find(v)).collect();
    verts.iter().any(|&v| key(v) == high && lows.contains(&uf.find(v)))
}

/// Signed angle swept around `(1/2, 1/2)` going from `v` to `w`.
fn sweep(v: TiltedVertex, w: TiltedVertex) -> f64 {
    let (x0, y0) = v.coords();
    let (x1, y1) = w.coords();
    let a0 = (y0 - 0.5).atan2(x0 - 0.5);
    let a1 = (y1 - 0.5).atan2(x1 - 0.5);
    let mut d = a1 - a0;
    while d > std::f64::consts::PI {
        d -= 2.0 * std::f64::consts::PI;
    }
    while d < -std::f64::consts::PI {
        d += 2.0 * std::f64::consts::PI;
    }
    d
}

/// Winding number of a closed walk about `(1/2, 1/2)` from summed angles.
pub fn winding_by_angle(cycle: &[TiltedVertex]) -> i32 {
    let total: f64 = (0..cycle.len()).map(|k| sweep(cycle[k], cycle[(k + 1) % cycle.len()])).sum();
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

/// `A''_n` by enumerating simple cycles of the annulus graph and measuring
/// their winding with angles. Exponential; meant for `n <= 4`.
pub fn circuit_oracle(c: &Configuration, n: u32) -> bool {
    let in_annulus = |v: TiltedVertex| {
        let (s, d) = rotated(v);
        let r = s.abs().max(d.abs());
        r > n as i64 && r <= 2 * n as i64
    };
    let mut adj: BTreeMap<TiltedVertex, Vec<TiltedVertex>> = BTreeMap::new();
    for (v, w) in closed_edges(c) {
        if in_annulus(v) && in_annulus(w) {
            adj.entry(v).or_default().push(w);
            adj.entry(w).or_default().push(v);
        }
    }
    // Vertices of degree < 2 are on no cycle; peel them repeatedly.
    loop {
        let leaves: Vec<TiltedVertex> = adj.iter().filter(|(_, ns)| ns.len() < 2).map(|(&v, _)| v).collect();
        if leaves.is_empty() {
            break;
        }
        for v in leaves {
            if let Some(ns) = adj.remove(&v) {
                for w in ns {
                    if let Some(list) = adj.get_mut(&w) {
                        list.retain(|&x| x != v);
                    }
                }
            }
        }
    }
    let verts: Vec<TiltedVertex> = adj.keys().copied().collect();
    for &start in &verts {
        let mut path = vec![start];
        let mut on_path = BTreeSet::from([start]);
        if dfs_cycles(&adj, start, &mut path, &mut on_path) {
            return true;
        }
    }
    false
}

/// Extends `path` with vertices greater than `start`; true once a cycle
/// through `start` winds around the centre.
fn dfs_cycles(
    adj: &BTreeMap<TiltedVertex, Vec<TiltedVertex>>,
    start: TiltedVertex,
    path: &mut Vec<TiltedVertex>,
    on_path: &mut BTreeSet<TiltedVertex>,
) -> bool {
    let last = *path.last().unwrap();
    for &w in &adj[&last] {
        if w == start && path.len() >= 3 && winding_by_angle(path) != 0 {
            return true;
        }
        if w > start && !on_path.contains(&w) {
            path.push(w);
            on_path.insert(w);
            if dfs_cycles(adj, start, path, on_path) {
                return true;
            }
            path.pop();
            on_path.remove(&w);
        }
    }
    false
}

/// Origin trajectory by direct simulation with explicit street rules,
/// independent of the library's step map.
pub fn trace_oracle(c: &Configuration, max_steps: usize) -> (bool, Vec<Site>) {
    // Unit moves: 0 = east, 1 = north, 2 = west, 3 = south.
    let mv = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    let (mut a, mut b, mut dir) = (0i32, 0i32, 0usize);
    let mut sites = vec![Site::new(0, 0)];
    for _ in 0..max_steps {
        let (na, nb) = (a + mv[dir].0, b + mv[dir].1);
        let next = Site::new(na, nb);
        match c.get(next) {
            None => return (false, sites),
            Some(closed) => {
                if closed {
                    // "/" when a - b is even: east <-> north, west <-> south.
                    // "\" otherwise: east <-> south, west <-> north.
                    let slash = (na - nb).rem_euclid(2) == 0;
                    dir = match (slash, dir) {
                        (true, 0) => 1,
                        (true, 1) => 0,
                        (true, 2) => 3,
                        (true, 3) => 2,
                        (false, 0) => 3,
                        (false, 3) => 0,
                        (false, 2) => 1,
                        (false, 1) => 2,
                        _ => unreachable!(),
                    };
                }
                a = na;
                b = nb;
                if (a, b, dir) == (0, 0, 0) {
                    return (true, sites);
                }
                sites.push(next);
            }
        }
    }
    (false, sites)
}
