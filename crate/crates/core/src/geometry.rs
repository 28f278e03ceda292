//! Lattice geometry for the Manhattan mirror model.
//!
//! Mirrors sit on the edges of the tilted lattice: half-integer points
//! `(i + 1/2, j + 1/2)` with `i - j` even, joined when they are at distance
//! `sqrt(2)`. Every such edge has an integer midpoint and every integer point
//! is the midpoint of exactly one edge, so a [`Site`] is the key for an edge.
//! The light travels on the integer grid and only meets an edge at its
//! midpoint.

use std::fmt;

/// An integer lattice point, the midpoint of exactly one tilted edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub a: i32,
    pub b: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { a: 0, b: 0 };

    pub const fn new(a: i32, b: i32) -> Self {
        Site { a, b }
    }

    pub fn offset(self, da: i32, db: i32) -> Self {
        Site::new(self.a + da, self.b + db)
    }

    pub fn step(self, dir: Direction) -> Self {
        let (da, db) = dir.unit();
        self.offset(da, db)
    }

    pub fn linf_distance(self, other: Site) -> u32 {
        (self.a - other.a)
            .unsigned_abs()
            .max((self.b - other.b).unsigned_abs())
    }

    /// Smallest `m` with this point inside `Q_m`.
    pub fn q_radius(self) -> u32 {
        let s = self.a as i64 + self.b as i64 - 1;
        let d = self.a as i64 - self.b as i64;
        s.unsigned_abs().max(d.unsigned_abs()) as u32
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// A vertex of the tilted lattice, stored by its lower-left integer corner:
/// `TiltedVertex { i, j }` is the point `(i + 1/2, j + 1/2)`, with `i - j` even.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TiltedVertex {
    pub i: i32,
    pub j: i32,
}

impl TiltedVertex {
    /// The vertex `(1/2, 1/2)` every region is centred on.
    pub const CENTER: TiltedVertex = TiltedVertex { i: 0, j: 0 };

    /// Panics if `i - j` is odd.
    pub fn new(i: i32, j: i32) -> Self {
        assert!((i - j).rem_euclid(2) == 0, "({i}, {j}) is not on the tilted lattice");
        TiltedVertex { i, j }
    }

    pub fn try_new(i: i32, j: i32) -> Option<Self> {
        ((i - j).rem_euclid(2) == 0).then_some(TiltedVertex { i, j })
    }

    /// Real coordinates of the vertex.
    pub fn coords(self) -> (f64, f64) {
        (self.i as f64 + 0.5, self.j as f64 + 0.5)
    }

    /// Rotated coordinates `(x + y - 1, x - y)` in which every region is a box.
    pub fn rotated(self) -> (i64, i64) {
        let (i, j) = (self.i as i64, self.j as i64);
        (i + j, i - j)
    }

    pub fn from_rotated(s: i64, d: i64) -> Option<Self> {
        if (s + d).rem_euclid(2) != 0 {
            return None;
        }
        let i = (s + d) / 2;
        let j = (s - d) / 2;
        Some(TiltedVertex { i: i as i32, j: j as i32 })
    }

    /// Smallest `m` with this vertex inside `Q_m`.
    pub fn q_radius(self) -> u32 {
        let (s, d) = self.rotated();
        s.unsigned_abs().max(d.unsigned_abs()) as u32
    }

    /// The four neighbours in lexicographic order, each with the site of the
    /// connecting edge.
    pub fn neighbors(self) -> [(TiltedVertex, Site); 4] {
        let TiltedVertex { i, j } = self;
        [
            (TiltedVertex { i: i - 1, j: j - 1 }, Site::new(i, j)),
            (TiltedVertex { i: i - 1, j: j + 1 }, Site::new(i, j + 1)),
            (TiltedVertex { i: i + 1, j: j - 1 }, Site::new(i + 1, j)),
            (TiltedVertex { i: i + 1, j: j + 1 }, Site::new(i + 1, j + 1)),
        ]
    }
}

impl fmt::Display for TiltedVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (u, v) = self.coords();
        write!(f, "{u} {v}")
    }
}

/// The 45 degree direction of the mirror on a closed edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Slope +1, drawn `/`.
    NE,
    /// Slope -1, drawn `\`.
    NW,
}

impl Orientation {
    pub fn glyph(self) -> char {
        match self {
            Orientation::NE => '/',
            Orientation::NW => '\\',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    E,
    N,
    W,
    S,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::E, Direction::N, Direction::W, Direction::S];

    pub fn unit(self) -> (i32, i32) {
        match self {
            Direction::E => (1, 0),
            Direction::N => (0, 1),
            Direction::W => (-1, 0),
            Direction::S => (0, -1),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::E => Direction::W,
            Direction::N => Direction::S,
            Direction::W => Direction::E,
            Direction::S => Direction::N,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::E => 'E',
            Direction::N => 'N',
            Direction::W => 'W',
            Direction::S => 'S',
        }
    }

    pub fn from_letter(c: &str) -> Option<Direction> {
        match c {
            "E" => Some(Direction::E),
            "N" => Some(Direction::N),
            "W" => Some(Direction::W),
            "S" => Some(Direction::S),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Whether a point with coordinates that are multiples of 1/2 is a vertex of
/// the tilted lattice.
pub fn is_tilted_vertex(u: f64, v: f64) -> bool {
    let (x, y) = (u - 0.5, v - 0.5);
    if x.fract() != 0.0 || y.fract() != 0.0 {
        return false;
    }
    ((x - y) as i64).rem_euclid(2) == 0
}

/// The unique tilted edge whose midpoint is `s`, endpoints ordered west to east.
pub fn edge_for_site(s: Site) -> (TiltedVertex, TiltedVertex) {
    match mirror_orientation(s) {
        Orientation::NE => (
            TiltedVertex { i: s.a - 1, j: s.b - 1 },
            TiltedVertex { i: s.a, j: s.b },
        ),
        Orientation::NW => (
            TiltedVertex { i: s.a - 1, j: s.b },
            TiltedVertex { i: s.a, j: s.b - 1 },
        ),
    }
}

/// The site of the edge joining two tilted vertices, if they are adjacent.
pub fn site_between(v: TiltedVertex, w: TiltedVertex) -> Option<Site> {
    if (v.i - w.i).abs() != 1 || (v.j - w.j).abs() != 1 {
        return None;
    }
    Some(Site::new((v.i + w.i + 1).div_euclid(2), (v.j + w.j + 1).div_euclid(2)))
}

pub fn mirror_orientation(s: Site) -> Orientation {
    if (s.a - s.b).rem_euclid(2) == 0 {
        Orientation::NE
    } else {
        Orientation::NW
    }
}

/// Outgoing direction after a right-angle deflection by a mirror.
pub fn reflect(d: Direction, m: Orientation) -> Direction {
    use Direction::*;
    match (m, d) {
        (Orientation::NE, E) => N,
        (Orientation::NE, N) => E,
        (Orientation::NE, W) => S,
        (Orientation::NE, S) => W,
        (Orientation::NW, E) => S,
        (Orientation::NW, S) => E,
        (Orientation::NW, W) => N,
        (Orientation::NW, N) => W,
    }
}

/// The direction the Manhattan orientation allows along the row of `s`.
pub fn row_direction(b: i32) -> Direction {
    if b.rem_euclid(2) == 0 {
        Direction::E
    } else {
        Direction::W
    }
}

/// The direction the Manhattan orientation allows along the column of `s`.
pub fn column_direction(a: i32) -> Direction {
    if a.rem_euclid(2) == 0 {
        Direction::N
    } else {
        Direction::S
    }
}

/// Whether a unit step leaving `from` in direction `dir` follows the street
/// orientation of the Manhattan lattice.
pub fn is_manhattan_step(from: Site, dir: Direction) -> bool {
    match dir {
        Direction::E | Direction::W => row_direction(from.b) == dir,
        Direction::N | Direction::S => column_direction(from.a) == dir,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// The tilted box `|x + y - 1| <= n, |x - y| <= n`.
    Q,
    /// `1 <= x + y - 1 <= n, |x - y| <= 2n`.
    T,
    /// `n + 1 <= x + y - 1 <= 2n, |x - y| <= 2n`.
    T1,
    /// `-2n <= x + y - 1 <= -n - 1, |x - y| <= 2n`.
    T2,
    /// `n + 1 <= x - y <= 2n, |x + y - 1| <= 2n`.
    T3,
    /// `-2n <= x - y <= -n - 1, |x + y - 1| <= 2n`.
    T4,
}

impl RegionKind {
    pub const RECTANGLES: [RegionKind; 5] =
        [RegionKind::T, RegionKind::T1, RegionKind::T2, RegionKind::T3, RegionKind::T4];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TiltedRegion {
    pub kind: RegionKind,
    pub n: u32,
}

/// Closed bounds on the rotated coordinates `s = x + y - 1` and `d = x - y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RotatedBox {
    pub s_min: i64,
    pub s_max: i64,
    pub d_min: i64,
    pub d_max: i64,
}

impl RotatedBox {
    pub fn contains(&self, s: f64, d: f64) -> bool {
        self.s_min as f64 <= s && s <= self.s_max as f64 && self.d_min as f64 <= d && d <= self.d_max as f64
    }
}

impl TiltedRegion {
    pub fn new(kind: RegionKind, n: u32) -> Self {
        assert!(n >= 1, "region scale must be positive");
        TiltedRegion { kind, n }
    }

    pub fn q(n: u32) -> Self {
        TiltedRegion::new(RegionKind::Q, n)
    }

    pub fn rotated_box(&self) -> RotatedBox {
        let n = self.n as i64;
        let (s_min, s_max, d_min, d_max) = match self.kind {
            RegionKind::Q => (-n, n, -n, n),
            RegionKind::T => (1, n, -2 * n, 2 * n),
            RegionKind::T1 => (n + 1, 2 * n, -2 * n, 2 * n),
            RegionKind::T2 => (-2 * n, -n - 1, -2 * n, 2 * n),
            RegionKind::T3 => (-2 * n, 2 * n, n + 1, 2 * n),
            RegionKind::T4 => (-2 * n, 2 * n, -2 * n, -n - 1),
        };
        RotatedBox { s_min, s_max, d_min, d_max }
    }

    /// Membership of a real point.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rotated_box().contains(x + y - 1.0, x - y)
    }

    pub fn contains_site(&self, s: Site) -> bool {
        let (s_rot, d_rot) = (s.a as i64 + s.b as i64 - 1, s.a as i64 - s.b as i64);
        let r = self.rotated_box();
        r.s_min <= s_rot && s_rot <= r.s_max && r.d_min <= d_rot && d_rot <= r.d_max
    }

    pub fn contains_vertex(&self, v: TiltedVertex) -> bool {
        let (s, d) = v.rotated();
        let r = self.rotated_box();
        r.s_min <= s && s <= r.s_max && r.d_min <= d && d <= r.d_max
    }

    /// An edge is inside a region when both of its endpoints are.
    pub fn contains_edge(&self, s: Site) -> bool {
        let (v, w) = edge_for_site(s);
        self.contains_vertex(v) && self.contains_vertex(w)
    }

    /// Smallest configuration extent whose sites include every edge touching
    /// a vertex of this region.
    pub fn required_extent(&self) -> u32 {
        let r = self.rotated_box();
        let reach = [r.s_min, r.s_max, r.d_min, r.d_max]
            .iter()
            .map(|x| x.unsigned_abs())
            .max()
            .unwrap_or(0);
        // |u| <= (|s| + |d|)/2 + 1/2 on vertices, plus half a step to the edge midpoint.
        reach as u32 + 1
    }

    /// Every tilted vertex of the region, ordered lexicographically.
    pub fn vertices(&self) -> Vec<TiltedVertex> {
        let r = self.rotated_box();
        let mut out = Vec::new();
        for s in r.s_min..=r.s_max {
            for d in r.d_min..=r.d_max {
                if s.rem_euclid(2) == 0 && d.rem_euclid(2) == 0 {
                    if let Some(v) = TiltedVertex::from_rotated(s, d) {
                        out.push(v);
                    }
                }
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Brute-force midpoint oracle: enumerate tilted edges with endpoints in a
    /// window, keyed by doubled midpoint coordinates.
    type Segment = ((f64, f64), (f64, f64));

    fn midpoint_oracle(radius: i32) -> BTreeMap<Site, Segment> {
        let mut out = BTreeMap::new();
        let mut pts = Vec::new();
        for x2 in -2 * radius..=2 * radius {
            for y2 in -2 * radius..=2 * radius {
                let (u, v) = (x2 as f64 / 2.0, y2 as f64 / 2.0);
                if is_tilted_vertex(u, v) {
                    pts.push((u, v));
                }
            }
        }
        for &p in &pts {
            for &q in &pts {
                let dist2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
                if (dist2 - 2.0).abs() < 1e-12 && p < q {
                    let mid = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
                    assert_eq!(mid.0.fract(), 0.0);
                    assert_eq!(mid.1.fract(), 0.0);
                    let site = Site::new(mid.0 as i32, mid.1 as i32);
                    assert!(out.insert(site, (p, q)).is_none(), "two edges share midpoint {site}");
                }
            }
        }
        out
    }

    #[test]
    fn tilted_vertex_membership() {
        assert!(is_tilted_vertex(0.5, 0.5));
        assert!(!is_tilted_vertex(0.5, 1.5));
        assert!(is_tilted_vertex(-1.5, 0.5));
        assert!(!is_tilted_vertex(0.0, 0.5));
    }

    #[test]
    fn window_enumeration_of_vertices() {
        // |u|, |v| <= 2: half-integers -1.5..1.5, with (u - v) even.
        let mut count = 0;
        for x2 in -4..=4 {
            for y2 in -4..=4 {
                let (u, v) = (x2 as f64 / 2.0, y2 as f64 / 2.0);
                let expected = x2 % 2 != 0 && y2 % 2 != 0 && ((x2 - y2) / 2) % 2 == 0;
                assert_eq!(is_tilted_vertex(u, v), expected, "({u}, {v})");
                count += expected as usize;
            }
        }
        assert_eq!(count, 8);
    }

    #[test]
    fn edge_for_site_matches_midpoint_oracle() {
        let oracle = midpoint_oracle(3);
        assert!(!oracle.is_empty());
        for (site, (p, q)) in &oracle {
            let (v, w) = edge_for_site(*site);
            assert_eq!((v.coords(), w.coords()), (*p, *q), "site {site}");
            let slope_up = (w.coords().1 - v.coords().1) > 0.0;
            assert_eq!(slope_up, mirror_orientation(*site) == Orientation::NE);
        }
        // Every site strictly inside the window is some edge's midpoint.
        for a in -2..=2 {
            for b in -2..=2 {
                assert!(oracle.contains_key(&Site::new(a, b)));
            }
        }
    }

    #[test]
    fn edge_for_site_examples() {
        let (v, w) = edge_for_site(Site::new(0, 0));
        assert_eq!((v.coords(), w.coords()), ((-0.5, -0.5), (0.5, 0.5)));
        assert_eq!(mirror_orientation(Site::new(0, 0)), Orientation::NE);

        let (v, w) = edge_for_site(Site::new(1, 0));
        assert_eq!((v.coords(), w.coords()), ((0.5, 0.5), (1.5, -0.5)));
        assert_eq!(mirror_orientation(Site::new(1, 0)), Orientation::NW);

        let (v, w) = edge_for_site(Site::new(3, 1));
        assert_eq!((v.coords(), w.coords()), ((2.5, 0.5), (3.5, 1.5)));
        assert_eq!(mirror_orientation(Site::new(3, 1)), Orientation::NE);
        assert_eq!(mirror_orientation(Site::new(2, 2)), Orientation::NE);
    }

    #[test]
    fn midpoint_bijection_radius_20() {
        let mut seen = std::collections::HashSet::new();
        for a in -20..=20 {
            for b in -20..=20 {
                let s = Site::new(a, b);
                let (v, w) = edge_for_site(s);
                assert!(seen.insert((v, w)));
                assert_eq!(site_between(v, w), Some(s));
                assert_eq!(site_between(w, v), Some(s));
            }
        }
    }

    #[test]
    fn neighbor_sites_are_edge_midpoints() {
        let v = TiltedVertex::new(2, 0);
        for (w, s) in v.neighbors() {
            let (p, q) = edge_for_site(s);
            assert!((p == v && q == w) || (p == w && q == v));
        }
    }

    #[test]
    fn reflect_table() {
        assert_eq!(reflect(Direction::E, Orientation::NE), Direction::N);
        assert_eq!(reflect(Direction::E, Orientation::NW), Direction::S);
        assert_eq!(reflect(Direction::S, Orientation::NE), Direction::W);
        for m in [Orientation::NE, Orientation::NW] {
            for d in Direction::ALL {
                assert_eq!(reflect(reflect(d, m), m), d);
                assert_ne!(reflect(d, m), d);
                assert_ne!(reflect(d, m), d.reverse());
            }
        }
    }

    #[test]
    fn mirrors_respect_street_orientation() {
        // Arriving along the row leaves along the column and vice versa.
        for a in -3..=3 {
            for b in -3..=3 {
                let s = Site::new(a, b);
                let m = mirror_orientation(s);
                assert_eq!(reflect(row_direction(b), m), column_direction(a));
                assert_eq!(reflect(column_direction(a), m), row_direction(b));
            }
        }
    }

    #[test]
    fn region_examples() {
        assert!(TiltedRegion::q(5).contains(0.5, 0.5));
        assert!(!TiltedRegion::q(5).contains(6.0, -1.0));
        assert!(TiltedRegion::new(RegionKind::T3, 4).contains(5.0, -2.0));
        assert!(TiltedRegion::new(RegionKind::T3, 4).contains_site(Site::new(5, -2)));
    }

    #[test]
    fn region_nesting() {
        for n in 1..8 {
            for a in -10..=10 {
                for b in -10..=10 {
                    let s = Site::new(a, b);
                    if TiltedRegion::q(n).contains_site(s) {
                        assert!(TiltedRegion::q(n + 1).contains_site(s));
                        assert!(s.q_radius() <= n);
                    }
                }
            }
        }
    }

    #[test]
    fn required_extent_covers_incident_edges() {
        for kind in [RegionKind::Q, RegionKind::T, RegionKind::T1, RegionKind::T4] {
            let r = TiltedRegion::new(kind, 5);
            let m = r.required_extent() as i32;
            for v in r.vertices() {
                for (_, s) in v.neighbors() {
                    assert!(s.a.abs() <= m && s.b.abs() <= m, "{kind:?} {s}");
                }
            }
        }
    }
}
