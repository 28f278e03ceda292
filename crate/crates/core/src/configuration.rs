//! Mirror configurations: a dense closed/open field over the sites
//! `|a| <= M, |b| <= M`, with the metadata needed to reproduce it.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Site, TiltedRegion};
use crate::rng::{RowUniforms, GENERATOR_ID};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "manhattan-config";

/// Default cap on the memory a single dense field may take.
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Sampled,
    Enhanced,
    Hybrid,
    Explicit,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Sampled => "sampled",
            Provenance::Enhanced => "enhanced",
            Provenance::Hybrid => "hybrid",
            Provenance::Explicit => "explicit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "sampled" => Some(Provenance::Sampled),
            "enhanced" => Some(Provenance::Enhanced),
            "hybrid" => Some(Provenance::Hybrid),
            "explicit" => Some(Provenance::Explicit),
            _ => None,
        }
    }
}

fn side(extent: u32) -> usize {
    2 * extent as usize + 1
}

pub(crate) fn check_budget(what: &'static str, extent: u32, bytes_per_site: f64, budget: u64) -> Result<()> {
    let sites = (side(extent) as u64).saturating_mul(side(extent) as u64);
    let requested = (sites as f64 * bytes_per_site).ceil() as u64;
    if requested > budget {
        return Err(Error::ResourceLimit {
            what,
            requested,
            budget,
        });
    }
    Ok(())
}

/// A finite mirror field. `true` means the edge is closed and carries a mirror.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    extent: u32,
    words: Vec<u64>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub stream_index: Option<u32>,
    pub provenance: Provenance,
}

impl Configuration {
    /// Every site open (`closed = false`) or every site closed.
    pub fn uniform(extent: u32, closed: bool) -> Self {
        assert!(extent >= 1, "extent must be positive");
        let len = side(extent) * side(extent);
        let mut c = Configuration {
            extent,
            words: vec![0; len.div_ceil(64)],
            p: None,
            seed: None,
            stream_index: None,
            provenance: Provenance::Explicit,
        };
        if closed {
            for idx in 0..len {
                c.words[idx / 64] |= 1 << (idx % 64);
            }
        }
        c
    }

    pub fn all_open(extent: u32) -> Self {
        Self::uniform(extent, false)
    }

    pub fn all_closed(extent: u32) -> Self {
        Self::uniform(extent, true)
    }

    /// An explicit configuration with exactly the given sites closed.
    pub fn from_closed_sites(extent: u32, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut c = Self::all_open(extent);
        for s in sites {
            if !c.contains(s) {
                return Err(Error::invalid(format!("site {s} outside extent {extent}")));
            }
            c.set(s, true);
        }
        Ok(c)
    }

    /// Bernoulli(p) sample: `closed(s) = u(seed, stream_index, s) < p`.
    pub fn sample(p: f64, extent: u32, seed: u64, stream_index: u32) -> Result<Self> {
        Self::sample_with_budget(p, extent, seed, stream_index, DEFAULT_MEMORY_BUDGET)
    }

    pub fn sample_with_budget(
        p: f64,
        extent: u32,
        seed: u64,
        stream_index: u32,
        budget: u64,
    ) -> Result<Self> {
        validate_p(p)?;
        if extent == 0 {
            return Err(Error::invalid("extent must be positive"));
        }
        check_budget("configuration", extent, 1.0 / 8.0, budget)?;
        let mut c = Self::all_open(extent);
        let m = extent as i32;
        let w = side(extent);
        for (row, b) in (-m..=m).enumerate() {
            let mut gen = RowUniforms::new(seed, stream_index, b, -m);
            for col in 0..w {
                if gen.next_uniform() < p {
                    let idx = row * w + col;
                    c.words[idx / 64] |= 1 << (idx % 64);
                }
            }
        }
        c.p = Some(p);
        c.seed = Some(seed);
        c.stream_index = Some(stream_index);
        c.provenance = Provenance::Sampled;
        Ok(c)
    }

    pub fn extent(&self) -> u32 {
        self.extent
    }

    pub fn contains(&self, s: Site) -> bool {
        let m = self.extent as i32;
        s.a.abs() <= m && s.b.abs() <= m
    }

    #[inline]
    fn index(&self, s: Site) -> usize {
        let m = self.extent as i32;
        (s.b + m) as usize * side(self.extent) + (s.a + m) as usize
    }

    /// Panics outside the extent.
    #[inline]
    pub fn is_closed(&self, s: Site) -> bool {
        assert!(self.contains(s), "site {s} outside extent {}", self.extent);
        let idx = self.index(s);
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// `None` outside the extent.
    #[inline]
    pub fn get(&self, s: Site) -> Option<bool> {
        self.contains(s).then(|| {
            let idx = self.index(s);
            self.words[idx / 64] >> (idx % 64) & 1 == 1
        })
    }

    /// Sets one site. The result no longer equals any sample, so the
    /// provenance becomes explicit.
    pub fn set(&mut self, s: Site, closed: bool) {
        assert!(self.contains(s), "site {s} outside extent {}", self.extent);
        let idx = self.index(s);
        if closed {
            self.words[idx / 64] |= 1 << (idx % 64);
        } else {
            self.words[idx / 64] &= !(1 << (idx % 64));
        }
        self.provenance = Provenance::Explicit;
    }

    pub(crate) fn set_raw(&mut self, s: Site) {
        let idx = self.index(s);
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let m = self.extent as i32;
        (-m..=m).flat_map(move |b| (-m..=m).map(move |a| Site::new(a, b)))
    }

    pub fn closed_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites().filter(|&s| self.is_closed(s))
    }

    pub fn closed_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn site_count(&self) -> usize {
        side(self.extent) * side(self.extent)
    }

    /// Whether every closed site here is also closed in `other` (same extent).
    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.extent == other.extent && self.words.iter().zip(&other.words).all(|(x, y)| x & !y == 0)
    }

    /// Sites closed here and open in `other`.
    pub fn difference(&self, other: &Configuration) -> Vec<Site> {
        assert_eq!(self.extent, other.extent);
        self.sites().filter(|&s| self.is_closed(s) && !other.is_closed(s)).collect()
    }

    /// Takes `inner` on edges inside `Q_k` and `outer` everywhere else.
    pub fn hybrid(inner: &Configuration, outer: &Configuration, k: u32) -> Result<Self> {
        if inner.extent != outer.extent {
            return Err(Error::invalid(format!(
                "extent mismatch: inner {} vs outer {}",
                inner.extent, outer.extent
            )));
        }
        if k == 0 {
            return Err(Error::invalid("hybrid radius must be positive"));
        }
        let q = TiltedRegion::q(k);
        let mut out = outer.clone();
        // Only the sites near Q_k can take the inner value.
        let reach = (k as i32 + 1).min(inner.extent as i32);
        for b in -reach..=reach {
            for a in -reach..=reach {
                let s = Site::new(a, b);
                if q.contains_edge(s) {
                    let idx = out.index(s);
                    let bit = 1u64 << (idx % 64);
                    if inner.is_closed(s) {
                        out.words[idx / 64] |= bit;
                    } else {
                        out.words[idx / 64] &= !bit;
                    }
                }
            }
        }
        out.provenance = Provenance::Hybrid;
        Ok(out)
    }

    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Serializes to the text format: a header followed by one run-length
    /// encoded row per `b` from `-M` to `M`, runs alternating open/closed and
    /// starting with an open run.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "extent {}", self.extent);
        let _ = writeln!(out, "p {}", opt(self.p));
        let _ = writeln!(out, "seed {}", opt(self.seed));
        let _ = writeln!(out, "stream {}", opt(self.stream_index));
        let _ = writeln!(out, "generator {GENERATOR_ID}");
        let _ = writeln!(out, "provenance {}", self.provenance.as_str());
        let _ = writeln!(out, "rows {}", side(self.extent));
        let m = self.extent as i32;
        for b in -m..=m {
            let mut runs = Vec::new();
            let mut current = false;
            let mut len = 0usize;
            for a in -m..=m {
                let v = self.is_closed(Site::new(a, b));
                if v != current {
                    runs.push(len);
                    current = v;
                    len = 0;
                }
                len += 1;
            }
            runs.push(len);
            let line: Vec<String> = runs.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::parse(0, format!("unexpected end of file, expected {what}"))),
            }
        };

        let (n, magic) = next("header")?;
        let version = magic
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::parse(n, "not a configuration file"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(Error::parse(n, format!("unsupported format version {version:?}")));
        }
        let (n, l) = next("extent")?;
        let extent: u32 = field(n, &l, "extent")?;
        if extent == 0 {
            return Err(Error::parse(n, "extent must be positive"));
        }
        let (n, l) = next("p")?;
        let p: Option<f64> = opt_field(n, &l, "p")?;
        if let Some(p) = p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(n, format!("p = {p} outside [0, 1]")));
            }
        }
        let (n, l) = next("seed")?;
        let seed: Option<u64> = opt_field(n, &l, "seed")?;
        let (n, l) = next("stream")?;
        let stream_index: Option<u32> = opt_field(n, &l, "stream")?;
        let (n, l) = next("generator")?;
        let gen: String = field(n, &l, "generator")?;
        if gen != GENERATOR_ID {
            return Err(Error::parse(n, format!("unknown generator {gen:?}")));
        }
        let (n, l) = next("provenance")?;
        let prov: String = field(n, &l, "provenance")?;
        let provenance =
            Provenance::parse(&prov).ok_or_else(|| Error::parse(n, format!("unknown provenance {prov:?}")))?;
        let (n, l) = next("rows")?;
        let rows: usize = field(n, &l, "rows")?;
        if rows != side(extent) {
            return Err(Error::parse(n, format!("expected {} rows, header says {rows}", side(extent))));
        }

        let mut c = Configuration::all_open(extent);
        let m = extent as i32;
        let w = side(extent);
        for b in -m..=m {
            let (n, l) = next("row")
                .map_err(|_| Error::parse(0, format!("truncated: missing row b = {b}")))?;
            let mut a = -m;
            let mut closed = false;
            for tok in l.split_whitespace() {
                let run: usize = tok
                    .parse()
                    .map_err(|_| Error::parse(n, format!("bad run length {tok:?}")))?;
                if (a + m) as usize + run > w {
                    let over = Site::new(m + 1, b);
                    return Err(Error::parse(n, format!("site {over} outside extent {extent}")));
                }
                if closed {
                    for x in a..a + run as i32 {
                        c.set_raw(Site::new(x, b));
                    }
                }
                a += run as i32;
                closed = !closed;
            }
            if a != m + 1 {
                return Err(Error::parse(
                    n,
                    format!("row b = {b} covers {} sites, expected {w}", (a + m) as usize),
                ));
            }
        }
        if let Some((n, Ok(l))) = lines.next() {
            if !l.trim().is_empty() {
                return Err(Error::parse(
                    n,
                    format!("site {} outside extent {extent}", Site::new(-m, m + 1)),
                ));
            }
        }
        c.p = p;
        c.seed = seed;
        c.stream_index = stream_index;
        c.provenance = provenance;
        Ok(c)
    }
}

fn validate_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p = {p} outside [0, 1]")));
    }
    Ok(())
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn field<T: std::str::FromStr>(line: usize, text: &str, key: &str) -> Result<T> {
    let value = text
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::parse(line, format!("expected `{key} <value>`")))?;
    value
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {key} value {value:?}")))
}

fn opt_field<T: std::str::FromStr>(line: usize, text: &str, key: &str) -> Result<Option<T>> {
    let raw: String = field(line, text, key)?;
    if raw == "-" {
        Ok(None)
    } else {
        raw.parse()
            .map(Some)
            .map_err(|_| Error::parse(line, format!("bad {key} value {raw:?}")))
    }
}

/// Per-site uniforms of one stream over an extent. Thresholding the same
/// field at increasing `p` gives nested closed sets.
#[derive(Clone, Debug)]
pub struct UniformField {
    extent: u32,
    values: Vec<f64>,
    pub seed: u64,
    pub stream_index: u32,
}

impl UniformField {
    pub fn generate(extent: u32, seed: u64, stream_index: u32) -> Result<Self> {
        Self::generate_with_budget(extent, seed, stream_index, DEFAULT_MEMORY_BUDGET)
    }

    pub fn generate_with_budget(extent: u32, seed: u64, stream_index: u32, budget: u64) -> Result<Self> {
        if extent == 0 {
            return Err(Error::invalid("extent must be positive"));
        }
        check_budget("uniform field", extent, 8.0, budget)?;
        let m = extent as i32;
        let mut values = Vec::with_capacity(side(extent) * side(extent));
        for b in -m..=m {
            let mut gen = RowUniforms::new(seed, stream_index, b, -m);
            values.extend((0..side(extent)).map(|_| gen.next_uniform()));
        }
        Ok(UniformField {
            extent,
            values,
            seed,
            stream_index,
        })
    }

    pub fn extent(&self) -> u32 {
        self.extent
    }

    pub fn value(&self, s: Site) -> f64 {
        let m = self.extent as i32;
        assert!(s.a.abs() <= m && s.b.abs() <= m);
        self.values[(s.b + m) as usize * side(self.extent) + (s.a + m) as usize]
    }

    pub fn threshold(&self, p: f64) -> Result<Configuration> {
        validate_p(p)?;
        let mut c = Configuration::all_open(self.extent);
        for (idx, &u) in self.values.iter().enumerate() {
            if u < p {
                c.words[idx / 64] |= 1 << (idx % 64);
            }
        }
        c.p = Some(p);
        c.seed = Some(self.seed);
        c.stream_index = Some(self.stream_index);
        c.provenance = Provenance::Sampled;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_probabilities() {
        let c = Configuration::sample(1.0, 7, 3, 0).unwrap();
        assert_eq!(c.closed_count(), c.site_count());
        let c = Configuration::sample(0.0, 7, 3, 0).unwrap();
        assert_eq!(c.closed_count(), 0);
    }

    #[test]
    fn half_density_within_four_sigma() {
        let c = Configuration::sample(0.5, 50, 12345, 0).unwrap();
        let n = c.site_count() as f64; // 101^2
        let frac = c.closed_count() as f64 / n;
        let se = (0.25 / n).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * se, "fraction {frac}");
    }

    #[test]
    fn sample_equals_threshold_of_uniforms() {
        let f = UniformField::generate(9, 77, 4).unwrap();
        for p in [0.0, 0.2, 0.5, 0.93, 1.0] {
            assert_eq!(f.threshold(p).unwrap(), Configuration::sample(p, 9, 77, 4).unwrap());
        }
    }

    #[test]
    fn threshold_extremes() {
        let f = UniformField::generate(4, 1, 0).unwrap();
        assert_eq!(f.threshold(0.0).unwrap().closed_count(), 0);
        assert_eq!(f.threshold(1.0).unwrap().closed_count(), 81);
    }

    #[test]
    fn coupling_across_extents() {
        let small = Configuration::sample(0.5, 5, 8, 2).unwrap();
        let large = Configuration::sample(0.5, 12, 8, 2).unwrap();
        for s in small.sites() {
            assert_eq!(small.is_closed(s), large.is_closed(s));
        }
    }

    #[test]
    fn reproducible_and_stream_independent() {
        let a = Configuration::sample(0.5, 30, 99, 0).unwrap();
        assert_eq!(a, Configuration::sample(0.5, 30, 99, 0).unwrap());
        let b = Configuration::sample(0.5, 30, 99, 1).unwrap();
        let n = a.site_count() as f64;
        let agree = a.sites().filter(|&s| a.is_closed(s) == b.is_closed(s)).count() as f64;
        let se = (0.25 / n).sqrt();
        assert!((agree / n - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn budget_is_enforced() {
        let err = Configuration::sample_with_budget(0.5, 1000, 1, 0, 1024).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
        let err = UniformField::generate_with_budget(100, 1, 0, 1024).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
        assert!(Configuration::sample(1.5, 3, 1, 0).is_err());
    }

    #[test]
    fn hybrid_identity_and_q2_core() {
        let c = Configuration::sample(0.5, 6, 1, 0).unwrap();
        let h = Configuration::hybrid(&c, &c, 3).unwrap();
        assert_eq!(h.provenance, Provenance::Hybrid);
        assert!(c.is_subset_of(&h) && h.is_subset_of(&c));

        let inner = Configuration::all_open(6);
        let outer = Configuration::all_closed(6);
        let h = Configuration::hybrid(&inner, &outer, 2).unwrap();
        // Oracle: sites whose edge endpoints both satisfy |x+y-1| <= 2, |x-y| <= 2.
        let mut expected = Vec::new();
        for s in inner.sites() {
            let (v, w) = crate::geometry::edge_for_site(s);
            let inside = |(x, y): (f64, f64)| (x + y - 1.0).abs() <= 2.0 && (x - y).abs() <= 2.0;
            if inside(v.coords()) && inside(w.coords()) {
                expected.push(s);
            }
        }
        let open: Vec<Site> = h.sites().filter(|&s| !h.is_closed(s)).collect();
        assert_eq!(open, expected);
        assert!(!expected.is_empty());

        assert!(Configuration::hybrid(&inner, &Configuration::all_open(5), 2).is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = Configuration::sample(0.37, 6, 5, 11).unwrap();
        let text = c.to_text();
        let back = Configuration::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);

        let e = Configuration::from_closed_sites(2, [Site::new(-2, -2), Site::new(2, 2)]).unwrap();
        assert_eq!(Configuration::read_from(e.to_text().as_bytes()).unwrap(), e);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let c = Configuration::sample(0.5, 4, 5, 0).unwrap();
        let text = c.to_text();
        let cut: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        let err = Configuration::read_from(cut.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn out_of_extent_site_is_named() {
        let c = Configuration::all_open(2);
        let text = c.to_text().replacen("\n5\n", "\n5 1\n", 1);
        let err = Configuration::read_from(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3, -2)") && msg.contains("outside extent"), "{msg}");
    }
}
