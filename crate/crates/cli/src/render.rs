//! Static SVG pictures of configurations and their overlays.
//!
//! Lattice point `(x, y)` is drawn at `(scale * x, -scale * y)`, so north is
//! up. Output is a pure function of the inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use anyhow::{bail, Result};
use pinball_core::enhancement::{MatchSet, Pattern};
use pinball_core::events::Witness;
use pinball_core::geometry::{edge_for_site, TiltedRegion};
use pinball_core::{Configuration, RayState, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Lattice,
    Mirrors,
    Trajectory,
    CircuitWitness,
    PatternMatches,
    Regions,
}

impl Layer {
    pub const ALL: [Layer; 6] = [
        Layer::Lattice,
        Layer::Mirrors,
        Layer::Trajectory,
        Layer::CircuitWitness,
        Layer::PatternMatches,
        Layer::Regions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Lattice => "lattice",
            Layer::Mirrors => "mirrors",
            Layer::Trajectory => "trajectory",
            Layer::CircuitWitness => "circuit_witness",
            Layer::PatternMatches => "pattern_matches",
            Layer::Regions => "regions",
        }
    }

    fn default_color(self) -> &'static str {
        match self {
            Layer::Lattice => "#d0d0d0",
            Layer::Mirrors => "#202020",
            Layer::Trajectory => "#1f5fbf",
            Layer::CircuitWitness => "#2e8b57",
            Layer::PatternMatches => "#d62728",
            Layer::Regions => "#9467bd",
        }
    }
}

impl FromStr for Layer {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Layer::ALL.into_iter().find(|l| l.as_str() == s) {
            Some(l) => Ok(l),
            None => bail!(
                "unknown layer {s:?}; expected one of {}",
                Layer::ALL.map(Layer::as_str).join(", ")
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderSpec {
    pub layers: BTreeSet<Layer>,
    /// Pixels per lattice unit.
    pub scale: f64,
    pub palette: BTreeMap<Layer, String>,
}

impl RenderSpec {
    pub fn new(layers: impl IntoIterator<Item = Layer>, scale: f64) -> Self {
        RenderSpec {
            layers: layers.into_iter().collect(),
            scale,
            palette: Layer::ALL.iter().map(|&l| (l, l.default_color().to_string())).collect(),
        }
    }

    fn color(&self, l: Layer) -> &str {
        self.palette.get(&l).map(String::as_str).unwrap_or(l.default_color())
    }
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec::new([Layer::Lattice, Layer::Mirrors, Layer::Trajectory, Layer::CircuitWitness], 12.0)
    }
}

/// Things drawn on top of the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overlays {
    pub trajectory: Option<(Vec<RayState>, bool)>,
    pub witness: Option<Witness>,
    pub matches: Option<(Pattern, MatchSet)>,
    pub regions: Vec<TiltedRegion>,
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Canvas {
    scale: f64,
    out: String,
}

impl Canvas {
    fn pt(&self, x: f64, y: f64) -> String {
        format!("{},{}", num(self.scale * x), num(-self.scale * y))
    }

    fn segment(&mut self, p: (f64, f64), q: (f64, f64)) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(self.scale * p.0),
            num(-self.scale * p.1),
            num(self.scale * q.0),
            num(-self.scale * q.1)
        );
    }

    fn poly(&mut self, pts: &[(f64, f64)], closed: bool) {
        let list: Vec<String> = pts.iter().map(|&(x, y)| self.pt(x, y)).collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(self.out, "<{tag} points=\"{}\"/>", list.join(" "));
    }

    fn open_group(&mut self, layer: Layer, attrs: &str) {
        let _ = writeln!(self.out, "<g id=\"{}\" {attrs}>", layer.as_str());
    }

    fn close_group(&mut self) {
        self.out.push_str("</g>\n");
    }
}

fn site_edge(s: Site) -> ((f64, f64), (f64, f64)) {
    let (v, w) = edge_for_site(s);
    (v.coords(), w.coords())
}

pub fn render_svg(config: &Configuration, overlays: &Overlays, spec: &RenderSpec) -> Result<String> {
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        bail!("scale must be positive, got {}", spec.scale);
    }
    let m = config.extent();
    if let Some((states, _)) = &overlays.trajectory {
        if let Some(s) = states.iter().find(|s| !config.contains(s.site)) {
            bail!("trajectory site {} lies outside the configuration extent {m}", s.site);
        }
    }
    if let Some(w) = &overlays.witness {
        let limit = m as f64 + 0.5;
        if let Some(v) = w.vertices().iter().find(|v| {
            let (x, y) = v.coords();
            x.abs() > limit || y.abs() > limit
        }) {
            bail!("witness vertex {v} lies outside the configuration extent {m}");
        }
    }

    let half = spec.scale * (m as f64 + 1.0);
    let size = 2.0 * half;
    let mut c = Canvas {
        scale: spec.scale,
        out: String::new(),
    };
    c.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        c.out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">",
        num(size),
        num(size),
        num(-half),
        num(-half),
        num(size),
        num(size)
    );
    let stroke = |w: f64| num(spec.scale * w);

    for &layer in &spec.layers {
        match layer {
            Layer::Lattice => {
                c.open_group(layer, &format!("stroke=\"{}\" stroke-width=\"{}\"", spec.color(layer), stroke(0.04)));
                for s in config.sites() {
                    let (p, q) = site_edge(s);
                    c.segment(p, q);
                }
                c.close_group();
            }
            Layer::Mirrors => {
                c.open_group(
                    layer,
                    &format!(
                        "stroke=\"{}\" stroke-width=\"{}\" stroke-linecap=\"round\"",
                        spec.color(layer),
                        stroke(0.12)
                    ),
                );
                for s in config.closed_sites() {
                    let (p, q) = site_edge(s);
                    c.segment(p, q);
                }
                c.close_group();
            }
            Layer::Trajectory => {
                if let Some((states, closed)) = &overlays.trajectory {
                    c.open_group(
                        layer,
                        &format!("fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"", spec.color(layer), stroke(0.08)),
                    );
                    let pts: Vec<(f64, f64)> = states.iter().map(|s| (s.site.a as f64, s.site.b as f64)).collect();
                    c.poly(&pts, *closed);
                    c.close_group();
                }
            }
            Layer::CircuitWitness => {
                if let Some(w) = &overlays.witness {
                    c.open_group(
                        layer,
                        &format!("fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"", spec.color(layer), stroke(0.16)),
                    );
                    let pts: Vec<(f64, f64)> = w.vertices().iter().map(|v| v.coords()).collect();
                    c.poly(&pts, matches!(w, Witness::Circuit(_)));
                    c.close_group();
                }
            }
            Layer::PatternMatches => {
                if let Some((g, set)) = &overlays.matches {
                    c.open_group(
                        layer,
                        &format!(
                            "stroke=\"{}\" stroke-width=\"{}\" stroke-linecap=\"round\"",
                            spec.color(layer),
                            stroke(0.2)
                        ),
                    );
                    for s in set.red_sites(g) {
                        let (p, q) = site_edge(s);
                        c.segment(p, q);
                    }
                    c.close_group();
                }
            }
            Layer::Regions => {
                if !overlays.regions.is_empty() {
                    c.open_group(
                        layer,
                        &format!(
                            "fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-dasharray=\"{} {}\"",
                            spec.color(layer),
                            stroke(0.06),
                            stroke(0.3),
                            stroke(0.2)
                        ),
                    );
                    for r in &overlays.regions {
                        let b = r.rotated_box();
                        let corner = |s: i64, d: i64| ((s + d + 1) as f64 / 2.0, (s - d + 1) as f64 / 2.0);
                        let pts = [
                            corner(b.s_min, b.d_min),
                            corner(b.s_min, b.d_max),
                            corner(b.s_max, b.d_max),
                            corner(b.s_max, b.d_min),
                        ];
                        c.poly(&pts, true);
                    }
                    c.close_group();
                }
            }
        }
    }
    c.out.push_str("</svg>\n");
    Ok(c.out)
}
