//! Spectral measures on S^{n-1}, ellipticity scans and the Fourier symbol of L.
//!
//! A measure is a finite list of atoms plus an optional sampled density. The
//! density is integrated with the equispaced trapezoid rule on the circle, so
//! every measure reduces to a weighted list of directions; all downstream code
//! (quadrature, symbol, ellipticity) consumes that same list.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;

const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub direction: Point,
    pub weight: f64,
}

/// Sampled even density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Density {
    /// Values at angles 2πk/M on the unit circle.
    Circle { values: Vec<f64> },
    /// Values at +1 and -1 on S⁰.
    Pair { plus: f64, minus: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    density: Option<Density>,
    /// Free-form label, e.g. the catalog name.
    tag: String,
    total_mass: f64,
}

/// One failed invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

impl SpectralMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>, density: Option<Density>) -> Self {
        let mut m = Self {
            dim,
            atoms,
            density,
            tag: String::new(),
            total_mass: 0.0,
        };
        m.total_mass = m.directions().iter().map(|d| d.1).sum();
        m
    }

    /// The measure multiplied by `factor` > 0.
    pub fn scaled(&self, factor: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                direction: a.direction,
                weight: a.weight * factor,
            })
            .collect();
        let density = self.density.as_ref().map(|d| match d {
            Density::Circle { values } => Density::Circle {
                values: values.iter().map(|v| v * factor).collect(),
            },
            Density::Pair { plus, minus } => Density::Pair {
                plus: plus * factor,
                minus: minus * factor,
            },
        });
        Self::new(self.dim, atoms, density).with_tag(self.tag.clone())
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Atoms at the given angles (degrees) in 2D.
    pub fn atomic_2d(atoms: &[(f64, f64)]) -> Self {
        let atoms = atoms
            .iter()
            .map(|&(deg, w)| {
                let a = deg.to_radians();
                Atom {
                    direction: [a.cos(), a.sin()],
                    weight: w,
                }
            })
            .collect();
        Self::new(2, atoms, None)
    }

    /// Atoms at ±1 in 1D, given as (sign, weight).
    pub fn atomic_1d(atoms: &[(f64, f64)]) -> Self {
        let atoms = atoms
            .iter()
            .map(|&(sign, w)| Atom {
                direction: [sign.signum(), 0.0],
                weight: w,
            })
            .collect();
        Self::new(1, atoms, None)
    }

    /// δ_{e1}+δ_{-e1} (1D) or Σᵢ(δ_{eᵢ}+δ_{-eᵢ}) (2D), unit weights.
    pub fn axis_atomic(dim: usize) -> Self {
        if dim == 1 {
            Self::atomic_1d(&[(1.0, 1.0), (-1.0, 1.0)]).with_tag("axis-atomic")
        } else {
            Self::atomic_2d(&[(0.0, 1.0), (90.0, 1.0), (180.0, 1.0), (270.0, 1.0)]).with_tag("axis-atomic")
        }
    }

    /// c·dθ; in 1D the counting measure on {±1} scaled by c.
    pub fn uniform(dim: usize, c: f64, samples: usize) -> Self {
        if dim == 1 {
            Self::new(1, vec![], Some(Density::Pair { plus: c, minus: c })).with_tag("uniform")
        } else {
            Self::new(2, vec![], Some(Density::Circle { values: vec![c; samples] })).with_tag("uniform")
        }
    }

    /// Density from the catalog, sampled at `samples` equispaced angles.
    pub fn density_catalog(dim: usize, name: &str, scale: f64, param: Option<f64>, samples: usize) -> Result<Self> {
        if dim == 1 {
            return match name {
                "constant" => Ok(Self::uniform(1, scale, 2).with_tag("constant")),
                _ => Err(Error::UnknownCatalog(name.to_string())),
            };
        }
        let f: Box<dyn Fn(f64) -> f64> = match name {
            "constant" => Box::new(|_| 1.0),
            "cos2" => {
                let eps = param.unwrap_or(0.5);
                Box::new(move |phi: f64| 1.0 + eps * (2.0 * phi).cos())
            }
            "axial" => {
                let kappa = param.unwrap_or(2.0);
                Box::new(move |phi: f64| (kappa * (2.0 * phi).cos()).exp())
            }
            _ => return Err(Error::UnknownCatalog(name.to_string())),
        };
        let values = (0..samples)
            .map(|k| scale * f(2.0 * PI * k as f64 / samples as f64))
            .collect();
        Ok(Self::new(2, vec![], Some(Density::Circle { values })).with_tag(name))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }
    pub fn tag(&self) -> &str {
        &self.tag
    }
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Every atom and density sample as (direction, quadrature weight).
    pub fn directions(&self) -> Vec<(Point, f64)> {
        let mut out: Vec<(Point, f64)> = self.atoms.iter().map(|a| (a.direction, a.weight)).collect();
        match &self.density {
            Some(Density::Circle { values }) => {
                let m = values.len();
                let dphi = 2.0 * PI / m as f64;
                for (k, &v) in values.iter().enumerate() {
                    let phi = dphi * k as f64;
                    out.push(([phi.cos(), phi.sin()], v * dphi));
                }
            }
            Some(Density::Pair { plus, minus }) => {
                out.push(([1.0, 0.0], *plus));
                out.push(([-1.0, 0.0], *minus));
            }
            None => {}
        }
        out
    }

    /// Directions folded onto antipodal pairs: each ray carries the mass of θ
    /// and -θ together. Rays with zero mass are dropped.
    pub fn rays(&self) -> Vec<(Point, f64)> {
        let mut rays: Vec<(Point, f64)> = Vec::new();
        for (mut d, w) in self.directions() {
            // snap tiny components so axis rays are recognised as lattice rays
            for c in d.iter_mut() {
                if c.abs() < 1e-14 {
                    *c = 0.0;
                }
            }
            if d[1] < 0.0 || (d[1] == 0.0 && d[0] < 0.0) {
                d = [-d[0], -d[1]];
            }
            match rays
                .iter_mut()
                .find(|(e, _)| (e[0] - d[0]).abs() < 1e-12 && (e[1] - d[1]).abs() < 1e-12)
            {
                Some(entry) => entry.1 += w,
                None => rays.push((d, w)),
            }
        }
        rays.retain(|r| r.1 != 0.0);
        rays
    }
}

/// Check every measure invariant; an empty list means the measure is valid.
pub fn validate(m: &SpectralMeasure) -> Vec<Violation> {
    let mut out = Vec::new();
    for (k, a) in m.atoms.iter().enumerate() {
        if !(a.weight >= 0.0) || !a.weight.is_finite() {
            out.push(Violation {
                invariant: "negative weight",
                detail: format!("atom {k} has weight {}", a.weight),
            });
        }
        let norm = if m.dim == 1 {
            a.direction[0].abs()
        } else {
            a.direction[0].hypot(a.direction[1])
        };
        if (norm - 1.0).abs() > UNIT_TOL || (m.dim == 1 && a.direction[1] != 0.0) {
            out.push(Violation {
                invariant: "direction not unit",
                detail: format!("atom {k} has |θ| = {norm}"),
            });
        }
    }
    for (k, a) in m.atoms.iter().enumerate() {
        let anti = [-a.direction[0], -a.direction[1]];
        let matched = m.atoms.iter().any(|b| {
            (b.direction[0] - anti[0]).abs() < 1e-9
                && (b.direction[1] - anti[1]).abs() < 1e-9
                && (b.weight - a.weight).abs() <= 1e-12 * a.weight.abs().max(1.0)
        });
        if !matched {
            out.push(Violation {
                invariant: "measure not even",
                detail: format!("atom {k} at {:?} has no antipode of equal weight", a.direction),
            });
        }
    }
    match &m.density {
        Some(Density::Circle { values }) => {
            let n = values.len();
            if n == 0 || n % 2 == 1 {
                out.push(Violation {
                    invariant: "density not even",
                    detail: format!("{n} samples cannot pair antipodes"),
                });
            } else {
                for k in 0..n / 2 {
                    if (values[k] - values[k + n / 2]).abs() > 1e-12 * values[k].abs().max(1.0) {
                        out.push(Violation {
                            invariant: "density not even",
                            detail: format!("sample {k} differs from its antipode"),
                        });
                        break;
                    }
                }
            }
            if let Some(k) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                out.push(Violation {
                    invariant: "negative weight",
                    detail: format!("density sample {k} is {}", values[k]),
                });
            }
        }
        Some(Density::Pair { plus, minus }) => {
            if (plus - minus).abs() > 1e-12 * plus.abs().max(1.0) {
                out.push(Violation {
                    invariant: "density not even",
                    detail: format!("density(+1) = {plus} but density(-1) = {minus}"),
                });
            }
            if !(*plus >= 0.0 && *minus >= 0.0) {
                out.push(Violation {
                    invariant: "negative weight",
                    detail: "density on S⁰ is negative".into(),
                });
            }
        }
        None => {}
    }
    if !(m.total_mass.is_finite() && m.total_mass > 0.0) {
        out.push(Violation {
            invariant: "total mass must be finite and positive",
            detail: format!("total mass {}", m.total_mass),
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    /// min over sampled ν of ∫|ν·θ| dμ
    pub lambda1_est: f64,
    /// min over sampled ν of ∫|ν·θ|^{2s} dμ
    pub lambda1_power2s_est: f64,
    pub total_mass: f64,
    pub sampled_directions: usize,
}

pub const DEFAULT_ELLIPTICITY_DIRECTIONS: usize = 720;

/// Scan the directional integrals over equispaced ν and report the minima.
pub fn ellipticity(m: &SpectralMeasure, s: f64, n_dirs: usize) -> Result<EllipticityReport> {
    if m.total_mass <= 0.0 {
        return Err(Error::EmptyMeasure);
    }
    let nus: Vec<Point> = if m.dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..n_dirs.max(1))
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n_dirs as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let dirs = m.directions();
    let mut lambda1 = f64::INFINITY;
    let mut lambda2s = f64::INFINITY;
    for nu in &nus {
        let (mut a, mut b) = (0.0, 0.0);
        for (theta, w) in &dirs {
            let c = (nu[0] * theta[0] + nu[1] * theta[1]).abs();
            a += w * c;
            b += w * c.powf(2.0 * s);
        }
        lambda1 = lambda1.min(a);
        lambda2s = lambda2s.min(b);
    }
    Ok(EllipticityReport {
        lambda1_est: lambda1,
        lambda1_power2s_est: lambda2s,
        total_mass: m.total_mass,
        sampled_directions: nus.len(),
    })
}

/// Defines the discrete stable operator: order s, spectral measure, quadrature knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub s: f64,
    pub measure: SpectralMeasure,
    /// Radius of the Taylor zone, in units of the grid spacing.
    pub inner_cut: f64,
    /// Start of the analytic tail; `None` uses the box diameter, which makes
    /// the tail exact for fields that are affine outside the box.
    pub tail_radius: Option<f64>,
    pub radial_points_per_decade: usize,
}

impl OperatorSpec {
    pub fn new(s: f64, measure: SpectralMeasure) -> Self {
        Self {
            s,
            measure,
            inner_cut: 1.0,
            tail_radius: None,
            radial_points_per_decade: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidSpec("s must lie in (0,1)".into()));
        }
        if !(self.inner_cut > 0.0 && self.inner_cut.is_finite()) {
            return Err(Error::InvalidSpec("inner_cut must be positive".into()));
        }
        if self.radial_points_per_decade == 0 {
            return Err(Error::InvalidSpec("radial_points_per_decade must be positive".into()));
        }
        if let Some(r) = self.tail_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidSpec("tail_radius must be positive".into()));
            }
        }
        let v = validate(&self.measure);
        if !v.is_empty() {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(Error::InvalidMeasure(msg.join("; ")));
        }
        Ok(())
    }

    /// Tail radius for a grid of spacing `h` and box diameter `diam`.
    pub fn resolved_tail_radius(&self, h: f64, diam: f64) -> Result<f64> {
        let r = self.tail_radius.unwrap_or(diam);
        if r <= self.inner_cut * h {
            return Err(Error::InvalidSpec(format!(
                "tail_radius {r} must exceed inner_cut·h = {}",
                self.inner_cut * h
            )));
        }
        Ok(r)
    }
}

/// Constant c_s with ∫_ℝ (2 - 2cos(rξ)) |r|^{-1-2s} dr = c_s |ξ|^{2s}.
pub fn stable_constant(s: f64) -> f64 {
    2.0 * PI / ((PI * s).sin() * libm::tgamma(2.0 * s + 1.0))
}

/// ∫ |ξ·θ|^{2s} dμ(θ), without normalisation.
pub fn symbol_raw(spec: &OperatorSpec, xi: Point) -> f64 {
    let two_s = 2.0 * spec.s;
    let dim = spec.measure.dim;
    spec.measure
        .directions()
        .iter()
        .map(|(theta, w)| {
            let dot = if dim == 1 {
                xi[0] * theta[0]
            } else {
                xi[0] * theta[0] + xi[1] * theta[1]
            };
            w * dot.abs().powf(two_s)
        })
        .sum()
}

/// Fourier multiplier A_L(ξ) ≥ 0 of the positive operator -L, so that
/// L u = F⁻¹[-A_L û].
pub fn symbol(spec: &OperatorSpec, xi: Point) -> f64 {
    stable_constant(spec.s) * symbol_raw(spec, xi)
}

/// The spec with its measure rescaled so that A_L averages to 1 over unit ξ.
pub fn unit_normalized(spec: &OperatorSpec) -> OperatorSpec {
    let samples = if spec.measure.dim == 1 { 1 } else { 360 };
    let mean = (0..samples)
        .map(|k| {
            let a = PI * k as f64 / samples as f64;
            symbol(spec, [a.cos(), if spec.measure.dim == 1 { 0.0 } else { a.sin() }])
        })
        .sum::<f64>()
        / samples as f64;
    OperatorSpec {
        measure: spec.measure.scaled(1.0 / mean),
        ..spec.clone()
    }
}

/// Accumulates `key = value` measure settings and atom lines.
#[derive(Clone, Debug, Default)]
pub struct MeasureBuilder {
    kind: Option<String>,
    atoms: Vec<(f64, f64)>,
    density: Option<String>,
    scale: Option<f64>,
    param: Option<f64>,
    samples: Option<usize>,
}

impl MeasureBuilder {
    pub fn is_empty(&self) -> bool {
        self.kind.is_none() && self.atoms.is_empty() && self.density.is_none()
    }

    /// Apply one setting; keys are `kind`, `atom`, `density`, `scale`, `param`, `samples`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "kind" => match value {
                "atomic" | "density" | "uniform" => self.kind = Some(value.to_string()),
                _ => return Err(format!("kind must be atomic|density|uniform, got `{value}`")),
            },
            "atom" => self.atoms.push(parse_pair(value)?),
            "density" => self.density = Some(value.to_string()),
            "scale" => self.scale = Some(parse_positive(value, "scale")?),
            "param" => self.param = Some(parse_finite(value)?),
            "samples" => {
                let n: usize = value.parse().map_err(|_| format!("samples must be an integer, got `{value}`"))?;
                if n < 4 || n % 2 == 1 || n > 1 << 16 {
                    return Err("samples must be even and in [4, 65536]".into());
                }
                self.samples = Some(n);
            }
            _ => return Err(format!("unknown measure key `{key}`")),
        }
        Ok(())
    }

    pub fn finish(&self, dim: usize) -> std::result::Result<SpectralMeasure, String> {
        let kind = self.kind.as_deref().ok_or("measure required")?;
        let samples = self.samples.unwrap_or(360);
        let scale = self.scale.unwrap_or(1.0);
        let m = match kind {
            "atomic" => {
                if self.atoms.is_empty() {
                    return Err("atomic measure needs at least one atom".into());
                }
                if dim == 1 {
                    if let Some(a) = self.atoms.iter().find(|a| a.0 != 1.0 && a.0 != -1.0) {
                        return Err(format!("1D atom sign must be +1 or -1, got {}", a.0));
                    }
                    SpectralMeasure::atomic_1d(&self.atoms)
                } else {
                    SpectralMeasure::atomic_2d(&self.atoms)
                }
                .with_tag("atomic")
            }
            "uniform" => SpectralMeasure::uniform(dim, scale, samples),
            "density" => {
                let name = self.density.as_deref().ok_or("density measure needs `density`")?;
                SpectralMeasure::density_catalog(dim, name, scale, self.param, samples).map_err(|e| e.to_string())?
            }
            _ => unreachable!(),
        };
        let v = validate(&m);
        if let Some(first) = v.first() {
            return Err(first.to_string());
        }
        Ok(m)
    }
}

fn parse_finite(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("expected a number, got `{v}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got `{v}`"))
    }
}

fn parse_positive(v: &str, what: &str) -> std::result::Result<f64, String> {
    let x = parse_finite(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{what} must be positive"))
    }
}

/// `(a, b)` with optional whitespace; `+`/`-` are accepted for ±1.
fn parse_pair(v: &str) -> std::result::Result<(f64, f64), String> {
    let inner = v
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("expected `(a, w)`, got `{v}`"))?;
    let mut parts = inner.split(',');
    let (a, w) = match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(w), None) => (a.trim(), w.trim()),
        _ => return Err(format!("expected two entries in `{v}`")),
    };
    let a = match a {
        "+" => 1.0,
        "-" => -1.0,
        _ => parse_finite(a)?,
    };
    Ok((a, parse_finite(w)?))
}

/// Parse a measure file: `key = value` lines plus bare `(a, w)` atom lines.
pub fn parse_measure(text: &str, dim: usize) -> Result<SpectralMeasure> {
    let mut b = MeasureBuilder::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let res = if line.starts_with('(') {
            b.set("atom", line)
        } else if let Some((k, v)) = line.split_once('=') {
            b.set(k.trim(), v.trim())
        } else {
            Err(format!("expected `key = value`, got `{line}`"))
        };
        res.map_err(|message| Error::Parse { line: no + 1, message })?;
    }
    b.finish(dim).map_err(|message| Error::Parse { line: 0, message })
}

/// Named measures used by the sweeps: every entry is valid and even.
pub fn catalog(dim: usize) -> Vec<SpectralMeasure> {
    if dim == 1 {
        vec![SpectralMeasure::axis_atomic(1), SpectralMeasure::uniform(1, 1.0, 2)]
    } else {
        vec![
            SpectralMeasure::axis_atomic(2),
            SpectralMeasure::atomic_2d(&[(30.0, 0.5), (210.0, 0.5), (120.0, 1.5), (300.0, 1.5)]).with_tag("oblique-atomic"),
            SpectralMeasure::uniform(2, 1.0, 360),
            SpectralMeasure::density_catalog(2, "cos2", 1.0, None, 360).expect("catalog entry"),
            SpectralMeasure::density_catalog(2, "axial", 1.0, None, 360).expect("catalog entry"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_pair_is_valid() {
        assert!(validate(&SpectralMeasure::atomic_1d(&[(1.0, 1.0), (-1.0, 1.0)])).is_empty());
    }

    #[test]
    fn missing_antipode_is_reported() {
        let v = validate(&SpectralMeasure::atomic_2d(&[(0.0, 1.0)]));
        assert!(v.iter().any(|x| x.invariant == "measure not even"));
    }

    #[test]
    fn negative_weight_is_reported() {
        let v = validate(&SpectralMeasure::atomic_1d(&[(1.0, -0.5), (-1.0, -0.5)]));
        assert!(v.iter().any(|x| x.invariant == "negative weight"));
    }

    #[test]
    fn non_unit_direction_is_reported() {
        let m = SpectralMeasure::new(
            2,
            vec![
                Atom { direction: [2.0, 0.0], weight: 1.0 },
                Atom { direction: [-2.0, 0.0], weight: 1.0 },
            ],
            None,
        );
        assert!(validate(&m).iter().any(|x| x.invariant == "direction not unit"));
    }

    #[test]
    fn odd_density_is_reported() {
        let mut values = vec![1.0; 8];
        values[1] = 3.0;
        let m = SpectralMeasure::new(2, vec![], Some(Density::Circle { values }));
        assert!(validate(&m).iter().any(|x| x.invariant == "density not even"));
    }

    #[test]
    fn ellipticity_axis_atoms() {
        let r = ellipticity(&SpectralMeasure::axis_atomic(2), 0.5, 720).unwrap();
        assert_relative_eq!(r.lambda1_est, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.total_mass, 4.0, epsilon = 1e-12);
        let r = ellipticity(&SpectralMeasure::axis_atomic(1), 0.3, 720).unwrap();
        assert_relative_eq!(r.lambda1_est, 2.0, epsilon = 1e-12);
        assert_eq!(r.sampled_directions, 2);
    }

    #[test]
    fn ellipticity_uniform_density() {
        // oracle: fine midpoint rule for ∫₀^{2π} |cos φ| dφ = 4
        let n = 200_000;
        let oracle: f64 = (0..n)
            .map(|k| ((k as f64 + 0.5) * 2.0 * PI / n as f64).cos().abs())
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert_relative_eq!(oracle, 4.0, epsilon = 1e-8);
        let r = ellipticity(&SpectralMeasure::uniform(2, 1.0, 360), 0.5, 720).unwrap();
        assert!((r.lambda1_est - oracle).abs() < 1e-3);
        assert!(r.total_mass >= r.lambda1_est);
    }

    #[test]
    fn ellipticity_rejects_empty() {
        let m = SpectralMeasure::atomic_1d(&[(1.0, 0.0), (-1.0, 0.0)]);
        assert!(matches!(ellipticity(&m, 0.5, 10), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn stable_constant_matches_quadrature() {
        // 2∫₀^∞ 2(1-cos r) r^{-1-2s} dr by substitution r = e^t and a fine trapezoid
        for s in [0.25, 0.5, 0.75] {
            let (a, b, n) = (-40.0f64, 8.0f64, 400_000);
            let dt = (b - a) / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let t = a + k as f64 * dt;
                let r = t.exp();
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * 4.0 * (1.0 - r.cos()) * r.powf(-2.0 * s);
            }
            // tail beyond e^b: ∫ 4 r^{-1-2s} dr, cosine part is negligible
            acc = acc * dt + 4.0 * b.exp().powf(-2.0 * s) / (2.0 * s);
            assert_relative_eq!(acc, stable_constant(s), max_relative = 2e-3);
        }
        assert_relative_eq!(stable_constant(0.5), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn symbol_examples() {
        let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
        assert_eq!(symbol(&spec, [0.0, 0.0]), 0.0);
        // two unit atoms, |ξ| = 2 each
        assert_relative_eq!(symbol_raw(&spec, [2.0, 0.0]), 4.0, epsilon = 1e-12);
        assert_relative_eq!(symbol(&spec, [2.0, 0.0]), 4.0 * stable_constant(0.5), epsilon = 1e-12);

        let s = 0.3;
        let spec = OperatorSpec::new(s, SpectralMeasure::axis_atomic(2));
        let xi = [1.7, -0.4];
        let direct = 2.0 * (1.7f64.powf(2.0 * s) + 0.4f64.powf(2.0 * s));
        assert_relative_eq!(symbol_raw(&spec, xi), direct, epsilon = 1e-12);
    }

    #[test]
    fn rays_fold_antipodes() {
        let r = SpectralMeasure::axis_atomic(2).rays();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|x| (x.1 - 2.0).abs() < 1e-15));
        let r = SpectralMeasure::uniform(2, 1.0, 360).rays();
        assert_eq!(r.len(), 180);
    }

    #[test]
    fn parse_measure_file() {
        let m = parse_measure("kind = atomic\n(0, 1)\n(180, 1)\n# comment\n", 2).unwrap();
        assert_relative_eq!(m.total_mass(), 2.0, epsilon = 1e-12);
        let m = parse_measure("kind = atomic\natom = (+, 0.5)\n(-1, 0.5)", 1).unwrap();
        assert_relative_eq!(m.total_mass(), 1.0);
        let m = parse_measure("kind = density\ndensity = cos2\nsamples = 64", 2).unwrap();
        assert_relative_eq!(m.total_mass(), 2.0 * PI, epsilon = 1e-12);
        let e = parse_measure("kind = atomic\n(0, 1)\n", 2).unwrap_err();
        assert!(e.to_string().contains("measure not even"));
        let e = parse_measure("kind = atomic\nfoo = 3\n", 2).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn catalog_is_valid() {
        for dim in [1, 2] {
            for m in catalog(dim) {
                assert!(validate(&m).is_empty(), "{}", m.tag());
            }
        }
    }
}
