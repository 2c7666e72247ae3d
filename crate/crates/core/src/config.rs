//! Plain-text run configuration.
//!
//! One `key = value` per line, `#` starts a comment. Measure settings use the
//! `measure.` prefix (`measure.kind`, `measure.atom`, ...) or `measure.file`,
//! which names a measure file relative to the config file. Keys not listed in
//! [`KEYS`] are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::grid::Shape;
use crate::local::CoefKind;
use crate::measure::{parse_measure, MeasureBuilder, OperatorSpec, SpectralMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Symbol,
    Apply,
    Solve,
    Picard,
    Heatkernel,
    Maxprin,
    Regularity,
    Boundary,
    Liouville,
    Barrier,
}

impl Problem {
    pub fn parse(v: &str) -> Option<Self> {
        Some(match v {
            "symbol" => Self::Symbol,
            "apply" => Self::Apply,
            "solve" => Self::Solve,
            "picard" => Self::Picard,
            "heatkernel" => Self::Heatkernel,
            "maxprin" | "maxprin-check" => Self::Maxprin,
            "regularity" => Self::Regularity,
            "boundary" => Self::Boundary,
            "liouville" => Self::Liouville,
            "barrier" => Self::Barrier,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Symbol => "symbol",
            Self::Apply => "apply",
            Self::Solve => "solve",
            Self::Picard => "picard",
            Self::Heatkernel => "heatkernel",
            Self::Maxprin => "maxprin",
            Self::Regularity => "regularity",
            Self::Boundary => "boundary",
            Self::Liouville => "liouville",
            Self::Barrier => "barrier",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    One,
    Gaussian,
    Bumps,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefConfig {
    pub kind: String,
    pub alpha: f64,
    pub min: f64,
    pub max: f64,
}

/// Fully resolved configuration; every field has a value after parsing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: Option<Problem>,
    pub dim: usize,
    pub points: usize,
    pub halfwidth: f64,
    pub domain: Shape,
    pub s: f64,
    pub measure: SpectralMeasure,
    pub normalize: bool,
    pub inner_cut: f64,
    pub tail_radius: Option<f64>,
    pub radial_points_per_decade: usize,
    pub nonlocal: bool,
    /// `None` drops the local term.
    pub coef: Option<CoefConfig>,
    pub source: Source,
    pub method: Method,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub trials: usize,
    pub seed: u64,
    pub heat_t: f64,
    pub heat_delta: f64,
    pub heat_halfwidth: f64,
    pub heat_points: usize,
    pub reg_orders: Vec<f64>,
    pub reg_gamma: f64,
    pub reg_rough_source: bool,
    pub liouville_boxes: Vec<f64>,
    pub liouville_spacing: f64,
    pub barrier_beta: f64,
    pub barrier_lambdas: Vec<f64>,
    pub out: String,
}

/// Accepted keys with their documented defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "(set by the subcommand)"),
    ("dim", "1"),
    ("points", "129"),
    ("halfwidth", "1.0"),
    ("domain", "box | interval | ball (default box)"),
    ("domain.lo", "-0.5"),
    ("domain.hi", "0.5"),
    ("domain.radius", "0.5"),
    ("s", "required"),
    ("measure.kind", "atomic | density | uniform"),
    ("measure.atom", "(a, w), repeatable"),
    ("measure.density", "catalog density name"),
    ("measure.scale", "1.0"),
    ("measure.param", "density parameter"),
    ("measure.samples", "360"),
    ("measure.file", "path to a measure file"),
    ("normalize", "false"),
    ("inner_cut", "1.0"),
    ("tail_radius", "box diameter"),
    ("radial_points_per_decade", "32"),
    ("nonlocal", "true"),
    ("coef.kind", "constant | smooth-sine | weierstrass-alpha | none"),
    ("coef.alpha", "0.5"),
    ("coef.min", "1.0"),
    ("coef.max", "coef.min"),
    ("source", "one | gaussian | bumps"),
    ("method", "direct | picard"),
    ("lambda", "0 (auto for picard)"),
    ("tol", "1e-8"),
    ("max_iter", "50000"),
    ("trials", "20"),
    ("seed", "0"),
    ("heat.t", "1.0"),
    ("heat.delta", "0.25 * 2s"),
    ("heat.halfwidth", "32.0"),
    ("heat.points", "257"),
    ("reg.orders", "0.5, 1, 1.5, 2"),
    ("reg.gamma", "0.5"),
    ("reg.rough_source", "false"),
    ("liouville.boxes", "512, 1024, 2048"),
    ("liouville.spacing", "0.5"),
    ("barrier.beta", "1.0"),
    ("barrier.lambdas", "10, 40, 160"),
    ("out", "out"),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    /// 0 when the error is not tied to one line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.key.is_empty()) {
            (0, true) => write!(f, "{}", self.message),
            (0, false) => write!(f, "{}: {}", self.key, self.message),
            (l, _) => write!(f, "line {l}: {}: {}", self.key, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn contains(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.message.contains(needle))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            line: 0,
            key: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        }])
    })?;
    parse_config_str(&text, path.parent())
}

/// Parses config text; `base` resolves `measure.file`, which is an error when
/// `base` is `None`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<RunConfig, ConfigErrors> {
    let mut p = Parser::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            p.err(no + 1, "", format!("expected `key = value`, got `{line}`"));
            continue;
        };
        p.set(no + 1, k.trim(), v.trim(), base);
    }
    p.finish()
}

#[derive(Default)]
struct Parser {
    values: BTreeMap<String, (usize, String)>,
    measure: MeasureBuilder,
    measure_line: usize,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn set(&mut self, line: usize, key: &str, value: &str, base: Option<&Path>) {
        if key == "measure.file" {
            self.load_measure_file(line, value, base);
            return;
        }
        if let Some(sub) = key.strip_prefix("measure.") {
            self.measure_line = self.measure_line.max(line);
            if let Err(m) = self.measure.set(sub, value) {
                self.err(line, key, m);
            }
            return;
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            self.err(line, key, "unknown key");
            return;
        }
        if self.values.insert(key.to_string(), (line, value.to_string())).is_some() {
            self.err(line, key, "duplicate key");
        }
    }

    fn load_measure_file(&mut self, line: usize, value: &str, base: Option<&Path>) {
        let Some(base) = base else {
            self.err(line, "measure.file", "measure files are not available here");
            return;
        };
        // the dimension is not known yet, so parse lazily in finish()
        let path = base.join(value);
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                self.values.insert("measure.file".into(), (line, text));
            }
            Err(e) => self.err(line, "measure.file", format!("cannot read {}: {e}", path.display())),
        }
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.values.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        match self.take(key) {
            None => default,
            Some((line, v)) => v.parse().unwrap_or_else(|_| {
                self.err(line, key, format!("cannot parse `{v}`"));
                default
            }),
        }
    }

    fn float(&mut self, key: &str, default: f64) -> (usize, f64) {
        match self.take(key) {
            None => (0, default),
            Some((line, v)) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => (line, x),
                _ => {
                    self.err(line, key, format!("expected a finite number, got `{v}`"));
                    (line, default)
                }
            },
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let (line, x) = self.float(key, default);
        if x <= 0.0 {
            self.err(line, key, format!("{key} must be positive"));
        }
        x
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.take(key) {
            None => default.to_vec(),
            Some((line, v)) => {
                let parsed: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(xs) if !xs.is_empty() && xs.iter().all(|x| x.is_finite() && *x > 0.0) => xs,
                    _ => {
                        self.err(line, key, format!("expected a list of positive numbers, got `{v}`"));
                        default.to_vec()
                    }
                }
            }
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => {
                    self.err(line, key, format!("expected true or false, got `{v}`"));
                    default
                }
            },
        }
    }

    fn finish(mut self) -> Result<RunConfig, ConfigErrors> {
        let problem = match self.take("problem") {
            None => None,
            Some((line, v)) => {
                let p = Problem::parse(&v);
                if p.is_none() {
                    self.err(line, "problem", format!("unknown problem `{v}`"));
                }
                p
            }
        };
        let (dim_line, dim) = match self.take("dim") {
            None => (0, 1),
            Some((line, v)) => (line, v.parse().unwrap_or(0)),
        };
        let dim = if dim == 1 || dim == 2 {
            dim
        } else {
            self.err(dim_line, "dim", "dim must be 1 or 2");
            1
        };
        let points: usize = self.num("points", 129);
        if !(3..=1 << 16).contains(&points) {
            self.err(0, "points", "points must lie in [3, 65536]");
        }
        let halfwidth = self.positive("halfwidth", 1.0);
        let domain = self.domain(dim, halfwidth);

        let (s_line, s) = self.float("s", f64::NAN);
        if s.is_nan() && s_line == 0 {
            self.err(0, "s", "s required");
        } else if !(s > 0.0 && s < 1.0) {
            self.err(s_line, "s", "s must lie in (0,1)");
        }

        let measure = match (self.take("measure.file"), self.measure.is_empty()) {
            (Some((line, _)), false) => {
                self.err(line, "measure.file", "measure.file conflicts with inline measure keys");
                None
            }
            (Some((line, text)), true) => match parse_measure(&text, dim) {
                Ok(m) => Some(m),
                Err(e) => {
                    self.err(line, "measure.file", e.to_string());
                    None
                }
            },
            (None, _) => match self.measure.finish(dim) {
                Ok(m) => Some(m),
                Err(m) => {
                    self.err(self.measure_line, "measure", m);
                    None
                }
            },
        };

        let normalize = self.flag("normalize", false);
        let inner_cut = self.positive("inner_cut", 1.0);
        let tail_radius = self.values.contains_key("tail_radius").then(|| self.positive("tail_radius", 1.0));
        let radial_points_per_decade: usize = self.num("radial_points_per_decade", 32);
        if radial_points_per_decade == 0 {
            self.err(0, "radial_points_per_decade", "radial_points_per_decade must be positive");
        }
        let nonlocal = self.flag("nonlocal", true);
        let coef = self.coef();
        if !nonlocal && coef.is_none() {
            self.err(0, "nonlocal", "the operator has no terms (nonlocal = false and coef.kind = none)");
        }

        let source = match self.take("source") {
            None => Source::One,
            Some((line, v)) => match v.as_str() {
                "one" => Source::One,
                "gaussian" => Source::Gaussian,
                "bumps" => Source::Bumps,
                _ => {
                    self.err(line, "source", format!("source must be one|gaussian|bumps, got `{v}`"));
                    Source::One
                }
            },
        };
        let method = match self.take("method") {
            None => Method::Direct,
            Some((line, v)) => match v.as_str() {
                "direct" => Method::Direct,
                "picard" => Method::Picard,
                _ => {
                    self.err(line, "method", format!("method must be direct|picard, got `{v}`"));
                    Method::Direct
                }
            },
        };
        let (l_line, lambda) = self.float("lambda", 0.0);
        if lambda < 0.0 {
            self.err(l_line, "lambda", "lambda must be nonnegative");
        }
        let tol = self.positive("tol", 1e-8);
        let max_iter: usize = self.num("max_iter", crate::solve::DEFAULT_MAX_ITER);
        let trials: usize = self.num("trials", 20);
        let seed: u64 = self.num("seed", 0);

        let heat_t = self.positive("heat.t", 1.0);
        let order = if nonlocal && s > 0.0 && s < 1.0 { 2.0 * s } else { 2.0 };
        let (d_line, heat_delta) = self.float("heat.delta", 0.25 * order);
        if !(heat_delta > 0.0 && heat_delta < order) {
            self.err(d_line, "heat.delta", "heat.delta must lie in (0, 2s)");
        }
        let heat_halfwidth = self.positive("heat.halfwidth", 32.0);
        let heat_points: usize = self.num("heat.points", 257);
        if heat_points % 2 == 0 || heat_points < 3 {
            self.err(0, "heat.points", "heat.points must be odd and at least 3");
        }

        let reg_orders = self.list("reg.orders", &[0.5, 1.0, 1.5, 2.0]);
        if reg_orders.iter().any(|&b| b > 2.0) {
            self.err(0, "reg.orders", "orders must lie in (0, 2]");
        }
        let (g_line, reg_gamma) = self.float("reg.gamma", 0.5);
        if !(reg_gamma > 0.0 && reg_gamma <= 1.0) {
            self.err(g_line, "reg.gamma", "reg.gamma must lie in (0, 1]");
        }
        let reg_rough_source = self.flag("reg.rough_source", false);
        let liouville_boxes = self.list("liouville.boxes", &[512.0, 1024.0, 2048.0]);
        let liouville_spacing = self.positive("liouville.spacing", 0.5);
        let barrier_beta = self.positive("barrier.beta", 1.0);
        let barrier_lambdas = self.list("barrier.lambdas", &[10.0, 40.0, 160.0]);
        let out = self.take("out").map_or_else(|| "out".to_string(), |v| v.1);

        debug_assert!(self.values.is_empty(), "unconsumed keys: {:?}", self.values.keys());
        if !self.errors.is_empty() {
            self.errors.sort_by_key(|e| e.line);
            return Err(ConfigErrors(self.errors));
        }
        Ok(RunConfig {
            problem,
            dim,
            points,
            halfwidth,
            domain,
            s,
            measure: measure.expect("checked above"),
            normalize,
            inner_cut,
            tail_radius,
            radial_points_per_decade,
            nonlocal,
            coef,
            source,
            method,
            lambda,
            tol,
            max_iter,
            trials,
            seed,
            heat_t,
            heat_delta,
            heat_halfwidth,
            heat_points,
            reg_orders,
            reg_gamma,
            reg_rough_source,
            liouville_boxes,
            liouville_spacing,
            barrier_beta,
            barrier_lambdas,
            out,
        })
    }

    fn domain(&mut self, dim: usize, hw: f64) -> Shape {
        let kind = self.take("domain");
        let (lo_line, lo) = self.float("domain.lo", -0.5);
        let (_, hi) = self.float("domain.hi", 0.5);
        let radius = self.positive("domain.radius", 0.5);
        let (line, name) = kind.unwrap_or((0, "box".into()));
        let shape = match (name.as_str(), dim) {
            ("box", 1) => Shape::Interval { lo: -hw, hi: hw },
            ("box", _) => Shape::Rect { lo: [-hw; 2], hi: [hw; 2] },
            ("interval", 1) => Shape::Interval { lo, hi },
            ("interval", _) => Shape::Rect { lo: [lo; 2], hi: [hi; 2] },
            ("ball", 1) => Shape::Interval { lo: -radius, hi: radius },
            ("ball", _) => Shape::Ball { center: [0.0; 2], radius },
            _ => {
                self.err(line, "domain", format!("domain must be box|interval|ball, got `{name}`"));
                return Shape::Interval { lo: -hw, hi: hw };
            }
        };
        if name == "interval" && !(lo < hi && lo >= -hw && hi <= hw) {
            self.err(lo_line, "domain.lo", "need -halfwidth ≤ domain.lo < domain.hi ≤ halfwidth");
        }
        if name == "ball" && radius > hw {
            self.err(0, "domain.radius", "domain.radius must not exceed halfwidth");
        }
        shape
    }

    fn coef(&mut self) -> Option<CoefConfig> {
        let (line, kind) = self.take("coef.kind").unwrap_or((0, "constant".into()));
        let (a_line, alpha) = self.float("coef.alpha", 0.5);
        let (m_line, min) = self.float("coef.min", 1.0);
        let (_, max) = self.float("coef.max", min);
        if kind == "none" {
            return None;
        }
        if kind.parse::<CoefKind>().is_err() {
            self.err(line, "coef.kind", format!("unknown coefficient kind `{kind}`"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            self.err(a_line, "coef.alpha", "α must lie in (0,1)");
        }
        if !(min > 0.0 && min <= max) {
            self.err(m_line, "coef.min", "need 0 < coef.min ≤ coef.max");
        }
        Some(CoefConfig { kind, alpha, min, max })
    }
}

impl RunConfig {
    pub fn spec(&self) -> Option<OperatorSpec> {
        if !self.nonlocal {
            return None;
        }
        let mut spec = OperatorSpec::new(self.s, self.measure.clone());
        spec.inner_cut = self.inner_cut;
        spec.tail_radius = self.tail_radius;
        spec.radial_points_per_decade = self.radial_points_per_decade;
        Some(if self.normalize {
            crate::measure::unit_normalized(&spec)
        } else {
            spec
        })
    }

    /// Canonical text of the resolved config, used for hashing.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "s = 0.5\nmeasure.kind = atomic\nmeasure.atom = (+, 1)\nmeasure.atom = (-, 1)\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, None).unwrap();
        assert_eq!(c.dim, 1);
        assert_eq!(c.points, 129);
        assert_eq!(c.trials, 20);
        assert_eq!(c.heat_delta, 0.25);
        assert_eq!(c.coef.as_ref().unwrap().kind, "constant");
        assert_eq!(c.measure.total_mass(), 2.0);
    }

    #[test]
    fn s_out_of_range() {
        let e = parse_config_str(&MINIMAL.replace("0.5", "1.5"), None).unwrap_err();
        assert!(e.contains("s must lie in (0,1)"));
        assert_eq!(e.0[0].line, 1);
    }

    #[test]
    fn measure_is_required() {
        let e = parse_config_str("s = 0.5\n", None).unwrap_err();
        assert!(e.contains("measure required"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config_str(&format!("{MINIMAL}colour = blue\n"), None).unwrap_err();
        assert_eq!(e.0[0].key, "colour");
        assert_eq!(e.0[0].line, 5);
    }

    #[test]
    fn all_errors_are_collected() {
        let e = parse_config_str("s = 2\ncoef.alpha = 1.2\ndim = 3\n", None).unwrap_err();
        assert!(e.0.len() >= 3, "{e}");
    }
}
