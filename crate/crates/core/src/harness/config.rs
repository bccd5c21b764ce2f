//! Experiment configuration: a single JSON document, parsed leniently into
//! `serde_json::Value` first so every problem can be reported at once with
//! its field path.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::crystal::{CrystalParams, Parity};
use crate::dynamics::PropagationMethod;
use crate::modes::POLE_GUARD;

pub const MAX_SITES: usize = 200_000;
pub const MAX_TIME_STEPS: usize = 1_000_000;
pub const MAX_DEPTH: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig2Dispersion,
    Fig3SingleSite,
    Fig4Ratchet,
    SpectrumCompare,
    ModeValidate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2Dispersion,
        ExperimentKind::Fig3SingleSite,
        ExperimentKind::Fig4Ratchet,
        ExperimentKind::SpectrumCompare,
        ExperimentKind::ModeValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2Dispersion => "fig2_dispersion",
            ExperimentKind::Fig3SingleSite => "fig3_single_site",
            ExperimentKind::Fig4Ratchet => "fig4_ratchet",
            ExperimentKind::SpectrumCompare => "spectrum_compare",
            ExperimentKind::ModeValidate => "mode_validate",
        }
    }

    /// Accepts the snake-case name or the CLI subcommand spelling.
    pub fn parse(s: &str) -> Option<Self> {
        let alias = match s {
            "fig2" => "fig2_dispersion",
            "fig3" => "fig3_single_site",
            "fig4" => "fig4_ratchet",
            "spectrum-compare" => "spectrum_compare",
            "mode-validate" => "mode_validate",
            other => other,
        };
        Self::ALL.into_iter().find(|k| k.name() == alias)
    }

    pub fn has_panels(self) -> bool {
        matches!(self, ExperimentKind::Fig3SingleSite | ExperimentKind::Fig4Ratchet)
    }

    /// Weak-coupling lattice detuned by 0.1 ω_f.
    fn default_params(self) -> CrystalParams {
        CrystalParams { omega_f: 1.0, omega_0: 1.1, coupling: 0.01, parity: Parity::Minus, n_sites: 400 }
    }

    fn default_mode_count(self) -> usize {
        match self {
            ExperimentKind::ModeValidate => 10,
            _ => 40,
        }
    }

    fn default_panels(self) -> Vec<PanelConfig> {
        let panel = |name: &str, omega_0, coupling, n_sites, input_site, phase, stop, steps, window: (usize, usize)| PanelConfig {
            name: name.to_string(),
            params: CrystalParams { omega_f: 1.0, omega_0, coupling, parity: Parity::Minus, n_sites },
            input_site,
            phase,
            time_grid: TimeGrid::Uniform { start: 0.0, stop, steps },
            window: SiteRange { start: window.0, end: window.1 },
        };
        match self {
            // The weak panel sits at resonance; the strong panel uses the
            // same binary offset.
            ExperimentKind::Fig3SingleSite => vec![
                panel("weak", 1.0, 0.1, 5000, 0, None, 64.0, 1280, (0, 10)),
                panel("strong", 1.0, 2.0, 5000, 0, None, 20.0, 400, (0, 10)),
            ],
            ExperimentKind::Fig4Ratchet => vec![
                panel("omega0_zero", 0.0, 2.0, 2000, 20, Some(PI / 6.0), 4.0 * PI, 400, (10, 32)),
                panel("omega0_resonant", 1.0, 2.0, 2000, 20, Some(PI / 6.0), 4.0 * PI, 400, (10, 32)),
            ],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TimeGrid {
    /// `steps + 1` equally spaced times from `start` to `stop`.
    Uniform { start: f64, stop: f64, steps: usize },
    Explicit { times: Vec<f64> },
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::Uniform { start, stop, steps } => (0..=*steps)
                .map(|i| start + (stop - start) * (i as f64 / *steps as f64))
                .collect(),
            TimeGrid::Explicit { times } => times.clone(),
        }
    }
}

/// One propagation run inside a multi-panel experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelConfig {
    #[serde(skip)]
    pub name: String,
    pub params: CrystalParams,
    pub input_site: usize,
    /// Relative phase of a two-site input; `None` launches a single site.
    pub phase: Option<f64>,
    pub time_grid: TimeGrid,
    pub window: SiteRange,
}

/// Half-open site range `[start, end)` whose intensities are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SiteRange {
    pub start: usize,
    pub end: usize,
}

fn panels_by_name<S: serde::Serializer>(panels: &[PanelConfig], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(panels.len()))?;
    for p in panels {
        map.serialize_entry(&p.name, p)?;
    }
    map.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<CrystalParams>,
    #[serde(skip_serializing_if = "Vec::is_empty", serialize_with = "panels_by_name")]
    pub panels: Vec<PanelConfig>,
    pub mode_count: usize,
    /// Continued-fraction depth cap; `None` uses the default for the mode length.
    pub depth: Option<usize>,
    pub tolerance: f64,
    pub step_tolerance: f64,
    pub method: Option<PropagationMethod>,
    pub normalize_units: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Fully defaulted configuration for an experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            params: (!kind.has_panels()).then(|| kind.default_params()),
            panels: kind.default_panels(),
            mode_count: kind.default_mode_count(),
            depth: None,
            tolerance: 1e-15,
            step_tolerance: crate::dynamics::propagate::DEFAULT_STEP_TOLERANCE,
            method: None,
            normalize_units: true,
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Every problem found in a config document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Checker {
    errors: Vec<Violation>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Violation { path: path.into(), message: message.into() });
    }

    fn object<'a>(&mut self, value: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match value {
            Value::Object(m) => Some(m),
            _ => {
                self.fail(path, "expected an object");
                None
            }
        }
    }

    fn known_keys(&mut self, map: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(join(path, key), format!("unknown field (expected one of: {})", allowed.join(", ")));
            }
        }
    }

    fn f64(&mut self, map: &Map<String, Value>, path: &str, key: &str, default: f64) -> f64 {
        match map.get(key) {
            None => default,
            Some(v) => v.as_f64().unwrap_or_else(|| {
                self.fail(join(path, key), "expected a number");
                default
            }),
        }
    }

    fn usize(&mut self, map: &Map<String, Value>, path: &str, key: &str, default: usize) -> usize {
        match map.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) => n as usize,
                None => {
                    self.fail(join(path, key), "expected a non-negative integer");
                    default
                }
            },
        }
    }

    fn opt_f64(&mut self, map: &Map<String, Value>, path: &str, key: &str, default: Option<f64>) -> Option<f64> {
        match map.get(key) {
            None => default,
            Some(Value::Null) => None,
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    self.fail(join(path, key), "expected a number or null");
                    default
                }
            },
        }
    }

    fn bool(&mut self, map: &Map<String, Value>, path: &str, key: &str, default: bool) -> bool {
        match map.get(key) {
            None => default,
            Some(v) => v.as_bool().unwrap_or_else(|| {
                self.fail(join(path, key), "expected true or false");
                default
            }),
        }
    }

    fn params(&mut self, value: Option<&Value>, path: &str, defaults: CrystalParams, normalize: bool) -> CrystalParams {
        let mut p = defaults;
        if let Some(v) = value {
            if let Some(m) = self.object(v, path) {
                self.known_keys(m, path, &["omega_f", "omega_0", "coupling", "parity", "n_sites"]);
                p.omega_f = self.f64(m, path, "omega_f", p.omega_f);
                p.omega_0 = self.f64(m, path, "omega_0", p.omega_0);
                p.coupling = self.f64(m, path, "coupling", p.coupling);
                p.n_sites = self.usize(m, path, "n_sites", p.n_sites);
                match m.get("parity") {
                    None => {}
                    Some(Value::String(s)) if s == "plus" => p.parity = Parity::Plus,
                    Some(Value::String(s)) if s == "minus" => p.parity = Parity::Minus,
                    Some(_) => self.fail(join(path, "parity"), "expected \"plus\" or \"minus\""),
                }
            }
        }
        let before = self.errors.len();
        for (key, x) in [("omega_f", p.omega_f), ("omega_0", p.omega_0), ("coupling", p.coupling)] {
            if !x.is_finite() || x < 0.0 {
                self.fail(join(path, key), format!("must be a finite non-negative number (got {x})"));
            }
        }
        if !(2..=MAX_SITES).contains(&p.n_sites) {
            self.fail(join(path, "n_sites"), format!("must lie in [2, {MAX_SITES}] (got {})", p.n_sites));
        }
        if self.errors.len() == before {
            if normalize {
                if p.omega_f > 0.0 {
                    p.omega_0 /= p.omega_f;
                    p.coupling /= p.omega_f;
                    p.omega_f = 1.0;
                } else {
                    self.fail(join(path, "omega_f"), "must be positive when normalize_units is on");
                }
            }
            for v in p.violations() {
                self.fail(path, v);
            }
        }
        p
    }

    fn time_grid(&mut self, value: Option<&Value>, path: &str, default: TimeGrid) -> TimeGrid {
        let Some(v) = value else { return default };
        let Some(m) = self.object(v, path) else { return default };
        if let Some(times) = m.get("times") {
            self.known_keys(m, path, &["times"]);
            let tp = join(path, "times");
            let Some(list) = times.as_array() else {
                self.fail(tp, "expected an array of numbers");
                return default;
            };
            let mut out = Vec::with_capacity(list.len());
            for (i, t) in list.iter().enumerate() {
                match t.as_f64() {
                    Some(x) if x.is_finite() && x >= 0.0 => out.push(x),
                    _ => self.fail(format!("{tp}[{i}]"), "expected a finite non-negative number"),
                }
            }
            if out.is_empty() {
                self.fail(tp.clone(), "must contain at least one time");
            }
            if out.windows(2).any(|w| w[1] <= w[0]) {
                self.fail(tp, "times must be strictly increasing");
            }
            return TimeGrid::Explicit { times: out };
        }
        self.known_keys(m, path, &["start", "stop", "steps"]);
        let (d_start, d_stop, d_steps) = match default {
            TimeGrid::Uniform { start, stop, steps } => (start, stop, steps),
            TimeGrid::Explicit { .. } => (0.0, 1.0, 100),
        };
        let start = self.f64(m, path, "start", d_start);
        let stop = self.f64(m, path, "stop", d_stop);
        let steps = self.usize(m, path, "steps", d_steps);
        if !start.is_finite() || start < 0.0 {
            self.fail(join(path, "start"), "must be finite and non-negative");
        }
        if !stop.is_finite() || stop <= start {
            self.fail(join(path, "stop"), "must be finite and greater than start (time grid must increase)");
        }
        if !(1..=MAX_TIME_STEPS).contains(&steps) {
            self.fail(join(path, "steps"), format!("must lie in [1, {MAX_TIME_STEPS}]"));
        }
        TimeGrid::Uniform { start, stop, steps }
    }

    fn panel(&mut self, value: Option<&Value>, path: &str, default: PanelConfig, normalize: bool) -> PanelConfig {
        let empty = Map::new();
        let m = match value {
            Some(v) => self.object(v, path).unwrap_or(&empty),
            None => &empty,
        };
        self.known_keys(m, path, &["params", "input_site", "phase", "time_grid", "window"]);
        let params = self.params(m.get("params"), &join(path, "params"), default.params, normalize);
        let input_site = self.usize(m, path, "input_site", default.input_site);
        let phase = self.opt_f64(m, path, "phase", default.phase);
        let time_grid = self.time_grid(m.get("time_grid"), &join(path, "time_grid"), default.time_grid.clone());
        let mut window = default.window;
        if let Some(w) = m.get("window") {
            let wp = join(path, "window");
            if let Some(wm) = self.object(w, &wp) {
                self.known_keys(wm, &wp, &["start", "end"]);
                window = SiteRange {
                    start: self.usize(wm, &wp, "start", window.start),
                    end: self.usize(wm, &wp, "end", window.end),
                };
            }
        }
        let n = params.n_sites;
        let last_input = input_site + usize::from(phase.is_some());
        if last_input >= n {
            self.fail(join(path, "input_site"), format!("input occupies site {last_input}, beyond {n} sites"));
        }
        if let Some(phi) = phase {
            if !phi.is_finite() {
                self.fail(join(path, "phase"), "must be finite");
            }
        }
        if window.start >= window.end || window.end > n {
            let msg = format!("need start < end <= n_sites ({n}), got [{}, {})", window.start, window.end);
            self.fail(join(path, "window"), msg);
        }
        PanelConfig { name: default.name, params, input_site, phase, time_grid, window }
    }
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "experiment",
    "params",
    "panels",
    "mode_count",
    "depth",
    "tolerance",
    "step_tolerance",
    "method",
    "normalize_units",
    "output_dir",
];

/// Parses and range-checks a config. `expected` is the experiment implied
/// by the CLI subcommand; when given, the document may omit `experiment`.
pub fn validate_config_for(raw: &str, expected: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| ConfigError {
        violations: vec![Violation {
            path: String::new(),
            message: format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()),
        }],
    })?;
    validate_value(&value, expected)
}

/// [`validate_config_for`] without a subcommand.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    validate_config_for(raw, None)
}

pub fn validate_value(value: &Value, expected: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let mut ck = Checker { errors: Vec::new() };
    let Some(root) = ck.object(value, "") else {
        return Err(ConfigError { violations: ck.errors });
    };
    ck.known_keys(root, "", TOP_LEVEL_KEYS);

    let kind = match (root.get("experiment"), expected) {
        (None, Some(k)) => k,
        (None, None) => {
            ck.fail("experiment", "missing; expected one of the experiment names");
            return Err(ConfigError { violations: ck.errors });
        }
        (Some(Value::String(s)), _) => match ExperimentKind::parse(s) {
            Some(k) => {
                if let Some(e) = expected.filter(|e| *e != k) {
                    ck.fail("experiment", format!("config is for {k} but the command runs {e}"));
                }
                k
            }
            None => {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                ck.fail("experiment", format!("unknown experiment {s:?} (expected one of: {})", names.join(", ")));
                return Err(ConfigError { violations: ck.errors });
            }
        },
        (Some(_), _) => {
            ck.fail("experiment", "expected a string");
            return Err(ConfigError { violations: ck.errors });
        }
    };

    let mut cfg = ExperimentConfig::defaults(kind);
    cfg.normalize_units = ck.bool(root, "", "normalize_units", true);

    if kind.has_panels() {
        if root.contains_key("params") {
            ck.fail("params", format!("{kind} takes per-panel params under panels.<name>.params"));
        }
        let given = match root.get("panels") {
            None => None,
            Some(v) => ck.object(v, "panels"),
        };
        let names: Vec<String> = cfg.panels.iter().map(|p| p.name.clone()).collect();
        if let Some(g) = given {
            let allowed: Vec<&str> = names.iter().map(String::as_str).collect();
            ck.known_keys(g, "panels", &allowed);
        }
        cfg.panels = std::mem::take(&mut cfg.panels)
            .into_iter()
            .map(|p| {
                let path = format!("panels.{}", p.name);
                let v = given.and_then(|g| g.get(&p.name));
                ck.panel(v, &path, p, cfg.normalize_units)
            })
            .collect();
    } else {
        if root.contains_key("panels") {
            ck.fail("panels", format!("{kind} has no panels"));
        }
        let defaults = cfg.params.expect("single-lattice experiments have params");
        cfg.params = Some(ck.params(root.get("params"), "params", defaults, cfg.normalize_units));
    }

    cfg.mode_count = ck.usize(root, "", "mode_count", cfg.mode_count);
    if let Some(p) = cfg.params {
        if !(1..=p.n_sites).contains(&cfg.mode_count) {
            ck.fail("mode_count", format!("must lie in [1, n_sites = {}]", p.n_sites));
        }
    }
    match root.get("depth") {
        None | Some(Value::Null) => {}
        Some(v) => match v.as_u64() {
            Some(d) if (1..=MAX_DEPTH as u64).contains(&d) => cfg.depth = Some(d as usize),
            _ => ck.fail("depth", format!("expected an integer in [1, {MAX_DEPTH}]")),
        },
    }
    cfg.tolerance = ck.f64(root, "", "tolerance", cfg.tolerance);
    if !(cfg.tolerance > 0.0 && cfg.tolerance <= 1e-3) {
        ck.fail("tolerance", "must lie in (0, 1e-3]");
    }
    if cfg.tolerance < POLE_GUARD * 1e-3 {
        ck.fail("tolerance", "is below double-precision resolution");
    }
    cfg.step_tolerance = ck.f64(root, "", "step_tolerance", cfg.step_tolerance);
    if !(cfg.step_tolerance > 0.0 && cfg.step_tolerance <= 1e-3) {
        ck.fail("step_tolerance", "must lie in (0, 1e-3]");
    }
    match root.get("method") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) if s == "spectral_exact" => cfg.method = Some(PropagationMethod::SpectralExact),
        Some(Value::String(s)) if s == "stepped_integrator" => {
            cfg.method = Some(PropagationMethod::SteppedIntegrator)
        }
        Some(_) => ck.fail("method", "expected \"spectral_exact\", \"stepped_integrator\" or null"),
    }
    match root.get("output_dir") {
        None => {}
        Some(Value::String(s)) if !s.is_empty() => cfg.output_dir = PathBuf::from(s),
        Some(_) => ck.fail("output_dir", "expected a non-empty path string"),
    }

    if ck.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations: ck.errors })
    }
}
