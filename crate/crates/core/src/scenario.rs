//! Scenario files: a JSON description of a compartment model, named
//! initial histories, and run defaults.
//!
//! Compartments are numbered from 1 in scenario files; index 0 denotes
//! the environment, so a pipe with `"to": 0` is an outflow. Internally
//! everything is 0-based.
//!
//! ```json
//! {
//!   "m": 2,
//!   "grid": { "h": 0.01, "H": 2.0 },
//!   "pipes": [
//!     { "from": 1, "to": 2,
//!       "g": { "kind": "linear", "coeff": 1.0 },
//!       "mu": { "atoms": [[-1.0, 1.0]] } }
//!   ],
//!   "outflows": [ { "from": 2, "g": { "kind": "linear", "coeff": 0.5 } } ],
//!   "inflows":  [ { "to": 1, "coeff": { "base": 0.2,
//!                   "harmonics": [ { "amp": 0.2, "freq": 1.0, "phase": 0.0 } ] } } ],
//!   "nu": [ { "row": 1, "col": 2, "measure": { "atoms": [[-2.0, 0.2]] } } ],
//!   "initial": { "A": { "const": [1.0, 1.0] }, "B": { "const": [0.0, 2.0] } },
//!   "run": { "scheme": "heun", "step": 0.01, "T": 100.0 }
//! }
//! ```

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::history::HistoryFn;
use crate::integrator::Scheme;
use crate::measures::ScalarMeasure;
use crate::model::{CompartmentalModel, Harmonic, ModelBuilder, QuasiPeriodic, TransportFn};
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: CompartmentalModel,
    /// Named initial histories, ordered by name.
    pub initials: BTreeMap<String, HistoryFn>,
    pub run: RunDefaults,
}

/// Optional run section of a scenario; command-line flags override these.
#[derive(Debug, Clone, Default)]
pub struct RunDefaults {
    pub scheme: Option<Scheme>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub recovery_tol: Option<f64>,
    pub record_mass: Option<bool>,
    /// Known coefficient period for recurrence checks.
    pub period: Option<f64>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    pub merging: f64,
    pub emptying: f64,
    pub recurrence: f64,
    pub order_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { merging: 1e-3, emptying: 1e-3, recurrence: 1e-4, order_tol: 1e-6 }
    }
}

impl Scenario {
    /// The single initial history, or the one named `name`.
    pub fn initial(&self, name: Option<&str>) -> Result<&HistoryFn> {
        match name {
            Some(n) => self.initials.get(n).ok_or_else(|| {
                Error::Scenario(format!(
                    "no initial history named '{n}' (available: {})",
                    self.initials.keys().cloned().collect::<Vec<_>>().join(", ")
                ))
            }),
            None => {
                if self.initials.len() == 1 {
                    Ok(self.initials.values().next().expect("one entry"))
                } else {
                    Err(Error::Scenario(format!(
                        "scenario has {} initial histories; pick one by name ({})",
                        self.initials.len(),
                        self.initials.keys().cloned().collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
    }
}

// ---- raw serde layer -------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    m: usize,
    grid: RawGrid,
    #[serde(default)]
    pipes: Vec<RawPipe>,
    #[serde(default)]
    outflows: Vec<RawOutflow>,
    #[serde(default)]
    inflows: Vec<RawInflow>,
    #[serde(default)]
    nu: Vec<RawNuEntry>,
    initial: serde_json::Value,
    #[serde(default)]
    run: Option<RawRun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    h: f64,
    #[serde(rename = "H")]
    horizon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipe {
    from: usize,
    to: usize,
    g: RawTransport,
    #[serde(default)]
    mu: Option<RawMeasure>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutflow {
    from: usize,
    g: RawTransport,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInflow {
    to: usize,
    coeff: RawCoeff,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNuEntry {
    row: usize,
    col: usize,
    measure: RawMeasure,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCoeff {
    Const(f64),
    Full {
        base: f64,
        #[serde(default)]
        harmonics: Vec<Harmonic>,
    },
}

impl RawCoeff {
    fn build(self) -> QuasiPeriodic {
        match self {
            RawCoeff::Const(v) => QuasiPeriodic::constant(v),
            RawCoeff::Full { base, harmonics } => QuasiPeriodic { base, harmonics },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransport {
    kind: String,
    coeff: RawCoeff,
    #[serde(default)]
    b: Option<f64>,
}

impl RawTransport {
    fn build(self, at: &str) -> Result<TransportFn> {
        let coeff = self.coeff.build();
        match self.kind.as_str() {
            "linear" => {
                if self.b.is_some() {
                    return Err(Error::Scenario(format!(
                        "{at}: field 'b' only applies to saturating transport"
                    )));
                }
                Ok(TransportFn::linear(coeff))
            }
            "saturating" => {
                let b = self.b.ok_or_else(|| {
                    Error::Scenario(format!("{at}: saturating transport needs field 'b'"))
                })?;
                if !(b >= 0.0) {
                    return Err(Error::Scenario(format!(
                        "{at}: saturation parameter must be nonnegative, got {b}"
                    )));
                }
                Ok(TransportFn::saturating(coeff, b))
            }
            "zero" => Ok(TransportFn::zero()),
            other => Err(Error::Scenario(format!(
                "{at}: unknown transport kind '{other}' (expected linear, saturating, or zero)"
            ))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    density: Option<RawDensity>,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    tail: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    kind: String,
    #[serde(default)]
    rate: Option<f64>,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    b: Option<f64>,
}

impl RawMeasure {
    fn build(self, grid: Grid, at: &str) -> Result<ScalarMeasure> {
        if let Some(h) = self.horizon {
            if (h - grid.horizon()).abs() > 1e-9 {
                return Err(Error::Scenario(format!(
                    "{at}: measure horizon {h} differs from the grid horizon {}",
                    grid.horizon()
                )));
            }
        }
        let mut measure = ScalarMeasure::from_atoms(grid, &self.atoms)
            .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
        if let Some(dens) = self.density {
            let part = match dens.kind.as_str() {
                "exp" => {
                    let rate = dens.rate.ok_or_else(|| {
                        Error::Scenario(format!("{at}: exp density needs field 'rate'"))
                    })?;
                    ScalarMeasure::exp_density(grid, rate)
                }
                "uniform" => {
                    let (a, b) = match (dens.a, dens.b) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(Error::Scenario(format!(
                                "{at}: uniform density needs fields 'a' and 'b'"
                            )))
                        }
                    };
                    ScalarMeasure::uniform_density(grid, a, b)
                }
                "none" => Ok(ScalarMeasure::zero(grid)),
                other => Err(Error::BadArgument(format!(
                    "unknown density kind '{other}' (expected exp, uniform, or none)"
                ))),
            }
            .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
            measure = measure.add(&part).map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
        }
        if let Some(tail) = self.tail {
            measure = measure.with_tail(tail);
        }
        Ok(measure)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    step: Option<f64>,
    #[serde(rename = "T", default)]
    horizon: Option<f64>,
    #[serde(default)]
    recovery_tol: Option<f64>,
    #[serde(default)]
    record_mass: Option<bool>,
    #[serde(default)]
    period: Option<f64>,
    #[serde(default)]
    thresholds: Option<RawThresholds>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    #[serde(default)]
    merging: Option<f64>,
    #[serde(default)]
    emptying: Option<f64>,
    #[serde(default)]
    recurrence: Option<f64>,
    #[serde(default)]
    order_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistory {
    #[serde(default)]
    #[serde(rename = "const")]
    constant: Option<Vec<f64>>,
    #[serde(default)]
    samples: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pre: Option<Vec<f64>>,
}

impl RawHistory {
    fn build(self, grid: Grid, m: usize, at: &str) -> Result<HistoryFn> {
        match (self.constant, self.samples) {
            (Some(values), None) => {
                if values.len() != m {
                    return Err(Error::Scenario(format!(
                        "{at}: constant history has {} components, model has {m}",
                        values.len()
                    )));
                }
                if self.pre.is_some() {
                    return Err(Error::Scenario(format!(
                        "{at}: 'pre' only applies to sampled histories"
                    )));
                }
                Ok(HistoryFn::constant(grid, &values))
            }
            (None, Some(samples)) => {
                if samples.len() != m {
                    return Err(Error::Scenario(format!(
                        "{at}: sampled history has {} components, model has {m}",
                        samples.len()
                    )));
                }
                let pre = match self.pre {
                    Some(pre) => {
                        if pre.len() != m {
                            return Err(Error::Scenario(format!(
                                "{at}: 'pre' has {} components, model has {m}",
                                pre.len()
                            )));
                        }
                        pre
                    }
                    None => samples
                        .iter()
                        .map(|row| row.first().copied().unwrap_or(0.0))
                        .collect(),
                };
                HistoryFn::from_samples(grid, samples, pre)
                    .map_err(|e| Error::Scenario(format!("{at}: {e}")))
            }
            (Some(_), Some(_)) => Err(Error::Scenario(format!(
                "{at}: history must be either 'const' or 'samples', not both"
            ))),
            (None, None) => Err(Error::Scenario(format!(
                "{at}: history needs 'const' or 'samples'"
            ))),
        }
    }
}

/// Convert a 1-based scenario compartment index (error context in `at`).
fn index0(i: usize, m: usize, at: &str) -> Result<usize> {
    if i >= 1 && i <= m {
        Ok(i - 1)
    } else {
        Err(Error::Scenario(format!("{at}: compartment index {i} out of range 1..={m}")))
    }
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(text)
        .map_err(|e| Error::Scenario(format!("parse error: {e}")))?;

    let grid = Grid::new(raw.grid.h, raw.grid.horizon)
        .map_err(|e| Error::Scenario(format!("grid: {e}")))?;
    let m = raw.m;
    if m == 0 {
        return Err(Error::Scenario("m must be at least 1".into()));
    }
    let mut builder = ModelBuilder::new(m, grid);

    for (k, pipe) in raw.pipes.into_iter().enumerate() {
        let at = format!("pipes[{k}]");
        let src = index0(pipe.from, m, &at)?;
        let g = pipe.g.build(&at)?;
        if pipe.to == 0 {
            if pipe.mu.is_some() {
                return Err(Error::Scenario(format!(
                    "{at}: outflow rows (to = 0) carry no transit measure"
                )));
            }
            builder = builder.outflow(src, g).map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
        } else {
            let dest = index0(pipe.to, m, &at)?;
            let mu = pipe
                .mu
                .ok_or_else(|| Error::Scenario(format!("{at}: pipe needs a transit measure 'mu'")))?
                .build(grid, &at)?;
            builder = builder
                .pipe(dest, src, g, mu)
                .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
        }
    }
    for (k, out) in raw.outflows.into_iter().enumerate() {
        let at = format!("outflows[{k}]");
        let src = index0(out.from, m, &at)?;
        let g = out.g.build(&at)?;
        builder = builder.outflow(src, g).map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
    }
    for (k, inflow) in raw.inflows.into_iter().enumerate() {
        let at = format!("inflows[{k}]");
        let dest = index0(inflow.to, m, &at)?;
        builder = builder
            .inflow(dest, inflow.coeff.build())
            .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
    }
    for (k, entry) in raw.nu.into_iter().enumerate() {
        let at = format!("nu[{k}]");
        let row = index0(entry.row, m, &at)?;
        let col = index0(entry.col, m, &at)?;
        let measure = entry.measure.build(grid, &at)?;
        builder = builder
            .nu_entry(row, col, measure)
            .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
    }
    let model = builder.build().map_err(|e| Error::Scenario(format!("model: {e}")))?;

    // `initial` is either one history literal or a {name: literal} map.
    let mut initials = BTreeMap::new();
    let looks_like_literal = raw
        .initial
        .as_object()
        .map(|o| o.contains_key("const") || o.contains_key("samples"))
        .unwrap_or(false);
    if looks_like_literal {
        let hist: RawHistory = serde_json::from_value(raw.initial)
            .map_err(|e| Error::Scenario(format!("initial: {e}")))?;
        initials.insert("default".to_string(), hist.build(grid, m, "initial")?);
    } else if let Some(map) = raw.initial.as_object() {
        if map.is_empty() {
            return Err(Error::Scenario("initial: at least one history is required".into()));
        }
        for (name, value) in map {
            let at = format!("initial.{name}");
            let hist: RawHistory = serde_json::from_value(value.clone())
                .map_err(|e| Error::Scenario(format!("{at}: {e}")))?;
            initials.insert(name.clone(), hist.build(grid, m, &at)?);
        }
    } else {
        return Err(Error::Scenario(
            "initial: expected a history literal or a map of named histories".into(),
        ));
    }

    let mut run = RunDefaults::default();
    if let Some(raw_run) = raw.run {
        if let Some(s) = raw_run.scheme {
            run.scheme = Some(s.parse().map_err(|e| Error::Scenario(format!("run.scheme: {e}")))?);
        }
        run.step = raw_run.step;
        run.horizon = raw_run.horizon;
        run.recovery_tol = raw_run.recovery_tol;
        run.record_mass = raw_run.record_mass;
        run.period = raw_run.period;
        if let Some(t) = raw_run.thresholds {
            let d = Thresholds::default();
            run.thresholds = Thresholds {
                merging: t.merging.unwrap_or(d.merging),
                emptying: t.emptying.unwrap_or(d.emptying),
                recurrence: t.recurrence.unwrap_or(d.recurrence),
                order_tol: t.order_tol.unwrap_or(d.order_tol),
            };
        }
    }

    Ok(Scenario { model, initials, run })
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Scenario(format!("cannot read scenario file {}: {e}", path.display()))
    })?;
    parse_scenario_str(&text)
}

/// Parse a standalone history literal (the same shape used for scenario
/// initial data): either `{"const": [...]}` or `{"samples": ..., "pre": ...}`.
pub fn parse_history_literal(grid: Grid, m: usize, text: &str) -> Result<HistoryFn> {
    let raw: RawHistory = serde_json::from_str(text).map_err(|e| {
        Error::Scenario(format!("history literal: {e} (line {}, column {})", e.line(), e.column()))
    })?;
    raw.build(grid, m, "history literal")
}

/// Parse a standalone measure literal (the same shape used for `mu` and
/// `nu` entries inside scenarios). Because there is no surrounding grid
/// section, the literal must carry its own `horizon`, and the caller
/// supplies the sample spacing `h`.
pub fn parse_measure_literal(h: f64, text: &str) -> Result<ScalarMeasure> {
    let raw: RawMeasure = serde_json::from_str(text).map_err(|e| {
        Error::Scenario(format!("measure literal: {e} (line {}, column {})", e.line(), e.column()))
    })?;
    let horizon = raw.horizon.ok_or_else(|| {
        Error::Scenario("measure literal: field 'horizon' is required without a grid".into())
    })?;
    let grid = Grid::new(h, horizon)?;
    raw.build(grid, "measure literal")
}
