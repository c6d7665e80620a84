//! Scenario files (TOML). See `docs/scenario-format.md` for the field reference.

use std::path::Path;

use serde::Deserialize;
use toml::{Spanned, Value};

use crate::dynamics::ProtocolKind;
use crate::error::{Error, Result};
use crate::families::{affine_kernel, csma_kernel, revision_kernel, CsmaLimit, CsmaParams};
use crate::kernel::{KernelMode, TransitionKernelSpec};
use crate::payoff::{PairwisePayoff, PayoffSpec};
use crate::scalar::Scalar;
use crate::scenario::{Horizon, ScenarioModel, DEFAULT_PROBE_SEED};
use crate::simplex::SimplexVector;
use crate::space::StateSpace;

/// A scenario file after syntax checking, before semantic validation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    #[serde(skip)]
    source: String,
    pub name: Option<String>,
    pub description: Option<String>,
    pub states: Vec<String>,
    pub types: Option<Vec<String>>,
    pub actions: Spanned<Value>,
    pub horizon: RawHorizon,
    pub m0: Spanned<Value>,
    pub type_mass: Option<Vec<f64>>,
    pub kernel: RawKernel,
    #[serde(default)]
    pub payoff: RawPayoff,
    pub simulation: Option<RawSimulation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHorizon {
    pub stages: Option<usize>,
    pub end: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKernel {
    pub family: String,
    pub mode: Option<String>,
    pub table: Option<Spanned<Value>>,
    pub base: Option<Spanned<Value>>,
    pub slope: Option<Spanned<Value>>,
    pub protocol: Option<String>,
    pub temperature: Option<f64>,
    pub mutation: Option<f64>,
    pub gamma: Option<f64>,
    pub beta2: Option<f64>,
    pub beta3: Option<f64>,
    pub attempt: Option<Vec<f64>>,
    pub nodes: Option<usize>,
    pub limit: Option<CsmaLimit>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPayoff {
    pub running: Option<Spanned<Value>>,
    pub terminal: Option<Spanned<Value>>,
    pub pairwise: Option<Spanned<Value>>,
    pub terminal_pairwise: Option<Spanned<Value>>,
    pub matrix: Option<Spanned<Value>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub clock_rate: Option<f64>,
}

impl RawScenario {
    /// The CSMA parameters when the kernel family is `csma`.
    pub fn csma_params(&self) -> Option<CsmaParams<f64>> {
        (self.kernel.family == "csma").then(|| CsmaParams {
            gamma: self.kernel.gamma.unwrap_or(1.0),
            beta2: self.kernel.beta2.unwrap_or(0.0),
            beta3: self.kernel.beta3.unwrap_or(0.0),
            k: self.states.len().saturating_sub(1),
            attempt: self.kernel.attempt.clone().unwrap_or_default(),
        })
    }

    fn line_of<V>(&self, v: &Spanned<V>) -> Option<usize> {
        let start = v.span().start;
        (start <= self.source.len()).then(|| self.source[..start].matches('\n').count() + 1)
    }

    fn err<V>(&self, at: &Spanned<V>, field: impl Into<String>, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line_of(at),
            field: field.into(),
            message: message.into(),
        }
    }
}

fn config(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        line: None,
        field: field.into(),
        message: message.into(),
    }
}

/// Syntax and schema check of a scenario file.
pub fn parse_scenario(text: &str) -> Result<RawScenario> {
    let mut raw: RawScenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Config {
            line,
            field: e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("<document>")
                .to_string(),
            message: e.message().trim().to_string(),
        }
    })?;
    raw.source = text.to_string();
    Ok(raw)
}

/// Read, parse and validate a scenario file.
pub fn load_scenario<T: Scalar>(path: impl AsRef<Path>) -> Result<ScenarioModel<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(path.display().to_string(), format!("cannot read: {e}")))?;
    validate_scenario(&parse_scenario(&text)?)
}

/// Build a [`ScenarioModel`] and check its kernel at `m0` and at the probe points.
pub fn validate_scenario<T: Scalar>(raw: &RawScenario) -> Result<ScenarioModel<T>> {
    let ctx = Ctx::new(raw)?;
    let space = ctx.space()?;
    let mode = ctx.mode()?;
    let horizon = ctx.horizon(mode)?;
    let m0 = ctx.m0::<T>()?;
    let type_mass: Vec<T> = match &raw.type_mass {
        Some(v) => v.iter().map(|&x| T::lit(x)).collect(),
        None => {
            let k = ctx.types.len();
            vec![T::one() / T::from_usize_lossy(k); k]
        }
    };
    if type_mass.len() != ctx.types.len() {
        return Err(config(
            "type_mass",
            format!("{} entries for {} types", type_mass.len(), ctx.types.len()),
        ));
    }
    let payoff = ctx.payoff::<T>(&space, type_mass.clone())?;
    let kernel = ctx.kernel::<T>(&space, mode, &payoff, &type_mass)?;
    let name = raw.name.clone().unwrap_or_else(|| "scenario".into());
    let mut model = ScenarioModel::new(name, space, kernel, payoff, horizon, m0, type_mass)?;
    if let Some(rate) = raw.simulation.as_ref().and_then(|s| s.clock_rate) {
        if !(rate > 0.0) {
            return Err(config("simulation.clock_rate", "must be positive"));
        }
        model = model.with_clock_rate(rate);
    }
    model.validate(DEFAULT_PROBE_SEED)?;
    Ok(model)
}

struct Ctx<'a> {
    raw: &'a RawScenario,
    types: Vec<String>,
    n: usize,
}

fn number(v: &Value, path: &str) -> std::result::Result<f64, String> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => {
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("{path}: `{s}` is not a number"));
            match s.split_once('/') {
                Some((a, b)) => Ok(parse(a)? / parse(b)?),
                None => parse(s),
            }
        }
        _ => Err(format!("{path}: expected a number")),
    }
}

fn array<'v>(v: &'v Value, path: &str, len: Option<usize>) -> std::result::Result<&'v [Value], String> {
    let arr = v
        .as_array()
        .ok_or_else(|| format!("{path}: expected an array"))?;
    if let Some(len) = len {
        if arr.len() != len {
            return Err(format!("{path}: expected {len} entries, found {}", arr.len()));
        }
    }
    Ok(arr)
}

fn vector(v: &Value, path: &str, len: usize) -> std::result::Result<Vec<f64>, String> {
    array(v, path, Some(len))?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str, rows: usize, cols: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    array(v, path, Some(rows))?
        .iter()
        .enumerate()
        .map(|(i, r)| vector(r, &format!("{path}[{i}]"), cols))
        .collect()
}

fn lit<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

impl<'a> Ctx<'a> {
    fn new(raw: &'a RawScenario) -> Result<Self> {
        let types = raw
            .types
            .clone()
            .unwrap_or_else(|| vec!["population".to_string()]);
        if types.is_empty() {
            return Err(config("types", "at least one type is required"));
        }
        if raw.states.is_empty() {
            return Err(config("states", "at least one state is required"));
        }
        Ok(Self {
            raw,
            types,
            n: raw.states.len(),
        })
    }

    /// Splits a per-type field: a table keyed by type label, or a bare value
    /// when there is a single type.
    fn per_type<'v>(&self, v: &'v Spanned<Value>, field: &str) -> Result<Vec<(String, &'v Value)>> {
        match v.get_ref() {
            Value::Table(tab) => {
                if let Some(extra) = tab.keys().find(|k| !self.types.contains(k)) {
                    return Err(self.raw.err(v, format!("{field}.{extra}"), "unknown type label"));
                }
                self.types
                    .iter()
                    .map(|ty| {
                        tab.get(ty)
                            .map(|x| (format!("{field}.{ty}"), x))
                            .ok_or_else(|| self.raw.err(v, format!("{field}.{ty}"), "missing entry for type"))
                    })
                    .collect()
            }
            other if self.types.len() == 1 => Ok(vec![(field.to_string(), other)]),
            _ => Err(self.raw.err(v, field, "expected a table keyed by type label")),
        }
    }

    fn lift<V, R>(&self, at: &Spanned<V>, r: std::result::Result<R, String>) -> Result<R> {
        r.map_err(|msg| {
            let (field, message) = msg.split_once(": ").unwrap_or(("", &msg));
            self.raw.err(at, field, message)
        })
    }

    fn space(&self) -> Result<StateSpace> {
        let v = &self.raw.actions;
        let strings = |x: &Value, path: &str| -> std::result::Result<Vec<String>, String> {
            array(x, path, None)?
                .iter()
                .map(|s| s.as_str().map(str::to_string).ok_or_else(|| format!("{path}: expected strings")))
                .collect()
        };
        let mut actions = Vec::new();
        for (path, val) in self.per_type(v, "actions")? {
            let arr = self.lift(v, array(val, &path, None))?;
            let per_state = if arr.iter().all(Value::is_str) {
                vec![self.lift(v, strings(val, &path))?; self.n]
            } else {
                self.lift(v, array(val, &path, Some(self.n)))?
                    .iter()
                    .enumerate()
                    .map(|(x, s)| self.lift(v, strings(s, &format!("{path}[{x}]"))))
                    .collect::<Result<Vec<_>>>()?
            };
            actions.push(per_state);
        }
        StateSpace::new(self.raw.states.clone(), self.types.clone(), actions)
    }

    fn mode(&self) -> Result<KernelMode> {
        let k = &self.raw.kernel;
        let default = match k.family.as_str() {
            "revision" => Some("continuous"),
            "csma" => Some("discrete"),
            "table" | "affine" => None,
            other => {
                return Err(config(
                    "kernel.family",
                    format!("unknown family `{other}` (expected table, affine, revision or csma)"),
                ))
            }
        };
        match k.mode.as_deref().or(default) {
            Some("discrete") => Ok(KernelMode::DiscreteProbability),
            Some("continuous") => Ok(KernelMode::ContinuousRate),
            Some(other) => Err(config(
                "kernel.mode",
                format!("unknown mode `{other}` (expected discrete or continuous)"),
            )),
            None => Err(config("kernel.mode", "required for this kernel family")),
        }
    }

    fn horizon<T: Scalar>(&self, mode: KernelMode) -> Result<Horizon<T>> {
        let h = &self.raw.horizon;
        match mode {
            KernelMode::DiscreteProbability => match h.stages {
                Some(stages) => Ok(Horizon::Discrete { stages }),
                None => Err(config("horizon.stages", "required for a discrete kernel")),
            },
            KernelMode::ContinuousRate => {
                let end = h.end.ok_or_else(|| config("horizon.end", "required for a continuous kernel"))?;
                let step = h.step.unwrap_or(1e-3);
                if !(end > 0.0) || !(step > 0.0) || step > end {
                    return Err(config("horizon", "need 0 < step <= end"));
                }
                Ok(Horizon::Continuous {
                    end: T::lit(end),
                    step: T::lit(step),
                })
            }
        }
    }

    fn m0<T: Scalar>(&self) -> Result<Vec<SimplexVector<T>>> {
        let v = &self.raw.m0;
        self.per_type(v, "m0")?
            .into_iter()
            .map(|(path, val)| {
                let mass = self.lift(v, vector(val, &path, self.n))?;
                SimplexVector::new(lit(mass)).map_err(|e| self.raw.err(v, path, e.to_string()))
            })
            .collect()
    }

    fn payoff<T: Scalar>(&self, space: &StateSpace, type_mass: Vec<T>) -> Result<PayoffSpec<T>> {
        let p = &self.raw.payoff;
        let n = self.n;
        let mut running: Vec<Vec<Vec<Vec<f64>>>> = (0..self.types.len())
            .map(|ty| (0..n).map(|x| vec![vec![0.0; n]; space.n_actions(ty, x)]).collect())
            .collect();
        let mut terminal = vec![vec![vec![0.0; n]; n]; self.types.len()];

        if let Some(v) = &p.running {
            for (ty, (path, val)) in self.per_type(v, "payoff.running")?.into_iter().enumerate() {
                let rows = self.lift(v, array(val, &path, Some(n)))?;
                for (x, row) in rows.iter().enumerate() {
                    let r = self.lift(v, vector(row, &format!("{path}[{x}]"), space.n_actions(ty, x)))?;
                    for (a, c) in r.into_iter().enumerate() {
                        running[ty][x][a].iter_mut().for_each(|e| *e += c);
                    }
                }
            }
        }
        if let Some(v) = &p.pairwise {
            for (ty, (path, val)) in self.per_type(v, "payoff.pairwise")?.into_iter().enumerate() {
                let rows = self.lift(v, array(val, &path, Some(n)))?;
                for (x, row) in rows.iter().enumerate() {
                    let acts = space.n_actions(ty, x);
                    let tab = self.lift(v, matrix(row, &format!("{path}[{x}]"), acts, n))?;
                    for (a, ws) in tab.into_iter().enumerate() {
                        for (e, c) in running[ty][x][a].iter_mut().zip(ws) {
                            *e += c;
                        }
                    }
                }
            }
        }
        if let Some(v) = &p.matrix {
            for (ty, (path, val)) in self.per_type(v, "payoff.matrix")?.into_iter().enumerate() {
                let tab = self.lift(v, matrix(val, &path, n, n))?;
                for (x, ws) in tab.into_iter().enumerate() {
                    for per_action in running[ty][x].iter_mut() {
                        for (e, c) in per_action.iter_mut().zip(&ws) {
                            *e += c;
                        }
                    }
                }
            }
        }
        if let Some(v) = &p.terminal {
            for (ty, (path, val)) in self.per_type(v, "payoff.terminal")?.into_iter().enumerate() {
                let g = self.lift(v, vector(val, &path, n))?;
                for (x, c) in g.into_iter().enumerate() {
                    terminal[ty][x].iter_mut().for_each(|e| *e += c);
                }
            }
        }
        if let Some(v) = &p.terminal_pairwise {
            for (ty, (path, val)) in self.per_type(v, "payoff.terminal_pairwise")?.into_iter().enumerate() {
                let g = self.lift(v, matrix(val, &path, n, n))?;
                for (x, ws) in g.into_iter().enumerate() {
                    for (e, c) in terminal[ty][x].iter_mut().zip(ws) {
                        *e += c;
                    }
                }
            }
        }

        let flat = |w: &[f64]| w.iter().all(|&c| c == w[0]);
        let free = running.iter().flatten().flatten().all(|w| flat(w))
            && terminal.iter().flatten().all(|w| flat(w));
        if free {
            let run = running
                .iter()
                .map(|per_x| per_x.iter().map(|per_a| per_a.iter().map(|w| T::lit(w[0])).collect()).collect())
                .collect();
            let term = terminal
                .iter()
                .map(|per_x| per_x.iter().map(|w| T::lit(w[0])).collect())
                .collect();
            return Ok(PayoffSpec::from_tables(run, term));
        }
        let pw = PairwisePayoff {
            running: running
                .into_iter()
                .map(|per_x| per_x.into_iter().map(|per_a| per_a.into_iter().map(lit).collect()).collect())
                .collect(),
            terminal: Some(
                terminal
                    .into_iter()
                    .map(|per_x| per_x.into_iter().map(lit).collect())
                    .collect(),
            ),
        };
        Ok(PayoffSpec::from_pairwise(pw, type_mass))
    }

    fn kernel<T: Scalar>(
        &self,
        space: &StateSpace,
        mode: KernelMode,
        payoff: &PayoffSpec<T>,
        type_mass: &[T],
    ) -> Result<TransitionKernelSpec<T>> {
        let k = &self.raw.kernel;
        let n = self.n;
        let need = |v: &'a Option<Spanned<Value>>, field: &str| {
            v.as_ref()
                .ok_or_else(|| config(format!("kernel.{field}"), format!("required by family `{}`", k.family)))
        };
        let tensor3 = |v: &Spanned<Value>, field: &str| -> Result<Vec<Vec<Vec<Vec<T>>>>> {
            self.per_type(v, field)?
                .into_iter()
                .enumerate()
                .map(|(ty, (path, val))| {
                    self.lift(v, array(val, &path, Some(n)))?
                        .iter()
                        .enumerate()
                        .map(|(x, row)| {
                            let m = self.lift(v, matrix(row, &format!("{path}[{x}]"), space.n_actions(ty, x), n))?;
                            Ok(m.into_iter().map(lit).collect())
                        })
                        .collect()
                })
                .collect()
        };
        match k.family.as_str() {
            "table" => {
                let v = need(&k.table, "table")?;
                TransitionKernelSpec::from_table(mode, tensor3(v, "kernel.table")?)
            }
            "affine" => {
                let base = tensor3(need(&k.base, "base")?, "kernel.base")?;
                let slope = match &k.slope {
                    None => base
                        .iter()
                        .map(|per_x| {
                            per_x
                                .iter()
                                .map(|per_a| per_a.iter().map(|row| vec![vec![T::zero(); n]; row.len()]).collect())
                                .collect()
                        })
                        .collect(),
                    Some(v) => self
                        .per_type(v, "kernel.slope")?
                        .into_iter()
                        .enumerate()
                        .map(|(ty, (path, val))| {
                            self.lift(v, array(val, &path, Some(n)))?
                                .iter()
                                .enumerate()
                                .map(|(x, per_x)| {
                                    self.lift(v, array(per_x, &format!("{path}[{x}]"), Some(space.n_actions(ty, x))))?
                                        .iter()
                                        .enumerate()
                                        .map(|(a, per_a)| {
                                            let m = self.lift(v, matrix(per_a, &format!("{path}[{x}][{a}]"), n, n))?;
                                            Ok(m.into_iter().map(lit).collect())
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect::<Result<_>>()?,
                };
                affine_kernel(mode, base, slope, type_mass.to_vec())
            }
            "revision" => {
                if mode != KernelMode::ContinuousRate {
                    return Err(config("kernel.mode", "revision kernels are continuous"));
                }
                let name = k.protocol.as_deref().ok_or_else(|| config("kernel.protocol", "required"))?;
                let kind = ProtocolKind::from_name(name, T::lit(k.temperature.unwrap_or(0.1)))
                    .map_err(|e| config("kernel.protocol", e.to_string()))?;
                revision_kernel(
                    kind,
                    payoff.population_payoff(space, 0),
                    T::lit(k.mutation.unwrap_or(0.0)),
                    n,
                )
            }
            "csma" => {
                if mode != KernelMode::DiscreteProbability {
                    return Err(config("kernel.mode", "csma kernels are discrete"));
                }
                let params = self.raw.csma_params().expect("family is csma");
                let params = CsmaParams {
                    gamma: T::lit(params.gamma),
                    beta2: T::lit(params.beta2),
                    beta3: T::lit(params.beta3),
                    k: params.k,
                    attempt: lit(params.attempt),
                };
                let nodes = k.nodes.ok_or_else(|| config("kernel.nodes", "required by family `csma`"))?;
                csma_kernel(&params, nodes, k.limit.unwrap_or(CsmaLimit::Exponential))
                    .map_err(|e| config("kernel", e.to_string()))
            }
            _ => unreachable!("family checked in mode()"),
        }
    }
}
