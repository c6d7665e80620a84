use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{InitialLaw, MkvModel, OuParams, Weights};
use crate::error::{Result, SimError};

/// A particle-model file after syntax checking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMkvScenario {
    pub name: Option<String>,
    pub description: Option<String>,
    /// `ou`, `pure-drift` or `custom-table`.
    pub model: String,
    #[serde(default)]
    pub parameters: RawParameters,
    pub initial: InitialLaw,
    pub simulation: RawMkvSimulation,
    /// Dense `ω̄[i][j]`; uniform when absent.
    pub weights: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParameters {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub s: Option<f64>,
    pub c: Option<f64>,
    pub knots: Option<Vec<f64>>,
    pub level: Option<Vec<f64>>,
    pub slope: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMkvSimulation {
    pub n: usize,
    pub step: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct MkvScenario {
    pub name: String,
    pub model: MkvModel,
    pub n: usize,
    pub step: f64,
    pub end: f64,
}

fn config(field: &str, message: impl Into<String>) -> SimError {
    mfgkit_core::Error::Config {
        line: None,
        field: field.into(),
        message: message.into(),
    }
    .into()
}

pub fn parse_mkv_scenario(text: &str) -> Result<RawMkvScenario> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        mfgkit_core::Error::Config {
            line,
            field: e.message().split('`').nth(1).unwrap_or("<document>").to_string(),
            message: e.message().trim().to_string(),
        }
        .into()
    })
}

impl RawMkvScenario {
    pub fn build(&self) -> Result<MkvScenario> {
        let p = &self.parameters;
        let need = |v: Option<f64>, field: &str| v.ok_or_else(|| config(field, format!("required by model `{}`", self.model)));
        let initial = self.initial.clone();
        let model = match self.model.as_str() {
            "ou" => MkvModel::ou(
                OuParams {
                    a: need(p.a, "parameters.a")?,
                    b: p.b.unwrap_or(0.0),
                    s: need(p.s, "parameters.s")?,
                },
                initial,
            )
            .map_err(|e| config("parameters", e.to_string()))?,
            "pure-drift" => MkvModel::pure_drift(need(p.c, "parameters.c")?, initial),
            "custom-table" => {
                let table = |v: &Option<Vec<f64>>, field: &str| {
                    v.clone().ok_or_else(|| config(field, "required by model `custom-table`"))
                };
                let knots = table(&p.knots, "parameters.knots")?;
                let zeros = vec![0.0; knots.len()];
                MkvModel::custom_table(
                    knots,
                    table(&p.level, "parameters.level")?,
                    p.slope.clone().unwrap_or_else(|| zeros.clone()),
                    p.sigma.clone().unwrap_or(zeros),
                    initial,
                )
                .map_err(|e| config("parameters", e.to_string()))?
            }
            other => {
                return Err(config(
                    "model",
                    format!("unknown model `{other}`; expected ou, pure-drift or custom-table"),
                ))
            }
        };
        let model = match &self.weights {
            Some(w) => model.with_weights(Weights::Dense(w.clone())),
            None => model,
        };
        let sim = &self.simulation;
        if sim.n == 0 {
            return Err(config("simulation.n", "must be at least 1"));
        }
        mfgkit_core::scenario::grid_steps(sim.end, sim.step)
            .map_err(|e| config("simulation.step", e.to_string()))?;
        model
            .weights
            .validate(sim.n)
            .map_err(|e| config("weights", e.to_string()))?;
        Ok(MkvScenario {
            name: self.name.clone().unwrap_or_else(|| self.model.clone()),
            model,
            n: sim.n,
            step: sim.step,
            end: sim.end,
        })
    }
}

pub fn load_mkv_scenario(path: impl AsRef<Path>) -> Result<(RawMkvScenario, MkvScenario)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| config(&path.display().to_string(), format!("cannot read: {e}")))?;
    let raw = parse_mkv_scenario(&text)?;
    let built = raw.build()?;
    Ok((raw, built))
}
