use std::fmt;
use std::str::FromStr;

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Optimizer accumulators. Adam uses both moments, RMSProp only `second`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub rms_decay: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Self {
        Self {
            kind,
            learning_rate,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            rms_decay: 0.9,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
        match self.kind {
            OptimizerKind::Adam => adam_step(self, params, grads),
            OptimizerKind::RmsProp => rmsprop_step(self, params, grads),
        }
    }
}

fn check(state: &OptimizerState, params: &ParamStore, grads: &ParamStore) -> Result<()> {
    if params.len() != grads.len() || state.first.len() != params.len() || state.second.len() != params.len() {
        return Err(Error::Shape(format!(
            "optimizer over {} values, params {}, grads {}",
            state.first.len(),
            params.len(),
            grads.len()
        )));
    }
    if let Some(i) = grads.values.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
    }
    Ok(())
}

/// Adam with bias-corrected moments.
pub fn adam_step(state: &mut OptimizerState, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
    check(state, params, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (((p, g), m), v) in params
        .values
        .iter_mut()
        .zip(&grads.values)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// RMSProp: running mean of squared gradients, no momentum.
pub fn rmsprop_step(state: &mut OptimizerState, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
    check(state, params, grads)?;
    state.step += 1;
    for ((p, g), v) in params.values.iter_mut().zip(&grads.values).zip(&mut state.second) {
        *v = state.rms_decay * *v + (1.0 - state.rms_decay) * g * g;
        *p -= state.learning_rate * g / (v.sqrt() + state.epsilon);
    }
    Ok(())
}
