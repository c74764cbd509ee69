use super::model::{Gradients, ProbeParams};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam moment accumulators over the flattened `(theta, bias)` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub t: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ProbeParams<T>) -> Self {
        let n = params.theta.len() + params.bias.len();
        AdamState {
            t: 0,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }
}

/// Bias-corrected Adam update, no weight decay.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    params: &mut ProbeParams<T>,
    grads: &Gradients<T>,
    config: &TrainConfig,
) -> Result<()> {
    if grads.theta.len() != params.theta.len() || state.m.len() != params.theta.len() + params.bias.len() {
        return Err(Error::validation("optimizer state, parameters and gradients differ in shape"));
    }
    state.t += 1;
    let b1 = T::c(config.adam_beta1);
    let b2 = T::c(config.adam_beta2);
    let lr = T::c(config.learning_rate);
    let eps = T::c(config.adam_epsilon);
    let t = state.t as f64;
    let c1 = T::c(1.0 - config.adam_beta1.powf(t));
    let c2 = T::c(1.0 - config.adam_beta2.powf(t));

    let values = params.theta.iter_mut().chain(params.bias.iter_mut());
    let gs = grads.theta.iter().chain(grads.bias.iter());
    for (((p, &g), m), v) in values.zip(gs).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    if !params.is_finite() {
        return Err(Error::numeric(format!("non-finite parameters after Adam step {}", state.t)));
    }
    Ok(())
}
