//! AdaDelta and a plain SGD fallback over named flat parameter buffers.

use crate::error::{Error, Result};

/// Mutable view of one parameter tensor.
pub struct Param<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

impl<'a> Param<'a> {
    pub fn new(name: impl Into<String>, values: &'a mut [f64]) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

fn check_pairing(params: &[Param<'_>], grads: &[Vec<f64>]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ParamMismatch(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.values.len() != g.len() {
            return Err(Error::ParamMismatch(format!(
                "`{}` has {} entries but its gradient has {}",
                p.name,
                p.values.len(),
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Accumulator {
    sq_grad: Vec<f64>,
    sq_update: Vec<f64>,
}

/// AdaDelta state: decayed averages of squared gradients and squared updates.
///
/// Accumulators are allocated (zeroed) on the first step and their shapes are
/// fixed from then on.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDelta {
    pub rho: f64,
    pub epsilon: f64,
    pub lr: f64,
    accumulators: Vec<Accumulator>,
}

impl Default for AdaDelta {
    fn default() -> Self {
        Self::new(0.95, 1e-6, 1.0).expect("valid defaults")
    }
}

impl AdaDelta {
    pub fn new(rho: f64, epsilon: f64, lr: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0,1), got {rho}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("lr must be finite, got {lr}")));
        }
        Ok(Self {
            rho,
            epsilon,
            lr,
            accumulators: Vec::new(),
        })
    }

    /// `E[g²]` for tensor `i`, if allocated.
    pub fn sq_grad(&self, i: usize) -> Option<&[f64]> {
        self.accumulators.get(i).map(|a| a.sq_grad.as_slice())
    }

    /// `E[Δx²]` for tensor `i`, if allocated.
    pub fn sq_update(&self, i: usize) -> Option<&[f64]> {
        self.accumulators.get(i).map(|a| a.sq_update.as_slice())
    }

    /// Applies one update. Nothing is modified if any check fails.
    pub fn step(&mut self, params: &mut [Param<'_>], grads: &[Vec<f64>]) -> Result<()> {
        check_pairing(params, grads)?;
        if self.accumulators.is_empty() {
            self.accumulators = grads
                .iter()
                .map(|g| Accumulator {
                    sq_grad: vec![0.0; g.len()],
                    sq_update: vec![0.0; g.len()],
                })
                .collect();
        } else if self.accumulators.len() != grads.len()
            || self
                .accumulators
                .iter()
                .zip(grads)
                .any(|(a, g)| a.sq_grad.len() != g.len())
        {
            return Err(Error::ParamMismatch(
                "parameter shapes changed since the optimizer was first used".into(),
            ));
        }

        let (rho, eps, lr) = (self.rho, self.epsilon, self.lr);
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            for (((x, &gi), eg2), edx2) in p.values.iter_mut().zip(g).zip(&mut acc.sq_grad).zip(&mut acc.sq_update) {
                *eg2 = rho * *eg2 + (1.0 - rho) * gi * gi;
                let dx = -((*edx2 + eps).sqrt() / (*eg2 + eps).sqrt()) * gi;
                *edx2 = rho * *edx2 + (1.0 - rho) * dx * dx;
                *x += lr * dx;
            }
        }
        Ok(())
    }
}

/// `param ← param − lr·g`.
pub fn sgd_step(params: &mut [Param<'_>], grads: &[Vec<f64>], lr: f64) -> Result<()> {
    check_pairing(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (x, gi) in p.values.iter_mut().zip(g) {
            *x -= lr * gi;
        }
    }
    Ok(())
}
