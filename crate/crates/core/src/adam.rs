//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::scalar::Scalar;

/// Optimizer state: per-block moment accumulators plus hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    pub step: u64,
    m: ParamSet<F>,
    v: ParamSet<F>,
}

impl<F: Scalar> AdamState<F> {
    /// Zero moments matching the parameter shapes; defaults
    /// lr 0.01, beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(params: &ParamSet<F>, lr: F) -> Self {
        Self {
            lr,
            beta1: F::cast(0.9),
            beta2: F::cast(0.999),
            eps: F::cast(1e-8),
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&crate::dense::DenseMatrix<F>> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&crate::dense::DenseMatrix<F>> {
        self.v.get(name)
    }

    /// Replace both moment sets (checkpoint restore).
    pub fn restore_moments(&mut self, m: ParamSet<F>, v: ParamSet<F>) {
        self.m = m;
        self.v = v;
    }
}

/// One Adam update. Shapes and block names of `grads` must mirror `params`.
pub fn adam_step<F: Scalar>(
    params: &mut ParamSet<F>,
    grads: &ParamSet<F>,
    state: &mut AdamState<F>,
) -> Result<()> {
    for (name, p) in params.iter() {
        match grads.get(name) {
            Some(g) if g.shape() == p.shape() => {}
            Some(g) => {
                return Err(Error::Dim(format!(
                    "adam_step: block {name} is {:?}, gradient {:?}",
                    p.shape(),
                    g.shape()
                )))
            }
            None => {
                return Err(Error::Dim(format!(
                    "adam_step: gradient missing block {name}"
                )))
            }
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = F::one() - b1.powi(t);
    let bc2 = F::one() - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads.get(name).unwrap();
        let m = state.m.get_mut(name).unwrap();
        let v = state.v.get_mut(name).unwrap();
        let (ps, gs) = (p.as_mut_slice(), g.as_slice());
        let (ms, vs) = (m.as_mut_slice(), v.as_slice());
        // interleave the two moment updates and the parameter step in one pass
        let mut vbuf = vs.to_vec();
        for i in 0..ps.len() {
            ms[i] = b1 * ms[i] + (F::one() - b1) * gs[i];
            vbuf[i] = b2 * vbuf[i] + (F::one() - b2) * gs[i] * gs[i];
            let mhat = ms[i] / bc1;
            let vhat = vbuf[i] / bc2;
            ps[i] = ps[i] - state.lr * mhat / (vhat.sqrt() + state.eps);
        }
        state.v.get_mut(name).unwrap().as_mut_slice().copy_from_slice(&vbuf);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;

    fn single(value: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("w", DenseMatrix::scalar(value));
        p
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = single(1.5);
        let g = p.zeros_like();
        let mut s = AdamState::new(&p, 0.01);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.get("w").unwrap().scalar_value(), 1.5);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g)
        let mut p = single(0.0);
        let mut g = p.zeros_like();
        g.get_mut("w").unwrap().set(0, 0, 3.7);
        let mut s = AdamState::new(&p, 0.01);
        adam_step(&mut p, &g, &mut s).unwrap();
        let w = p.get("w").unwrap().scalar_value();
        assert!((w - (-0.01)).abs() < 1e-9, "w = {w}");
    }

    #[test]
    fn lr_zero_is_identity() {
        let mut p = single(2.0);
        let mut g = p.zeros_like();
        g.get_mut("w").unwrap().set(0, 0, -5.0);
        let mut s = AdamState::new(&p, 0.0);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.get("w").unwrap().scalar_value(), 2.0);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = single(1.0);
            let mut s = AdamState::new(&p, 0.05);
            for k in 0..20 {
                let mut g = p.zeros_like();
                let w = p.get("w").unwrap().scalar_value();
                g.get_mut("w").unwrap().set(0, 0, 2.0 * w + k as f64 * 0.1);
                adam_step(&mut p, &g, &mut s).unwrap();
            }
            p.get("w").unwrap().scalar_value()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut p = single(1.0);
        let mut g = ParamSet::new();
        g.insert("w", DenseMatrix::zeros(2, 2));
        let mut s = AdamState::new(&p, 0.01);
        assert!(adam_step(&mut p, &g, &mut s).is_err());
    }
}
