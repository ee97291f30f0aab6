use nalgebra::{DMatrix, DVector};

use super::perturbation::PerturbationProcess;
use super::trace::DynamicsTrace;
use crate::error::{ensure_dim, Error, Result};

/// Linear network dynamics `x_{k+1} = A x_k + b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamicsParams {
    pub transition: DMatrix<f64>,
    pub initial_state: DVector<f64>,
    pub sample_period: f64,
}

impl LinearDynamicsParams {
    pub fn new(transition: DMatrix<f64>, initial_state: DVector<f64>) -> Result<Self> {
        if !transition.is_square() {
            return Err(Error::invalid("transition matrix must be square"));
        }
        ensure_dim("initial state length", transition.nrows(), initial_state.len())?;
        Ok(Self {
            transition,
            initial_state,
            sample_period: 1.0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.transition.nrows()
    }
}

/// Iterate the linear recursion for `horizon` columns. Column 0 is the
/// initial state; an injection at index `k` first shows up in column `k + 1`.
pub fn simulate_linear(
    params: &LinearDynamicsParams,
    process: &PerturbationProcess,
    horizon: usize,
) -> Result<DynamicsTrace> {
    let n = params.node_count();
    ensure_dim("transition rows", params.initial_state.len(), n)?;
    for inj in process.injections() {
        if let Some(&(node, _)) = inj.updates.iter().find(|(node, _)| *node >= n) {
            return Err(Error::DimensionMismatch {
                what: "injection node index",
                expected: n,
                got: node,
            });
        }
    }
    let mut x = DMatrix::zeros(n, horizon);
    if horizon == 0 {
        return DynamicsTrace::new(x, params.sample_period);
    }
    x.set_column(0, &params.initial_state);
    let mut next_inj = process.injections().iter().peekable();
    let mut state = params.initial_state.clone();
    for k in 0..horizon - 1 {
        let mut nxt = &params.transition * &state;
        while let Some(inj) = next_inj.peek() {
            if inj.index < k {
                next_inj.next();
            } else if inj.index == k {
                for &(node, v) in &inj.updates {
                    nxt[node] += v;
                }
                next_inj.next();
            } else {
                break;
            }
        }
        x.set_column(k + 1, &nxt);
        state = nxt;
    }
    DynamicsTrace::new(x, params.sample_period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::perturbation::Injection;

    #[test]
    fn identity_keeps_initial_state() {
        let v = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let p = LinearDynamicsParams::new(DMatrix::identity(3, 3), v.clone()).unwrap();
        let tr = simulate_linear(&p, &PerturbationProcess::none(), 20).unwrap();
        assert_eq!(tr.values().shape(), (3, 20));
        for k in 0..20 {
            assert_eq!(tr.values().column(k), v.column(0));
        }
    }

    #[test]
    fn matches_matrix_power_oracle() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, -0.2, 0.6, 0.1, 0.05, 0.0, 0.7]);
        let x0 = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let p = LinearDynamicsParams::new(a.clone(), x0.clone()).unwrap();
        let tr = simulate_linear(&p, &PerturbationProcess::none(), 40).unwrap();
        let mut ak = DMatrix::identity(3, 3);
        for k in 0..40 {
            let want = &ak * &x0;
            let got = tr.values().column(k);
            let err = (got - &want).norm() / want.norm();
            assert!(err < 1e-12, "k={k} err={err}");
            ak = &a * &ak;
        }
    }

    #[test]
    fn injection_is_causal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let p = LinearDynamicsParams::new(a, x0).unwrap();
        let base = simulate_linear(&p, &PerturbationProcess::none(), 30).unwrap();
        let proc = PerturbationProcess::from_injections(
            vec![Injection { index: 10, arrivals: 1, updates: vec![(1, 5.0)] }],
            30,
        )
        .unwrap();
        let pert = simulate_linear(&p, &proc, 30).unwrap();
        for k in 0..=10 {
            assert_eq!(base.values().column(k), pert.values().column(k));
        }
        assert!((pert.values()[(1, 11)] - base.values()[(1, 11)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(LinearDynamicsParams::new(DMatrix::identity(3, 3), DVector::zeros(2)).is_err());
        assert!(LinearDynamicsParams::new(DMatrix::zeros(2, 3), DVector::zeros(2)).is_err());
    }
}
