use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::trace::DynamicsTrace;
use crate::error::{Error, Result};
use crate::seed;

/// Add i.i.d. zero-mean Gaussian sensor noise of variance `noise_variance`.
///
/// Every node draws from its own stream `derive(seed, [node])`, so a node's
/// noise does not depend on how many other nodes are measured.
pub fn sample_measurements(trace: &DynamicsTrace, noise_variance: f64, seed: u64) -> Result<DynamicsTrace> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    if noise_variance == 0.0 {
        return Ok(trace.clone());
    }
    let sd = noise_variance.sqrt();
    let mut out = trace.values().clone();
    for i in 0..out.nrows() {
        let mut rng = seed::rng_for(seed, &[i as u64]);
        for k in 0..out.ncols() {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(i, k)] += sd * z;
        }
    }
    DynamicsTrace::new(out, trace.sample_period())
}

/// Noise-only matrix for a subset of node rows, drawn from the same
/// per-node streams as [`sample_measurements`].
pub fn noise_rows(nodes: &[usize], horizon: usize, noise_variance: f64, seed: u64) -> DMatrix<f64> {
    let sd = noise_variance.max(0.0).sqrt();
    let mut out = DMatrix::zeros(nodes.len(), horizon);
    if sd == 0.0 {
        return out;
    }
    for (r, &i) in nodes.iter().enumerate() {
        let mut rng = seed::rng_for(seed, &[i as u64]);
        for k in 0..horizon {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(r, k)] = sd * z;
        }
    }
    out
}
