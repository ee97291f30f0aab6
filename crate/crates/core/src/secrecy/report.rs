use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// A capacity in bits per use, or unbounded when its noise term vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Finite(f64),
    Unbounded,
}

impl Capacity {
    /// `log2(1 + signal / noise)`.
    pub fn from_ratio(signal: f64, noise: f64) -> Self {
        if signal == 0.0 {
            Capacity::Finite(0.0)
        } else if noise == 0.0 {
            Capacity::Unbounded
        } else {
            Capacity::Finite((signal / noise).ln_1p() / std::f64::consts::LN_2)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Capacity::Finite(v) => Some(v),
            Capacity::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Capacity::Unbounded)
    }

    fn max(self, other: Self) -> Self {
        match (self, other) {
            (Capacity::Finite(a), Capacity::Finite(b)) => Capacity::Finite(a.max(b)),
            _ => Capacity::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyReport {
    pub legitimate_capacity: Capacity,
    pub eve_capacity_tx: Capacity,
    pub eve_capacity_rx: Capacity,
    pub secrecy_rate: Capacity,
}

impl SecrecyReport {
    /// `[C − max_j C_eve^j]⁺`. An unbounded eavesdropper always clips the
    /// rate to zero, even against an unbounded legitimate channel.
    pub fn from_capacities(legitimate: Capacity, eve_tx: Capacity, eve_rx: Capacity) -> Self {
        let secrecy_rate = match (legitimate, eve_tx.max(eve_rx)) {
            (_, Capacity::Unbounded) => Capacity::Finite(0.0),
            (Capacity::Unbounded, Capacity::Finite(_)) => Capacity::Unbounded,
            (Capacity::Finite(c), Capacity::Finite(e)) => Capacity::Finite((c - e).max(0.0)),
        };
        Self {
            legitimate_capacity: legitimate,
            eve_capacity_tx: eve_tx,
            eve_capacity_rx: eve_rx,
            secrecy_rate,
        }
    }
}

/// Capacities and secrecy rate of weights `α` against `m`, which is either
/// the surrogate `Γ` (N×r) or a dynamics trace `X` (N×K).
pub fn secrecy_rate(
    weights: &DVector<f64>,
    m: &DMatrix<f64>,
    signal_mean: f64,
    noise_variance: f64,
    tx: usize,
    rx: usize,
) -> Result<SecrecyReport> {
    let n = m.nrows();
    ensure_dim("weight vector length", n, weights.len())?;
    if tx == rx {
        return Err(Error::invalid("tx and rx must differ"));
    }
    if tx >= n || rx >= n {
        return Err(Error::invalid(format!("tx/rx outside 0..{n}")));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    let e2 = signal_mean * signal_mean;
    let mixed = m.tr_mul(weights);
    let noise = mixed.norm_squared() + weights.norm_squared() * noise_variance;
    let legit = Capacity::from_ratio(e2, noise);
    let eve = |j: usize| {
        let a = weights[j];
        Capacity::from_ratio(e2, a * a * m.row(j).norm_squared())
    };
    Ok(SecrecyReport::from_capacities(legit, eve(tx), eve(rx)))
}
