//! On-off keyed transmission through the encrypt, relay, decrypt chain.
//!
//! Every participant adds its weighted measured row to the signal in
//! transit, so the receiver's estimate differs from the plaintext by
//! exactly `Σ α_i X_i` over the participants. Signals are aligned sample by
//! sample with the measured rows.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::secrecy::RelayPlan;
use crate::seed;

/// A bit sequence and the seed it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub bits: Vec<u8>,
    pub seed: u64,
}

impl BitStream {
    /// Equiprobable random bits.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let bits = (0..len).map(|_| u8::from(rng.random::<bool>())).collect();
        Self { bits, seed }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Bit 1 maps to `amplitude`, bit 0 to zero.
pub fn modulate_ook(bits: &[u8], amplitude: f64) -> Result<Vec<f64>> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid("OOK amplitude must be positive"));
    }
    Ok(bits.iter().map(|&b| if b != 0 { amplitude } else { 0.0 }).collect())
}

fn add_weighted(signal: &[f64], row: &[f64], weight: f64) -> Result<Vec<f64>> {
    ensure_dim("measured row length", signal.len(), row.len())?;
    Ok(signal.iter().zip(row).map(|(s, x)| s + weight * x).collect())
}

/// `s* = s + α_tx X_tx`.
pub fn encrypt(signal: &[f64], row_tx: &[f64], weight_tx: f64) -> Result<Vec<f64>> {
    add_weighted(signal, row_tx, weight_tx)
}

/// A relay adds `α_i X_i` to the ciphertext it forwards.
pub fn relay_process(ciphertext: &[f64], row: &[f64], weight: f64) -> Result<Vec<f64>> {
    add_weighted(ciphertext, row, weight)
}

/// `ŝ = s* + α_rx X_rx`.
pub fn decrypt(ciphertext: &[f64], row_rx: &[f64], weight_rx: f64) -> Result<Vec<f64>> {
    add_weighted(ciphertext, row_rx, weight_rx)
}

/// Threshold detector: bit 1 iff the sample exceeds `amplitude / 2`.
pub fn demodulate(estimate: &[f64], amplitude: f64) -> Vec<u8> {
    let half = 0.5 * amplitude;
    estimate.iter().map(|&v| u8::from(v > half)).collect()
}

/// Fraction of mismatched bits after threshold detection. Empty input
/// scores zero.
pub fn demodulate_and_ber(estimate: &[f64], bits: &[u8], amplitude: f64) -> Result<f64> {
    ensure_dim("estimate length", bits.len(), estimate.len())?;
    if bits.is_empty() {
        return Ok(0.0);
    }
    let errors = demodulate(estimate, amplitude)
        .iter()
        .zip(bits)
        .filter(|(a, b)| **a != u8::from(**b != 0))
        .count();
    Ok(errors as f64 / bits.len() as f64)
}

/// One participant's contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub node: usize,
    pub weight: f64,
    pub row: Vec<f64>,
    /// Signal leaving this participant.
    pub output: Vec<f64>,
}

/// Audit trail of a transmission: the plaintext, then one stage per
/// participant (tx, relays in order, rx). The rx stage output is the
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub plaintext: Vec<f64>,
    pub amplitude: f64,
    pub stages: Vec<Contribution>,
}

impl TransmissionRecord {
    pub fn ciphertext(&self) -> &[f64] {
        &self.stages[0].output
    }

    pub fn estimate(&self) -> &[f64] {
        &self.stages[self.stages.len() - 1].output
    }

    /// Largest deviation between `ŝ − s` and `Σ α_i X_i`.
    pub fn audit_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.plaintext.len() {
            let sum: f64 = self.stages.iter().map(|c| c.weight * c.row[k]).sum();
            worst = worst.max((self.estimate()[k] - self.plaintext[k] - sum).abs());
        }
        worst
    }

    pub fn ber(&self, bits: &[u8]) -> Result<f64> {
        demodulate_and_ber(self.estimate(), bits, self.amplitude)
    }

    /// CSV with columns `k,plaintext,<node>...` where each node column is
    /// the signal leaving that participant (1-based node ids).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,plaintext");
        for c in &self.stages {
            let _ = write!(out, ",node_{}", c.node + 1);
        }
        out.push('\n');
        for k in 0..self.plaintext.len() {
            let _ = write!(out, "{k},{}", crate::fmt_f64(self.plaintext[k]));
            for c in &self.stages {
                let _ = write!(out, ",{}", crate::fmt_f64(c.output[k]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Send `bits` along the plan's chain using the first `bits.len()` columns
/// of `measured` (already in the surrogate's signal mode).
pub fn transmit(plan: &RelayPlan, measured: &DMatrix<f64>, bits: &[u8], amplitude: f64) -> Result<TransmissionRecord> {
    ensure_dim("measured node count", plan.weights.len(), measured.nrows())?;
    let len = bits.len();
    if len > measured.ncols() {
        return Err(Error::invalid(format!(
            "bit stream of length {len} exceeds trace horizon {}",
            measured.ncols()
        )));
    }
    let plaintext = modulate_ook(bits, amplitude)?;
    let row = |i: usize| -> Vec<f64> { measured.row(i).columns(0, len).iter().copied().collect() };
    let participants = plan.participants();
    let mut stages = Vec::with_capacity(participants.len());
    let mut signal = plaintext.clone();
    for (pos, &node) in participants.iter().enumerate() {
        let r = row(node);
        let w = plan.weights[node];
        signal = if pos == 0 {
            encrypt(&signal, &r, w)?
        } else if pos + 1 == participants.len() {
            decrypt(&signal, &r, w)?
        } else {
            relay_process(&signal, &r, w)?
        };
        stages.push(Contribution {
            node,
            weight: w,
            row: r,
            output: signal.clone(),
        });
    }
    Ok(TransmissionRecord {
        plaintext,
        amplitude,
        stages,
    })
}
