//! Passive eavesdropping by subspace reconstruction, and active jamming.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg;
use crate::net_model::{GaussianSpec, PerturbationProcess, PoissonSpec};
use crate::pipeline;

/// What a passive eavesdropper can observe and knows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassiveEveConfig {
    pub hacked_fraction: f64,
    pub knows_surrogate: bool,
    pub knows_weights: bool,
    /// Variance of Eve's own sensors; `None` uses the legitimate value.
    pub noise_variance: Option<f64>,
}

impl PassiveEveConfig {
    pub fn new(hacked_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&hacked_fraction) {
            return Err(Error::invalid(format!("hacked fraction {hacked_fraction} outside [0, 1]")));
        }
        Ok(Self {
            hacked_fraction,
            knows_surrogate: true,
            knows_weights: true,
            noise_variance: None,
        })
    }

    /// Number of instrumented nodes, `round(f·N)`.
    pub fn sample_size(&self, node_count: usize) -> usize {
        ((self.hacked_fraction * node_count as f64).round() as usize).min(node_count)
    }
}

/// Jamming attacker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveAttackConfig {
    /// Expected injections per second.
    pub jamming_rate: f64,
    pub amplitude_variance: f64,
    pub target_nodes: Vec<usize>,
    pub seed: u64,
}

impl ActiveAttackConfig {
    pub fn new(jamming_rate: f64, amplitude_variance: f64, target_nodes: Vec<usize>, seed: u64) -> Result<Self> {
        if !(jamming_rate >= 0.0 && jamming_rate.is_finite()) {
            return Err(Error::invalid("jamming rate must be non-negative"));
        }
        if !(amplitude_variance >= 0.0 && amplitude_variance.is_finite()) {
            return Err(Error::invalid("amplitude variance must be non-negative"));
        }
        Ok(Self {
            jamming_rate,
            amplitude_variance,
            target_nodes,
            seed,
        })
    }
}

/// Poisson jamming injections with zero-mean Gaussian amplitudes at the
/// target nodes.
pub fn jamming_schedule(config: &ActiveAttackConfig, horizon: usize, dt: f64) -> Result<PerturbationProcess> {
    if horizon == 0 || !(dt > 0.0) {
        return Err(Error::invalid("horizon and dt must be positive"));
    }
    if config.jamming_rate == 0.0 {
        return Ok(PerturbationProcess::none());
    }
    PerturbationProcess::poisson(&PoissonSpec {
        rate: config.jamming_rate,
        dt,
        horizon,
        targets: config.target_nodes.clone(),
        amplitude: GaussianSpec::new(0.0, config.amplitude_variance)?,
        seed: config.seed,
    })
}

/// `σ₁ / σ_m` of `Γ_S` with `m = min(|S|, r)`; infinite when `σ_m = 0`.
/// For `|S| ≤ r` this is the ratio of the extreme singular values, and a
/// row dependent on earlier picks makes it infinite.
pub fn sampling_condition(rows: &DMatrix<f64>) -> f64 {
    let s = linalg::singular_values(rows);
    let m = rows.nrows().min(rows.ncols());
    if m == 0 {
        return f64::INFINITY;
    }
    let (top, low) = (s[0], s[m - 1]);
    if top <= 0.0 || low <= linalg::PINV_RTOL * top {
        f64::INFINITY
    } else {
        top / low
    }
}

/// Greedy sampling set and its quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet {
    /// In the order nodes were added.
    pub nodes: Vec<usize>,
    pub condition: f64,
    /// Whether `rank(Γ_S) = r`.
    pub rank_ok: bool,
}

/// Add, one at a time, the node whose row keeps `Γ_S` best conditioned.
///
/// Every single nonzero row has condition number one, so the first pick is
/// a tie among all such nodes; it is resolved by running the greedy from
/// each of them and keeping the best final set. Remaining ties go to the
/// lowest node index.
pub fn greedy_sampling_set(gamma: &DMatrix<f64>, target_size: usize) -> Result<SamplingSet> {
    let n = gamma.nrows();
    if target_size == 0 || target_size > n {
        return Err(Error::invalid(format!("target size {target_size} outside 1..={n}")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for start in 0..n {
        if gamma.row(start).norm() == 0.0 && best.is_some() {
            continue;
        }
        let (nodes, c) = greedy_from(gamma, vec![start], target_size);
        if best.as_ref().is_none_or(|(_, b)| c < b * (1.0 - 1e-12)) {
            best = Some((nodes, c));
        }
        if target_size == 1 {
            break;
        }
    }
    let (nodes, condition) = best.expect("n >= 1");
    Ok(sampling_set(gamma, nodes, condition))
}

/// Continue the greedy from an existing set, so smaller sets are prefixes
/// of larger ones.
pub fn extend_sampling_set(gamma: &DMatrix<f64>, nodes: &[usize], target_size: usize) -> Result<SamplingSet> {
    let n = gamma.nrows();
    if nodes.is_empty() || target_size < nodes.len() || target_size > n {
        return Err(Error::invalid(format!(
            "cannot extend {} nodes to {target_size} of {n}",
            nodes.len()
        )));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("node {bad} outside 0..{n}")));
    }
    let (nodes, condition) = greedy_from(gamma, nodes.to_vec(), target_size);
    Ok(sampling_set(gamma, nodes, condition))
}

fn sampling_set(gamma: &DMatrix<f64>, nodes: Vec<usize>, condition: f64) -> SamplingSet {
    let rank = linalg::numerical_rank(&linalg::select_rows(gamma, &nodes), linalg::PINV_RTOL);
    SamplingSet {
        nodes,
        condition,
        rank_ok: rank == gamma.ncols(),
    }
}

fn greedy_from(gamma: &DMatrix<f64>, mut nodes: Vec<usize>, target_size: usize) -> (Vec<usize>, f64) {
    let n = gamma.nrows();
    let mut condition = sampling_condition(&linalg::select_rows(gamma, &nodes));
    while nodes.len() < target_size {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if nodes.contains(&j) {
                continue;
            }
            let mut trial = nodes.clone();
            trial.push(j);
            let c = sampling_condition(&linalg::select_rows(gamma, &trial));
            if best.is_none_or(|(_, b)| c < b * (1.0 - 1e-12)) {
                best = Some((j, c));
            }
        }
        let (j, c) = best.expect("a candidate remains while |S| < N");
        nodes.push(j);
        condition = c;
    }
    (nodes, condition)
}

/// Reconstruction of the full network signal from sampled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub sampled_set: Vec<usize>,
    pub reconstructed: DMatrix<f64>,
    /// Against the ground truth, when one was supplied.
    pub rmse: Option<f64>,
    pub rank_ok: bool,
}

impl RecoveryReport {
    /// Long-format CSV `node,time,truth,estimate` (1-based node ids).
    pub fn to_csv(&self, truth: &DMatrix<f64>) -> Result<String> {
        ensure_dim("truth rows", self.reconstructed.nrows(), truth.nrows())?;
        ensure_dim("truth columns", self.reconstructed.ncols(), truth.ncols())?;
        let mut out = String::from("node,time,truth,estimate\n");
        for i in 0..truth.nrows() {
            for k in 0..truth.ncols() {
                let _ = writeln!(
                    out,
                    "{},{k},{},{}",
                    i + 1,
                    crate::fmt_f64(truth[(i, k)]),
                    crate::fmt_f64(self.reconstructed[(i, k)])
                );
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, truth: &DMatrix<f64>) -> Result<()> {
        std::fs::write(path, self.to_csv(truth)?).map_err(|e| Error::io(path, e))
    }
}

/// `X̂ = Γ pinv(Γ_S) X_S`.
pub fn reconstruct_dynamics(
    gamma: &DMatrix<f64>,
    sampled: &[usize],
    measured: &DMatrix<f64>,
    truth: Option<&DMatrix<f64>>,
) -> Result<RecoveryReport> {
    ensure_dim("sampled rows", sampled.len(), measured.nrows())?;
    let n = gamma.nrows();
    if let Some(&bad) = sampled.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("sampled node {bad} outside 0..{n}")));
    }
    let gs = linalg::select_rows(gamma, sampled);
    let rank_ok = linalg::numerical_rank(&gs, linalg::PINV_RTOL) == gamma.ncols();
    let reconstructed = gamma * (linalg::pinv(&gs, linalg::PINV_RTOL) * measured);
    let rmse = match truth {
        Some(t) => {
            ensure_dim("truth rows", n, t.nrows())?;
            ensure_dim("truth columns", measured.ncols(), t.ncols())?;
            Some(((&reconstructed - t).norm_squared() / t.len() as f64).sqrt())
        }
        None => None,
    };
    Ok(RecoveryReport {
        sampled_set: sampled.to_vec(),
        reconstructed,
        rmse,
        rank_ok,
    })
}

/// Eve's estimate of the plaintext from the ciphertext intercepted on the
/// tx hop, and her bit error rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EveResult {
    pub estimate: Vec<f64>,
    pub ber: f64,
}

/// With a reconstructed tx row Eve subtracts `α_tx X̂_tx`; without one she
/// demodulates the ciphertext as is.
pub fn eve_decrypt(
    ciphertext: &[f64],
    recovered_tx: Option<&[f64]>,
    weight_tx: f64,
    bits: &[u8],
    amplitude: f64,
) -> Result<EveResult> {
    let estimate = match recovered_tx {
        Some(row) => pipeline::relay_process(ciphertext, row, -weight_tx)?,
        None => ciphertext.to_vec(),
    };
    let ber = pipeline::demodulate_and_ber(&estimate, bits, amplitude)?;
    Ok(EveResult { estimate, ber })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, s: u64) -> DMatrix<f64> {
        let mut rng = seed::rng(s);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn orthonormal(n: usize, k: usize, s: u64) -> DMatrix<f64> {
        gaussian(n, k, s).qr().q().columns(0, k).into_owned()
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for last in (k - 1)..n {
            for mut c in combinations(last, k - 1) {
                c.push(last);
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn identity_rows_tie_to_lowest() {
        let g = DMatrix::<f64>::identity(5, 3);
        let s = greedy_sampling_set(&g, 3).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 2]);
        assert!((s.condition - 1.0).abs() < 1e-12);
        assert!(s.rank_ok);
        assert!(greedy_sampling_set(&g, 0).is_err());
        assert!(greedy_sampling_set(&g, 6).is_err());
    }

    #[test]
    fn greedy_near_exhaustive_small() {
        for seed in 0..200 {
            let n = 4 + (seed as usize % 5);
            let r = 1 + (seed as usize % 3);
            let g = orthonormal(n, r, seed);
            for k in 1..=3 {
                let greedy = greedy_sampling_set(&g, k).unwrap();
                let best = combinations(n, k)
                    .iter()
                    .map(|c| sampling_condition(&linalg::select_rows(&g, c)))
                    .fold(f64::INFINITY, f64::min);
                assert!(greedy.condition <= 2.0 * best, "seed {seed} k {k}: {} vs {best}", greedy.condition);
            }
        }
    }

    #[test]
    fn rank_deficiency_reported() {
        let g = orthonormal(6, 3, 1);
        let s = greedy_sampling_set(&g, 2).unwrap();
        assert!(!s.rank_ok);
        let x = &g * gaussian(3, 10, 2);
        let rep = reconstruct_dynamics(&g, &s.nodes, &linalg::select_rows(&x, &s.nodes), Some(&x)).unwrap();
        assert!(!rep.rank_ok);
        assert!(rep.rmse.unwrap() >= 0.0);
    }

    #[test]
    fn exact_sampling_theorem() {
        let g = orthonormal(10, 3, 3);
        let x = &g * gaussian(3, 50, 4);
        let s = greedy_sampling_set(&g, 3).unwrap();
        assert!(s.rank_ok);
        let rep = reconstruct_dynamics(&g, &s.nodes, &linalg::select_rows(&x, &s.nodes), Some(&x)).unwrap();
        assert!((&rep.reconstructed - &x).norm() / x.norm() < 1e-8);
        assert!(rep.rmse.unwrap() < 1e-8);
    }

    #[test]
    fn adding_nodes_never_hurts_noiseless() {
        let g = orthonormal(12, 4, 5);
        let x = &g * gaussian(4, 30, 6);
        let order = greedy_sampling_set(&g, 12).unwrap().nodes;
        let mut last = f64::INFINITY;
        for k in 1..=12 {
            let set = &order[..k];
            let rep = reconstruct_dynamics(&g, set, &linalg::select_rows(&x, set), Some(&x)).unwrap();
            let e = rep.rmse.unwrap();
            assert!(e <= last + 1e-10);
            last = e;
        }
    }

    #[test]
    fn noise_propagation_is_linear_in_sigma() {
        // rmse of the noise-only reconstruction equals σ‖Γ pinv(Γ_S)‖_F / sqrt(N)
        let g = orthonormal(10, 3, 7);
        let s = greedy_sampling_set(&g, 4).unwrap();
        let op = &g * linalg::pinv(&linalg::select_rows(&g, &s.nodes), linalg::PINV_RTOL);
        let k = 20_000;
        for &sd in &[1e-3, 1e-2] {
            let noise = gaussian(4, k, 8) * sd;
            let rep = reconstruct_dynamics(&g, &s.nodes, &noise, Some(&DMatrix::zeros(10, k))).unwrap();
            let predicted = sd * op.norm() / 10f64.sqrt();
            let got = rep.rmse.unwrap();
            assert!((got - predicted).abs() < 0.03 * predicted, "{got} vs {predicted}");
        }
    }

    #[test]
    fn eve_paths() {
        let bits = vec![1, 0, 1, 1, 0];
        let row = [0.3, -0.2, 0.5, 0.1, -0.4];
        let plain = pipeline::modulate_ook(&bits, 1.0).unwrap();
        let cipher = pipeline::encrypt(&plain, &row, 1.0).unwrap();
        let perfect = eve_decrypt(&cipher, Some(&row), 1.0, &bits, 1.0).unwrap();
        assert_eq!(perfect.ber, 0.0);
        let zero = eve_decrypt(&cipher, Some(&[0.0; 5]), 1.0, &bits, 1.0).unwrap();
        let none = eve_decrypt(&cipher, None, 1.0, &bits, 1.0).unwrap();
        assert_eq!(zero, none);
    }

    #[test]
    fn jamming_counts_and_variance() {
        let cfg = ActiveAttackConfig::new(0.0, 5.0, vec![0, 1], 1).unwrap();
        assert!(jamming_schedule(&cfg, 5000, 1e-3).unwrap().is_empty());
        let cfg = ActiveAttackConfig::new(500.0, 5.0, vec![0, 1, 2, 3], 2).unwrap();
        let p = jamming_schedule(&cfg, 5000, 1e-3).unwrap();
        let count = p.arrival_count() as f64;
        assert!((count - 2500.0).abs() <= 3.0 * 2500f64.sqrt(), "{count}");
        let draws: Vec<f64> = p.injections().iter().flat_map(|i| i.updates.iter().map(|u| u.1)).collect();
        assert!(draws.len() >= 4 * 2000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var - 5.0).abs() < 0.5, "{var}");
        assert!(ActiveAttackConfig::new(-1.0, 5.0, vec![], 0).is_err());
        assert!(jamming_schedule(&cfg, 0, 1e-3).is_err());
    }

    #[test]
    fn sample_sizes() {
        let sizes: Vec<usize> = [0.0, 0.05, 0.10, 0.25, 0.40]
            .iter()
            .map(|&f| PassiveEveConfig::new(f).unwrap().sample_size(39))
            .collect();
        assert_eq!(sizes, vec![0, 2, 4, 10, 16]);
        assert!(PassiveEveConfig::new(1.5).is_err());
    }

    #[test]
    fn extended_sets_are_nested_and_error_never_grows() {
        let g = orthonormal(12, 4, 21);
        let truth = &g * gaussian(4, 50, 22);
        let base = greedy_sampling_set(&g, 4).unwrap();
        let full = extend_sampling_set(&g, &base.nodes, 9).unwrap();
        assert_eq!(&full.nodes[..4], &base.nodes[..]);
        assert!(full.rank_ok);
        let mut last = f64::INFINITY;
        for k in 1..=9 {
            let s = &full.nodes[..k];
            let rep = reconstruct_dynamics(&g, s, &linalg::select_rows(&truth, s), Some(&truth)).unwrap();
            let e = rep.rmse.unwrap();
            assert!(e <= last + 1e-12, "size {k}: {e} > {last}");
            last = e;
        }
        assert!(last < 1e-10);
        assert!(extend_sampling_set(&g, &base.nodes, 3).is_err());
        assert!(extend_sampling_set(&g, &[], 3).is_err());
    }
}
