use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::model::Scenario;
use super::table::{bucket_fractions, eve_role, jam_role, ResultRow, ResultTable, Sweep, LEGITIMATE};
use crate::adversary::{eve_decrypt, extend_sampling_set, greedy_sampling_set, reconstruct_dynamics, PassiveEveConfig};
use crate::error::{Error, Result};
use crate::gft::GftSurrogate;
use crate::linalg::select_rows;
use crate::net_model::noise_rows;
use crate::pipeline::{transmit, BitStream};
use crate::secrecy::{select_relays, RelayPlan, SolverConfig};
use crate::seed::{self, tag};

/// Relay plans for every pair of the scenario at one noise level,
/// normalised to unit transmitter weight. Pairs whose selection fails are
/// `None`.
pub fn plans_for(scenario: &Scenario, surrogate: &GftSurrogate, noise_variance: f64) -> Vec<Option<RelayPlan>> {
    let mean = scenario.config.amplitude / 2.0;
    let cfg = SolverConfig {
        signal_mean: mean,
        noise_variance,
        ..scenario.config.solver
    };
    scenario
        .pairs
        .iter()
        .map(|&(tx, rx)| {
            select_relays(surrogate, tx, rx, &cfg)
                .and_then(|p| p.normalized(surrogate.surrogate(), mean, noise_variance))
                .ok()
        })
        .collect()
}

/// Measured trace in the surrogate's signal mode.
fn measure(scenario: &Scenario, surrogate: &GftSurrogate, clean: &DMatrix<f64>, variance: f64, key: &[u64]) -> Result<DMatrix<f64>> {
    let n = clean.nrows();
    let noise = noise_rows(&(0..n).collect::<Vec<_>>(), clean.ncols(), variance, seed::derive(scenario.config.seed, key));
    surrogate.mode().apply(&(clean + noise))
}

type PairBers = Vec<Option<f64>>;

#[derive(Debug, Default)]
struct TrialResult {
    /// `[noise point][pair]`
    legit: Vec<PairBers>,
    /// `[noise point][fraction][pair]`
    eve: Vec<Vec<PairBers>>,
    /// `[noise point][fraction]`
    eve_rmse: Vec<Vec<Option<f64>>>,
    /// `[rate][noise point][pair]`
    jam: Vec<Vec<PairBers>>,
}

fn legit_bers(plans: &[Option<RelayPlan>], measured: &DMatrix<f64>, bits: &[Vec<u8>], amplitude: f64) -> Result<PairBers> {
    plans
        .iter()
        .zip(bits)
        .map(|(plan, b)| match plan {
            Some(p) => transmit(p, measured, b, amplitude)?.ber(b).map(Some),
            None => Ok(None),
        })
        .collect()
}

fn run_trial(scenario: &Scenario, trial: usize) -> Result<TrialResult> {
    let cfg = &scenario.config;
    let t = trial as u64;
    let amplitude = cfg.amplitude;
    let surrogate = scenario.fit(trial)?;
    let gamma = surrogate.surrogate();
    let mode = surrogate.mode();
    let clean = scenario.transmission_trace(trial)?;
    let clean_m = mode.apply(clean.values())?;
    let len = clean_m.ncols();
    let bits: Vec<Vec<u8>> = (0..scenario.pairs.len())
        .map(|p| BitStream::random(len, seed::derive(cfg.seed, &[tag("bits"), t, p as u64])).bits)
        .collect();

    let mut plan_cache: HashMap<u64, Vec<Option<RelayPlan>>> = HashMap::new();
    let mut plans = |var: f64| -> Vec<Option<RelayPlan>> {
        plan_cache
            .entry(var.to_bits())
            .or_insert_with(|| plans_for(scenario, &surrogate, var))
            .clone()
    };

    // Eve's sets are prefixes of one greedy chain, seeded by the best set
    // of the critical size r, so a larger fraction always sees a superset.
    let fractions: Vec<f64> = cfg.passive.as_ref().map(|p| p.fractions.clone()).unwrap_or_default();
    let sizes = fractions
        .iter()
        .map(|&f| Ok(PassiveEveConfig::new(f)?.sample_size(scenario.node_count())))
        .collect::<Result<Vec<usize>>>()?;
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let chain = if largest == 0 {
        Vec::new()
    } else {
        let base = greedy_sampling_set(gamma, largest.min(surrogate.rank()))?;
        extend_sampling_set(gamma, &base.nodes, largest)?.nodes
    };
    let sampling: Vec<Option<&[usize]>> = sizes.iter().map(|&k| (k > 0).then(|| &chain[..k])).collect();

    let mut out = TrialResult::default();
    for (j, &var) in cfg.noise_variances.iter().enumerate() {
        let plans = plans(var);
        let measured = measure(scenario, &surrogate, clean.values(), var, &[tag("noise"), j as u64, t])?;
        out.legit.push(legit_bers(&plans, &measured, &bits, amplitude)?);

        let Some(passive) = &cfg.passive else { continue };
        let eve_var = passive.noise_variance.unwrap_or(var);
        let eve_measured = measure(scenario, &surrogate, clean.values(), eve_var, &[tag("eve-noise"), j as u64, t])?;
        let mut eve_rows = Vec::with_capacity(fractions.len());
        let mut rmses = Vec::with_capacity(fractions.len());
        for set in &sampling {
            let recovered = match set {
                Some(nodes) => Some(reconstruct_dynamics(
                    gamma,
                    nodes,
                    &select_rows(&eve_measured, nodes),
                    Some(&clean_m),
                )?),
                None => None,
            };
            let mut row = Vec::with_capacity(plans.len());
            for ((plan, b), &(tx, _)) in plans.iter().zip(&bits).zip(&scenario.pairs) {
                let Some(p) = plan else {
                    row.push(None);
                    continue;
                };
                let rec = transmit(p, &measured, b, amplitude)?;
                let tx_row: Option<Vec<f64>> = recovered.as_ref().map(|r| r.reconstructed.row(tx).iter().copied().collect());
                let eve = eve_decrypt(rec.ciphertext(), tx_row.as_deref(), p.weights[tx], b, amplitude)?;
                row.push(Some(eve.ber));
            }
            eve_rows.push(row);
            rmses.push(recovered.and_then(|r| r.rmse));
        }
        out.eve.push(eve_rows);
        out.eve_rmse.push(rmses);
    }

    if let Some(active) = &cfg.active {
        for k in 0..active.rates.len() {
            let attack = scenario.attack(trial, k)?;
            let jammed = if attack.jamming_rate == 0.0 {
                clean.clone()
            } else {
                scenario.jammed_trace(trial, &attack)?.0
            };
            let mut per_var = Vec::with_capacity(active.noise_variances.len());
            for (j, &var) in active.noise_variances.iter().enumerate() {
                let plans = plans(var);
                let measured = measure(scenario, &surrogate, jammed.values(), var, &[tag("jam-noise"), j as u64, t])?;
                per_var.push(legit_bers(&plans, &measured, &bits, amplitude)?);
            }
            out.jam.push(per_var);
        }
    }
    Ok(out)
}

struct Aggregate {
    mean_ber: f64,
    buckets: [f64; 3],
    pairs: usize,
    failures: usize,
}

/// Average each pair over its successful trials, then over pairs.
fn aggregate(per_trial: &[&PairBers], what: &str) -> Result<Aggregate> {
    let n_pairs = per_trial.first().map_or(0, |v| v.len());
    let mut failures = 0;
    let mut pair_means = Vec::with_capacity(n_pairs);
    for p in 0..n_pairs {
        let vals: Vec<f64> = per_trial.iter().filter_map(|v| v[p]).collect();
        failures += per_trial.len() - vals.len();
        if !vals.is_empty() {
            pair_means.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    if pair_means.is_empty() {
        return Err(Error::Solver(format!("relay selection failed for every pair ({what})")));
    }
    Ok(Aggregate {
        mean_ber: pair_means.iter().sum::<f64>() / pair_means.len() as f64,
        buckets: bucket_fractions(&pair_means),
        pairs: pair_means.len(),
        failures,
    })
}

/// Run every configured sweep. Trials run in parallel; rows come out in
/// config order (noise sweep with legitimate then Eve roles, then the
/// jamming sweep by rate and noise level), independent of scheduling.
pub fn run_scenario(scenario: &Scenario) -> Result<ResultTable> {
    let cfg = &scenario.config;
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, t))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut push = |sweep: Sweep, value: f64, var: f64, role: String, agg: Aggregate, rmse: Option<f64>| {
        rows.push(ResultRow {
            scenario: cfg.id.clone(),
            sweep,
            sweep_value: value,
            noise_variance: var,
            role,
            mean_ber: agg.mean_ber,
            buckets: agg.buckets,
            rmse,
            pairs: agg.pairs,
            failures: agg.failures,
            seed: cfg.seed,
        });
    };

    for (j, &var) in cfg.noise_variances.iter().enumerate() {
        let legit: Vec<&PairBers> = trials.iter().map(|tr| &tr.legit[j]).collect();
        push(Sweep::Noise, var, var, LEGITIMATE.into(), aggregate(&legit, LEGITIMATE)?, None);
        if let Some(passive) = &cfg.passive {
            for (i, &f) in passive.fractions.iter().enumerate() {
                let role = eve_role(f);
                let eve: Vec<&PairBers> = trials.iter().map(|tr| &tr.eve[j][i]).collect();
                let rmses: Vec<f64> = trials.iter().filter_map(|tr| tr.eve_rmse[j][i]).collect();
                let rmse = (!rmses.is_empty()).then(|| rmses.iter().sum::<f64>() / rmses.len() as f64);
                let agg = aggregate(&eve, &role)?;
                push(Sweep::Noise, var, var, role, agg, rmse);
            }
        }
    }
    if let Some(active) = &cfg.active {
        for (k, &rate) in active.rates.iter().enumerate() {
            for (j, &var) in active.noise_variances.iter().enumerate() {
                let role = jam_role(rate);
                let jam: Vec<&PairBers> = trials.iter().map(|tr| &tr.jam[k][j]).collect();
                let agg = aggregate(&jam, &role)?;
                push(Sweep::Jamming, rate, var, role, agg, None);
            }
        }
    }
    Ok(ResultTable { rows })
}
