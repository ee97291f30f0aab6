use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::{resolve_data_path, ModelConfig, PairSelection, ScenarioConfig};
use crate::adversary::{jamming_schedule, ActiveAttackConfig};
use crate::error::{Error, Result};
use crate::gft::{choose_signal_mode, fit_surrogate_with, GftSurrogate, TrainingSet};
use crate::net_model::{
    simulate_linear, BusData, DynamicsTrace, GaussianSpec, LinearDynamicsParams, PerturbationProcess, PoissonSpec,
    SwingInitial, SwingSimulator,
};
use crate::seed::{self, tag};

#[derive(Debug, Clone)]
enum Dynamics {
    Swing {
        sim: SwingSimulator,
        generators: usize,
        loads: Vec<usize>,
        speed_sd: f64,
        load_sd: f64,
    },
    Linear {
        transition: DMatrix<f64>,
        basis: DMatrix<f64>,
        state_scale: f64,
    },
}

/// A validated config with its dynamics model built and pairs resolved.
///
/// Random streams are keyed as `seed::derive(master, parts)` with
///
/// | stream | parts |
/// |---|---|
/// | pair sample | `[tag("pairs")]` |
/// | training run `d` of trial `t` | `[tag("training"), t, d]` |
/// | transmission initial state | `[tag("transmission"), t]` |
/// | natural perturbations | `[tag("natural"), t]` |
/// | jamming at rate index `k` | `[tag("jamming"), t, k]` |
/// | plaintext bits of pair `p` | `[tag("bits"), t, p]` |
/// | sensor noise, noise sweep point `j` | `[tag("noise"), j, t]` |
/// | Eve's sensor noise | `[tag("eve-noise"), j, t]` |
/// | sensor noise, jamming sweep point `j` | `[tag("jam-noise"), j, t]` |
///
/// Trial-level streams do not depend on the sweep point, so every sweep
/// value sees the same traces and bits (common random numbers).
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    dynamics: Dynamics,
    dt: f64,
    node_count: usize,
    /// Zero-based.
    pub pairs: Vec<(usize, usize)>,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut seed::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn orthonormal(rows: usize, cols: usize, rng: &mut seed::Rng) -> DMatrix<f64> {
    gaussian_matrix(rows, cols, rng).qr().q().columns(0, cols).into_owned()
}

/// Stratified sample of `count` distinct ordered pairs.
fn sample_pairs(n: usize, count: usize, rng: &mut seed::Rng) -> Result<Vec<(usize, usize)>> {
    let total = n * (n - 1);
    if count > total {
        return Err(Error::Config(format!("cannot sample {count} pairs from {total}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut used = vec![false; n * n];
    let mut pairs = Vec::with_capacity(count);
    let mut i = 0;
    while pairs.len() < count {
        let tx = order[i % n];
        i += 1;
        let free: Vec<usize> = (0..n).filter(|&rx| rx != tx && !used[tx * n + rx]).collect();
        if free.is_empty() {
            continue;
        }
        let rx = free[rng.random_range(0..free.len())];
        used[tx * n + rx] = true;
        pairs.push((tx, rx));
    }
    Ok(pairs)
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let (dynamics, dt, node_count) = match &config.model {
            ModelConfig::Swing39 {
                data,
                dt,
                initial_speed_sd,
                initial_load_sd,
            } => {
                let path = resolve_data_path(data);
                let bus = BusData::read(&path)?;
                let topo = bus.topology()?;
                let params = bus.swing_params()?;
                let sim = SwingSimulator::new(&topo, &params)?;
                let n = topo.node_count();
                (
                    Dynamics::Swing {
                        sim,
                        generators: topo.generators().len(),
                        loads: topo.loads().to_vec(),
                        speed_sd: *initial_speed_sd,
                        load_sd: *initial_load_sd,
                    },
                    *dt,
                    n,
                )
            }
            ModelConfig::Linear {
                nodes,
                rank,
                seed: s,
                dt,
                state_scale,
            } => {
                let mut rng = seed::rng(*s);
                let basis = orthonormal(*nodes, *rank, &mut rng);
                let rot = orthonormal(*rank, *rank, &mut rng);
                let transition = &basis * rot * basis.transpose();
                (
                    Dynamics::Linear {
                        transition,
                        basis,
                        state_scale: *state_scale,
                    },
                    *dt,
                    *nodes,
                )
            }
        };
        let n = node_count;
        let pairs = match &config.pairs {
            PairSelection::All => (0..n)
                .flat_map(|tx| (0..n).filter(move |&rx| rx != tx).map(move |rx| (tx, rx)))
                .collect(),
            PairSelection::Sample(k) => sample_pairs(n, *k, &mut seed::rng_for(config.seed, &[tag("pairs")]))?,
            PairSelection::List(list) => {
                let mut out = Vec::with_capacity(list.len());
                for &(tx, rx) in list {
                    if tx == 0 || rx == 0 || tx > n || rx > n || tx == rx {
                        return Err(Error::Config(format!("invalid pair ({tx}, {rx}) for {n} nodes")));
                    }
                    out.push((tx - 1, rx - 1));
                }
                out
            }
        };
        if let Some(a) = &config.active {
            if let Some(t) = &a.targets {
                Self::check_targets(&dynamics, n, t)?;
            }
        }
        Ok(Self {
            config,
            dynamics,
            dt,
            node_count,
            pairs,
        })
    }

    fn check_targets(dynamics: &Dynamics, n: usize, targets: &[usize]) -> Result<()> {
        for &t in targets {
            let ok = t >= 1
                && t <= n
                && match dynamics {
                    Dynamics::Swing { loads, .. } => loads.contains(&(t - 1)),
                    Dynamics::Linear { .. } => true,
                };
            if !ok {
                return Err(Error::Config(format!("jamming target {t} is not a perturbable node")));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Nodes where injections can land: load buses, or every node.
    pub fn perturbable_nodes(&self) -> Vec<usize> {
        match &self.dynamics {
            Dynamics::Swing { loads, .. } => loads.clone(),
            Dynamics::Linear { .. } => (0..self.node_count).collect(),
        }
    }

    fn simulate(&self, process: &PerturbationProcess, init_seed: u64) -> Result<DynamicsTrace> {
        let horizon = self.config.horizon;
        let mut rng = seed::rng(init_seed);
        match &self.dynamics {
            Dynamics::Swing {
                sim,
                generators,
                loads,
                speed_sd,
                load_sd,
            } => {
                let mut init = SwingInitial::equilibrium(self.node_count, *generators);
                for g in 0..*generators {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    init.speed_deviation[g] = speed_sd * z;
                }
                for &l in loads {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    init.load_deviation[l] = load_sd * z;
                }
                sim.simulate(process, &init, horizon, self.dt)
            }
            Dynamics::Linear {
                transition,
                basis,
                state_scale,
            } => {
                let c = DVector::from_fn(basis.ncols(), |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    state_scale * z
                });
                let mut params = LinearDynamicsParams::new(transition.clone(), basis * c)?;
                params.sample_period = self.dt;
                simulate_linear(&params, process, horizon)
            }
        }
    }

    /// Perturbation-free training traces of a trial.
    pub fn training_traces(&self, trial: usize) -> Result<Vec<DynamicsTrace>> {
        (0..self.config.training_runs)
            .map(|d| {
                self.simulate(
                    &PerturbationProcess::none(),
                    seed::derive(self.config.seed, &[tag("training"), trial as u64, d as u64]),
                )
            })
            .collect()
    }

    /// Signal mode (configured or chosen from the data) and fitted surrogate.
    pub fn fit(&self, trial: usize) -> Result<GftSurrogate> {
        let traces = self.training_traces(trial)?;
        let mode = match self.config.signal_mode.fixed() {
            Some(m) => m,
            None => choose_signal_mode(&traces, self.config.rank_tolerance)?,
        };
        fit_surrogate_with(&TrainingSet::new(traces, mode), self.config.rank_tolerance, self.config.rank_rule)
    }

    fn natural(&self, trial: usize) -> Result<PerturbationProcess> {
        match &self.config.natural {
            Some(n) if n.rate > 0.0 => PerturbationProcess::poisson(&PoissonSpec {
                rate: n.rate,
                dt: self.dt,
                horizon: self.config.horizon,
                targets: self.perturbable_nodes(),
                amplitude: GaussianSpec::new(0.0, n.variance)?,
                seed: seed::derive(self.config.seed, &[tag("natural"), trial as u64]),
            }),
            _ => Ok(PerturbationProcess::none()),
        }
    }

    /// Transmission-time trace of a trial, with natural perturbations only.
    pub fn transmission_trace(&self, trial: usize) -> Result<DynamicsTrace> {
        let init = seed::derive(self.config.seed, &[tag("transmission"), trial as u64]);
        self.simulate(&self.natural(trial)?, init)
    }

    /// Jamming configuration for rate index `k` of the active sweep.
    pub fn attack(&self, trial: usize, k: usize) -> Result<ActiveAttackConfig> {
        let a = self
            .config
            .active
            .as_ref()
            .ok_or_else(|| Error::Config("no active attacker configured".into()))?;
        let rate = *a
            .rates
            .get(k)
            .ok_or_else(|| Error::invalid(format!("rate index {k} out of range")))?;
        let targets = match &a.targets {
            Some(t) => t.iter().map(|i| i - 1).collect(),
            None => self.perturbable_nodes(),
        };
        ActiveAttackConfig::new(
            rate,
            a.amplitude_variance,
            targets,
            seed::derive(self.config.seed, &[tag("jamming"), trial as u64, k as u64]),
        )
    }

    /// Transmission trace of a trial with the attacker's injections added.
    pub fn jammed_trace(&self, trial: usize, attack: &ActiveAttackConfig) -> Result<(DynamicsTrace, PerturbationProcess)> {
        let jam = jamming_schedule(attack, self.config.horizon, self.dt)?;
        let init = seed::derive(self.config.seed, &[tag("transmission"), trial as u64]);
        let trace = self.simulate(&self.natural(trial)?.merge(&jam), init)?;
        Ok((trace, jam))
    }
}
