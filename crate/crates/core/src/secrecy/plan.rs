use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::report::{secrecy_rate, SecrecyReport};
use super::solver::{initial_point, inner_step, rescale, sparsify_weights, Problem, SolverConfig};
use crate::error::{Error, Result};
use crate::gft::GftSurrogate;

/// Relay weights for one (tx, rx) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayPlan {
    pub tx: usize,
    pub rx: usize,
    /// Zero outside `{tx, rx} ∪ relay_set`.
    pub weights: DVector<f64>,
    pub relay_set: Vec<usize>,
    /// `‖Γᵀα‖`.
    pub residual: f64,
    pub slack: f64,
    pub report: SecrecyReport,
    /// Relaxed objective at the start and after every outer iteration.
    pub solver_trace: Vec<f64>,
    pub converged: bool,
}

impl RelayPlan {
    pub fn iterations(&self) -> usize {
        self.solver_trace.len().saturating_sub(1)
    }

    /// Nodes that add their measured row, in chain order: tx, relays, rx.
    pub fn participants(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.relay_set.len() + 2);
        v.push(self.tx);
        v.extend_from_slice(&self.relay_set);
        v.push(self.rx);
        v
    }

    /// The same plan rescaled so that the tx weight is one. The optimizer
    /// settles at an arbitrary overall scale; transmission uses unit tx
    /// weight. Residual, slack and report are recomputed for the new scale.
    pub fn normalized(&self, gamma: &DMatrix<f64>, signal_mean: f64, noise_variance: f64) -> Result<RelayPlan> {
        let k = 1.0 / self.weights[self.tx];
        let weights = &self.weights * k;
        let residual = gamma.tr_mul(&weights).norm();
        let report = secrecy_rate(&weights, gamma, signal_mean, noise_variance, self.tx, self.rx)?;
        Ok(RelayPlan {
            weights,
            residual,
            slack: self.slack * k * k,
            report,
            ..self.clone()
        })
    }
}

/// Offline relay selection for one pair: successive convex steps from the
/// least-squares start until the objective change is within tolerance,
/// then sparsification.
pub fn select_relays(surrogate: &GftSurrogate, tx: usize, rx: usize, config: &SolverConfig) -> Result<RelayPlan> {
    select_relays_with(surrogate.surrogate(), tx, rx, config)
}

/// [`select_relays`] on a bare `Γ`.
pub fn select_relays_with(gamma: &DMatrix<f64>, tx: usize, rx: usize, config: &SolverConfig) -> Result<RelayPlan> {
    let p = Problem::new(gamma, tx, rx, config)?;
    let (mut alpha, mut beta) = initial_point(&p);
    let mut value = p.objective(&alpha, beta);
    if !value.is_finite() {
        return Err(Error::Solver("no finite initial point".into()));
    }
    let mut trace = vec![value];
    let mut converged = false;
    for _ in 0..config.max_outer_iterations {
        let step = inner_step(&p, &alpha, beta, config)?;
        let step = rescale(&p, step);
        let delta = value - step.objective;
        alpha = step.alpha;
        beta = step.beta;
        value = step.objective;
        trace.push(value);
        if delta.abs() <= config.outer_tolerance {
            converged = true;
            break;
        }
    }
    let threshold = config.sparsify_threshold * alpha.amax();
    let sparse = sparsify_weights(gamma, &alpha, tx, rx, threshold)?;
    let slack = beta.max(p.constraint(&sparse.weights));
    let report = secrecy_rate(&sparse.weights, gamma, config.signal_mean, config.noise_variance, tx, rx)?;
    Ok(RelayPlan {
        tx,
        rx,
        weights: sparse.weights,
        relay_set: sparse.relay_set,
        residual: sparse.residual,
        slack,
        report,
        solver_trace: trace,
        converged,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanMeta {
    tx: usize,
    rx: usize,
    node_count: usize,
    iterations: usize,
    converged: bool,
    residual: f64,
    slack: f64,
    report: SecrecyReport,
    solver_trace: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    plans: Vec<PlanMeta>,
}

/// Sidecar path for a plan CSV: same stem, `.json` extension.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

/// Plans as CSV rows `tx,rx,node,weight` (1-based node ids, nonzero
/// weights only, tx first, then relays, then rx).
pub fn plans_to_csv(plans: &[RelayPlan]) -> String {
    let mut out = String::from("tx,rx,node,weight\n");
    for p in plans {
        for i in p.participants() {
            let _ = writeln!(out, "{},{},{},{}", p.tx + 1, p.rx + 1, i + 1, crate::fmt_f64(p.weights[i]));
        }
    }
    out
}

/// Write the CSV and its JSON sidecar of solver metadata.
pub fn write_plans(path: &Path, plans: &[RelayPlan]) -> Result<()> {
    std::fs::write(path, plans_to_csv(plans)).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        plans: plans
            .iter()
            .map(|p| PlanMeta {
                tx: p.tx + 1,
                rx: p.rx + 1,
                node_count: p.weights.len(),
                iterations: p.iterations(),
                converged: p.converged,
                residual: p.residual,
                slack: p.slack,
                report: p.report,
                solver_trace: p.solver_trace.clone(),
            })
            .collect(),
    };
    let json_path = sidecar_path(path);
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
}

pub fn read_plans(path: &Path) -> Result<Vec<RelayPlan>> {
    let json_path = sidecar_path(path);
    for p in [path, json_path.as_path()] {
        if !p.exists() {
            return Err(Error::MissingData(p.to_path_buf()));
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side: Sidecar = {
        let s = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::Parse {
            path: json_path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })?
    };
    let bad = |line: usize, d: String| Error::Parse {
        path: path.display().to_string(),
        line,
        detail: d,
    };
    let mut plans: Vec<RelayPlan> = side
        .plans
        .iter()
        .map(|m| RelayPlan {
            tx: m.tx - 1,
            rx: m.rx - 1,
            weights: DVector::zeros(m.node_count),
            relay_set: Vec::new(),
            residual: m.residual,
            slack: m.slack,
            report: m.report,
            solver_trace: m.solver_trace.clone(),
            converged: m.converged,
        })
        .collect();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(ln + 1, "expected tx,rx,node,weight".into()));
        }
        let id = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .map(|v| v - 1)
                .ok_or_else(|| bad(ln + 1, format!("bad node id {s:?}")))
        };
        let (tx, rx, node) = (id(f[0])?, id(f[1])?, id(f[2])?);
        let w: f64 = f[3].parse().map_err(|_| bad(ln + 1, format!("bad weight {:?}", f[3])))?;
        let plan = plans
            .iter_mut()
            .find(|p| p.tx == tx && p.rx == rx)
            .ok_or_else(|| bad(ln + 1, "pair missing from sidecar".into()))?;
        if node >= plan.weights.len() {
            return Err(bad(ln + 1, "node outside network".into()));
        }
        plan.weights[node] = w;
        if node != tx && node != rx {
            plan.relay_set.push(node);
        }
    }
    Ok(plans)
}
