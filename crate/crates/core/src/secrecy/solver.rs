//! Successive convex approximation for relay weights.
//!
//! The relaxed problem over `(α, β)` is
//!
//! ```text
//! minimize   −log2(1 + E²/β) + max_j log2(1 + E²/(α_j² g_j)) + λ‖α‖₁
//! subject to β ≥ ‖Γᵀα‖² + (σ² + ridge)‖α‖²,   α_tx, α_rx ≥ floor
//! ```
//!
//! with `g_j = ‖Γ_j‖²` for `j ∈ {tx, rx}`. The first term is concave in
//! `β`; each outer step replaces it by its tangent at the current `β` and
//! solves the resulting convex problem exactly.
//!
//! The convex step introduces an epigraph scalar `t` for the eavesdropper
//! maximum. For fixed `t` the problem is a quadratic plus l1 with lower
//! bounds on the two endpoint weights, solved by a primal active-set
//! method. The optimal value is convex in `t` and is minimized by golden
//! section search.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub l1_weight: f64,
    /// `E(s)`; `A/2` for on-off keying with amplitude `A`.
    pub signal_mean: f64,
    pub noise_variance: f64,
    pub outer_tolerance: f64,
    pub max_outer_iterations: usize,
    /// Relative width at which the golden-section search over the
    /// epigraph scalar stops.
    pub inner_tolerance: f64,
    /// Cap on active-set steps per quadratic subproblem.
    pub max_inner_iterations: usize,
    /// Weights below this fraction of `max |α_i|` are zeroed.
    pub sparsify_threshold: f64,
    pub positivity_floor: f64,
    /// Added to `σ²` inside the optimizer so that `σ² = 0` stays well posed.
    pub ridge: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            l1_weight: 1.0,
            signal_mean: 0.5,
            noise_variance: 0.0,
            outer_tolerance: 1e-6,
            max_outer_iterations: 200,
            inner_tolerance: 1e-10,
            max_inner_iterations: 1000,
            sparsify_threshold: 1e-6,
            positivity_floor: 1e-2,
            ridge: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tolerance", self.outer_tolerance),
            ("inner_tolerance", self.inner_tolerance),
            ("positivity_floor", self.positivity_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.signal_mean != 0.0 && self.signal_mean.is_finite()) {
            return Err(Error::Config("signal_mean must be nonzero".into()));
        }
        for (name, v) in [
            ("l1_weight", self.l1_weight),
            ("noise_variance", self.noise_variance),
            ("ridge", self.ridge),
            ("sparsify_threshold", self.sparsify_threshold),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.noise_variance + self.ridge <= 0.0 {
            return Err(Error::Config("noise_variance + ridge must be positive".into()));
        }
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one convex step.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub alpha: DVector<f64>,
    pub beta: f64,
    /// Relaxed objective at `(alpha, beta)`.
    pub objective: f64,
}

/// The relaxed problem for one (tx, rx) pair.
pub(crate) struct Problem<'a> {
    gamma: &'a DMatrix<f64>,
    tx: usize,
    rx: usize,
    e2: f64,
    shrink: f64,
    lambda: f64,
    floor: f64,
    g_tx: f64,
    g_rx: f64,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(gamma: &'a DMatrix<f64>, tx: usize, rx: usize, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = gamma.nrows();
        if tx == rx {
            return Err(Error::invalid("tx and rx must differ"));
        }
        if tx >= n || rx >= n {
            return Err(Error::invalid(format!("tx/rx outside 0..{n}")));
        }
        let g_tx = gamma.row(tx).norm_squared();
        let g_rx = gamma.row(rx).norm_squared();
        if g_tx == 0.0 || g_rx == 0.0 {
            return Err(Error::Solver(format!(
                "node {} has no dynamics in the surrogate; no finite objective exists",
                if g_tx == 0.0 { tx } else { rx }
            )));
        }
        Ok(Self {
            gamma,
            tx,
            rx,
            e2: config.signal_mean * config.signal_mean,
            shrink: config.noise_variance + config.ridge,
            lambda: config.l1_weight,
            floor: config.positivity_floor,
            g_tx,
            g_rx,
        })
    }

    /// `‖Γᵀα‖² + (σ² + ridge)‖α‖²`.
    pub(crate) fn constraint(&self, a: &DVector<f64>) -> f64 {
        self.gamma.tr_mul(a).norm_squared() + self.shrink * a.norm_squared()
    }

    fn eve_term(&self, a: f64, g: f64) -> f64 {
        log2_1p(self.e2 / (a * a * g))
    }

    pub(crate) fn objective(&self, a: &DVector<f64>, beta: f64) -> f64 {
        let eve = self.eve_term(a[self.tx], self.g_tx).max(self.eve_term(a[self.rx], self.g_rx));
        -log2_1p(self.e2 / beta) + eve + self.lambda * a.lp_norm(1)
    }

    /// Smallest endpoint weight keeping the eavesdropper term at or below `t`.
    fn lower_bound(&self, t: f64, g: f64) -> f64 {
        let denom = g * (t * LN_2).exp_m1();
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        (self.e2 / denom).sqrt().max(self.floor)
    }

    fn t_max(&self) -> f64 {
        self.eve_term(self.floor, self.g_tx).max(self.eve_term(self.floor, self.g_rx))
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// One convex step from a feasible `(α_ini, β_ini)`, linearizing the
/// legitimate term at `β_ini`. Returns the start unchanged when no
/// improvement is found.
pub fn solve_inner_convex(
    gamma: &DMatrix<f64>,
    tx: usize,
    rx: usize,
    alpha_ini: &DVector<f64>,
    beta_ini: f64,
    config: &SolverConfig,
) -> Result<InnerSolution> {
    let p = Problem::new(gamma, tx, rx, config)?;
    inner_step(&p, alpha_ini, beta_ini, config)
}

pub(crate) fn inner_step(p: &Problem<'_>, alpha_ini: &DVector<f64>, beta_ini: f64, config: &SolverConfig) -> Result<InnerSolution> {
    ensure_dim("initial weight length", p.gamma.nrows(), alpha_ini.len())?;
    let slack = 1e-12;
    if alpha_ini[p.tx] < p.floor * (1.0 - slack) || alpha_ini[p.rx] < p.floor * (1.0 - slack) {
        return Err(Error::Solver("initial endpoint weights below the positivity floor".into()));
    }
    let noisy = p.gamma.tr_mul(alpha_ini).norm_squared() + config.noise_variance * alpha_ini.norm_squared();
    if !(beta_ini > 0.0) || beta_ini < noisy * (1.0 - slack) {
        return Err(Error::Solver(format!("infeasible start: beta {beta_ini} below constraint {noisy}")));
    }
    let start_objective = p.objective(alpha_ini, beta_ini);

    // tangent slope of −log2(1 + E²/β) at β_ini
    let c = p.e2 / (LN_2 * (beta_ini * beta_ini + p.e2 * beta_ini));
    let mut qp = BoundedLasso {
        gamma: p.gamma,
        shrink: p.shrink,
        mu: p.lambda / c,
        tx: p.tx,
        rx: p.rx,
        lower: [p.floor, p.floor],
        max_iter: config.max_inner_iterations,
    };
    let mut warm = alpha_ini.clone();
    let mut eval = |t: f64, warm: &mut DVector<f64>| -> (f64, DVector<f64>) {
        qp.lower = [p.lower_bound(t, p.g_tx), p.lower_bound(t, p.g_rx)];
        let mut start = warm.clone();
        start[p.tx] = start[p.tx].max(qp.lower[0]);
        start[p.rx] = start[p.rx].max(qp.lower[1]);
        let a = qp.solve(start);
        *warm = a.clone();
        (t + c * qp.value(&a), a)
    };

    let t_hi = p.t_max();
    let (mut lo, mut hi) = (0.0, t_hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut a1) = eval(x1, &mut warm);
    let (mut f2, mut a2) = eval(x2, &mut warm);
    while hi - lo > config.inner_tolerance * hi.max(1.0) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            a2 = a1.clone();
            x1 = hi - inv_phi * (hi - lo);
            (f1, a1) = eval(x1, &mut warm);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            a1 = a2.clone();
            x2 = lo + inv_phi * (hi - lo);
            (f2, a2) = eval(x2, &mut warm);
        }
    }
    let (f_edge, a_edge) = eval(t_hi, &mut warm);
    let mut best = if f1 <= f2 { a1 } else { a2 };
    if f_edge < f1.min(f2) {
        best = a_edge;
    }

    let beta = p.constraint(&best);
    let objective = p.objective(&best, beta);
    if objective.is_finite() && objective < start_objective {
        Ok(InnerSolution {
            alpha: best,
            beta,
            objective,
        })
    } else {
        Ok(InnerSolution {
            alpha: alpha_ini.clone(),
            beta: beta_ini,
            objective: start_objective,
        })
    }
}

/// Best uniform rescaling `(κα, κ²β)` of a step.
///
/// Away from the positivity floor the objective is nearly invariant to the
/// overall scale of `α`, and the tangent steps shrink the scale only
/// harmonically. A direct search over `κ` removes that slow mode; it never
/// increases the objective.
pub(crate) fn rescale(p: &Problem<'_>, step: InnerSolution) -> InnerSolution {
    let k_min = (p.floor / step.alpha[p.tx]).max(p.floor / step.alpha[p.rx]);
    let k_max = 10.0f64.max(2.0 * k_min);
    let f = |k: f64| p.objective(&(&step.alpha * k), step.beta * k * k);
    let (lo, hi) = (k_min.ln(), k_max.ln());
    let samples = 200;
    let grid: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x.exp())).collect();
    let best = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(samples)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - inv_phi * (b - a);
        let x2 = a + inv_phi * (b - a);
        if f(x1.exp()) <= f(x2.exp()) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mut k = (0.5 * (a + b)).exp();
    if f(grid[best].exp()) < f(k) {
        k = grid[best].exp();
    }
    // the endpoint bound must hold exactly after rounding
    k = k.max(k_min);
    let value = f(k);
    if value < step.objective {
        InnerSolution {
            alpha: &step.alpha * k,
            beta: step.beta * k * k,
            objective: value,
        }
    } else {
        step
    }
}

/// `min ‖Γᵀα‖² + s‖α‖² + μ‖α‖₁` subject to `α_tx ≥ lower[0]`,
/// `α_rx ≥ lower[1]` (both positive).
struct BoundedLasso<'a> {
    gamma: &'a DMatrix<f64>,
    shrink: f64,
    mu: f64,
    tx: usize,
    rx: usize,
    lower: [f64; 2],
    max_iter: usize,
}

impl BoundedLasso<'_> {
    fn value(&self, a: &DVector<f64>) -> f64 {
        self.gamma.tr_mul(a).norm_squared() + self.shrink * a.norm_squared() + self.mu * a.lp_norm(1)
    }

    fn bound_of(&self, i: usize) -> Option<f64> {
        if i == self.tx {
            Some(self.lower[0])
        } else if i == self.rx {
            Some(self.lower[1])
        } else {
            None
        }
    }

    /// Minimizer of the sign-fixed quadratic over the free coordinates,
    /// with every other coordinate held at its current value.
    fn face_minimizer(&self, a: &DVector<f64>, free: &[usize], sign: &[f64]) -> DVector<f64> {
        let r = self.gamma.ncols();
        let f = free.len();
        let mut held = a.clone();
        for &i in free {
            held[i] = 0.0;
        }
        let h = self.gamma.tr_mul(&held);
        // stacked least squares [Γ_Fᵀ; √s I] x ≈ [−h; 0] with a linear term
        let mut stacked = DMatrix::zeros(r + f, f);
        for (k, &i) in free.iter().enumerate() {
            for c in 0..r {
                stacked[(c, k)] = self.gamma[(i, c)];
            }
            stacked[(r + k, k)] = self.shrink.sqrt();
        }
        let mut rhs = DVector::zeros(r + f);
        rhs.rows_mut(0, r).copy_from(&(-h));
        let qr = stacked.qr();
        let q = qr.q();
        let upper = qr.r();
        let half_mu = DVector::from_iterator(f, sign.iter().map(|s| 0.5 * self.mu * s));
        let w = upper
            .tr_solve_upper_triangular(&half_mu)
            .unwrap_or_else(|| DVector::zeros(f));
        let target = q.tr_mul(&rhs) - w;
        upper
            .solve_upper_triangular(&target)
            .unwrap_or_else(|| DVector::zeros(f))
    }

    fn solve(&self, mut a: DVector<f64>) -> DVector<f64> {
        let n = a.len();
        // free coordinates and their fixed signs
        let mut free: Vec<usize> = Vec::new();
        let mut sign: Vec<f64> = Vec::new();
        for i in 0..n {
            match self.bound_of(i) {
                Some(lb) => {
                    if a[i] > lb {
                        free.push(i);
                        sign.push(1.0);
                    } else {
                        a[i] = lb;
                    }
                }
                None => {
                    if a[i] != 0.0 {
                        free.push(i);
                        sign.push(a[i].signum());
                    }
                }
            }
        }
        let mut fresh: Option<usize> = None;
        let mut on_face = false;
        for _ in 0..self.max_iter {
            if on_face {
                let grad = (self.gamma * self.gamma.tr_mul(&a) + &a * self.shrink) * 2.0;
                let scale = self.mu + grad.amax();
                let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
                let mut pick: Option<(usize, f64, f64)> = None;
                for i in 0..n {
                    if free.contains(&i) {
                        continue;
                    }
                    let (viol, s) = match self.bound_of(i) {
                        Some(_) => (-(grad[i] + self.mu), 1.0),
                        None => (grad[i].abs() - self.mu, -grad[i].signum()),
                    };
                    if viol > tol && pick.is_none_or(|(_, v, _)| viol > v) {
                        pick = Some((i, viol, s));
                    }
                }
                let Some((i, _, s)) = pick else { break };
                free.push(i);
                sign.push(s);
                fresh = Some(i);
                on_face = false;
            }
            let x = self.face_minimizer(&a, &free, &sign);
            let mut step = 1.0;
            let mut blocking: Option<usize> = None;
            for (k, &i) in free.iter().enumerate() {
                let cur = a[i];
                let tau = match self.bound_of(i) {
                    Some(lb) if x[k] < lb => (cur - lb) / (cur - x[k]),
                    Some(_) => continue,
                    None if x[k] * sign[k] <= 0.0 => cur / (cur - x[k]),
                    None => continue,
                };
                if tau < step {
                    step = tau;
                    blocking = Some(k);
                }
            }
            for (k, &i) in free.iter().enumerate() {
                a[i] += step * (x[k] - a[i]);
            }
            match blocking {
                Some(k) => {
                    let i = free[k];
                    if step <= 0.0 && fresh == Some(i) {
                        // rounding left the new coordinate without descent
                        a[i] = self.bound_of(i).unwrap_or(0.0);
                        break;
                    }
                    a[i] = self.bound_of(i).unwrap_or(0.0);
                    free.remove(k);
                    sign.remove(k);
                    fresh = None;
                }
                None => on_face = true,
            }
        }
        a
    }
}

/// Weights zeroed below a threshold, with the surviving relay set and the
/// recomputed residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Sparsified {
    pub weights: DVector<f64>,
    pub relay_set: Vec<usize>,
    pub residual: f64,
}

/// Zero every non-endpoint weight with `|α_i| < threshold`.
pub fn sparsify_weights(gamma: &DMatrix<f64>, alpha: &DVector<f64>, tx: usize, rx: usize, threshold: f64) -> Result<Sparsified> {
    ensure_dim("weight vector length", gamma.nrows(), alpha.len())?;
    if !(threshold >= 0.0) {
        return Err(Error::invalid("sparsify threshold must be non-negative"));
    }
    let mut weights = alpha.clone();
    let mut relay_set = Vec::new();
    for i in 0..weights.len() {
        if i == tx || i == rx {
            continue;
        }
        if weights[i].abs() < threshold {
            weights[i] = 0.0;
        } else if weights[i] != 0.0 {
            relay_set.push(i);
        }
    }
    let residual = gamma.tr_mul(&weights).norm();
    Ok(Sparsified {
        weights,
        relay_set,
        residual,
    })
}

/// Least-squares start with unit endpoint weights:
/// relays `= −pinv(Γ_Rᵀ)(Γ_txᵀ + Γ_rxᵀ)`.
pub(crate) fn initial_point(p: &Problem<'_>) -> (DVector<f64>, f64) {
    let n = p.gamma.nrows();
    let relays: Vec<usize> = (0..n).filter(|&i| i != p.tx && i != p.rx).collect();
    let mut alpha = DVector::zeros(n);
    alpha[p.tx] = 1.0;
    alpha[p.rx] = 1.0;
    if !relays.is_empty() {
        let gr = linalg::select_rows(p.gamma, &relays).transpose();
        let target = -(p.gamma.row(p.tx) + p.gamma.row(p.rx)).transpose();
        let w = linalg::pinv(&gr, linalg::PINV_RTOL) * target;
        for (k, &i) in relays.iter().enumerate() {
            alpha[i] = w[k];
        }
    }
    let beta = p.constraint(&alpha) + 1e-6;
    (alpha, beta)
}
