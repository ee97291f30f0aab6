//! Swing-equation dynamics on a power network.
//!
//! Generator buses carry rotor angle `θ`, speed deviation `Δω` and the
//! integral state `z = ∫Δω` of a PI governor:
//!
//! ```text
//! dθ/dt  = Δω
//! dΔω/dt = ω_s / (2H) · (T − P(θ) − D·Δω),   T = −(K_P·Δω + K_I·z)
//! dz/dt  = Δω
//! ```
//!
//! Load buses are algebraic: `P_i(θ) + PL_i = 0` with
//! `P_i(θ) = Σ_j G_ij cos(θ_i − θ_j) + B_ij sin(θ_i − θ_j)` (unit voltage
//! magnitudes, `PL_i` is consumption). They are re-solved by damped Newton
//! at every Runge–Kutta stage. The speed deviation of a load bus is
//! `dθ_L/dt = −J_LL⁻¹ J_LG Δω_G`.
//!
//! A load step moves the load-bus angles instantly. A sampled frequency
//! reading sees that jump spread over one sample period, so the sample at
//! the injection index carries an extra `Δθ_L / dt` at the load buses
//! (disable with [`SwingSimulator::set_phase_jumps`]).

use nalgebra::{DMatrix, DVector};

use super::perturbation::PerturbationProcess;
use super::topology::NetworkTopology;
use super::trace::DynamicsTrace;
use crate::error::{ensure_dim, Error, Result};

/// Standard synchronous speed `2π·60` rad/s.
pub const SYNC_SPEED: f64 = 2.0 * std::f64::consts::PI * 60.0;

pub const NEWTON_TOL: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub bus: usize,
    /// Inertia constant `H` (s).
    pub inertia: f64,
    pub kp: f64,
    pub ki: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    pub bus: usize,
    /// Reference consumption (p.u.).
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingParams {
    pub admittance_real: DMatrix<f64>,
    pub admittance_imag: DMatrix<f64>,
    pub generators: Vec<GeneratorParams>,
    pub loads: Vec<LoadParams>,
    pub sync_speed: f64,
}

impl SwingParams {
    pub fn new(
        admittance_real: DMatrix<f64>,
        admittance_imag: DMatrix<f64>,
        generators: Vec<GeneratorParams>,
        loads: Vec<LoadParams>,
        sync_speed: f64,
    ) -> Result<Self> {
        let n = admittance_real.nrows();
        if !admittance_real.is_square() || admittance_imag.shape() != (n, n) {
            return Err(Error::invalid("admittance matrices must be square and equal size"));
        }
        let asym = (&admittance_real - admittance_real.transpose()).amax()
            + (&admittance_imag - admittance_imag.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::invalid("admittance matrices must be symmetric"));
        }
        if !(sync_speed > 0.0) {
            return Err(Error::invalid("synchronous speed must be positive"));
        }
        for g in &generators {
            if g.bus >= n {
                return Err(Error::invalid(format!("generator bus {} out of range", g.bus + 1)));
            }
            if !(g.inertia > 0.0) {
                return Err(Error::invalid(format!("generator {} has non-positive inertia", g.bus + 1)));
            }
            if g.ki == 0.0 {
                return Err(Error::invalid(format!("generator {} needs a non-zero K_I", g.bus + 1)));
            }
        }
        for l in &loads {
            if l.bus >= n {
                return Err(Error::invalid(format!("load bus {} out of range", l.bus + 1)));
            }
            if !(l.variance >= 0.0) {
                return Err(Error::invalid(format!("load {} has negative variance", l.bus + 1)));
            }
        }
        Ok(Self {
            admittance_real,
            admittance_imag,
            generators,
            loads,
            sync_speed,
        })
    }

    pub fn node_count(&self) -> usize {
        self.admittance_real.nrows()
    }

    /// Generator and load buses must match the topology partition.
    pub fn check_topology(&self, topo: &NetworkTopology) -> Result<()> {
        ensure_dim("admittance size", topo.node_count(), self.node_count())?;
        let gens: Vec<usize> = self.generators.iter().map(|g| g.bus).collect();
        if gens != topo.generators() {
            return Err(Error::invalid("generator buses disagree with topology"));
        }
        if self.loads.iter().any(|l| topo.is_generator(l.bus)) {
            return Err(Error::invalid("load block lists a generator bus"));
        }
        Ok(())
    }

    /// Reference consumption per bus (zero where no load row exists).
    pub fn load_reference(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.node_count());
        for l in &self.loads {
            v[l.bus] = l.mean;
        }
        v
    }
}

/// Initial condition of a swing run: the network starts in the power-flow
/// equilibrium for `reference + load_deviation`, then generator speeds are
/// offset by `speed_deviation` (one entry per generator, in bus order).
#[derive(Debug, Clone, PartialEq)]
pub struct SwingInitial {
    pub load_deviation: DVector<f64>,
    pub speed_deviation: DVector<f64>,
}

impl SwingInitial {
    pub fn equilibrium(node_count: usize, generator_count: usize) -> Self {
        Self {
            load_deviation: DVector::zeros(node_count),
            speed_deviation: DVector::zeros(generator_count),
        }
    }
}

/// Admittance row in sparse form.
#[derive(Debug, Clone)]
struct Row {
    diag_g: f64,
    nbrs: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
struct GenState {
    theta: DVector<f64>,
    omega: DVector<f64>,
    integral: DVector<f64>,
}

impl GenState {
    fn axpy(&self, h: f64, d: &GenState) -> GenState {
        GenState {
            theta: &self.theta + &d.theta * h,
            omega: &self.omega + &d.omega * h,
            integral: &self.integral + &d.integral * h,
        }
    }

    fn is_finite(&self) -> bool {
        self.theta.iter().chain(self.omega.iter()).chain(self.integral.iter()).all(|v| v.is_finite())
    }
}

/// Fixed-step RK4 integrator for the swing DAE.
#[derive(Debug, Clone)]
pub struct SwingSimulator {
    n: usize,
    rows: Vec<Row>,
    gens: Vec<GeneratorParams>,
    load_buses: Vec<usize>,
    /// position of a bus among load buses, if it is one
    load_pos: Vec<Option<usize>>,
    reference: DVector<f64>,
    sync_speed: f64,
    phase_jumps: bool,
}

impl SwingSimulator {
    pub fn new(topology: &NetworkTopology, params: &SwingParams) -> Result<Self> {
        params.check_topology(topology)?;
        let n = params.node_count();
        let rows = (0..n)
            .map(|i| Row {
                diag_g: params.admittance_real[(i, i)],
                nbrs: (0..n)
                    .filter(|&j| {
                        j != i && (params.admittance_real[(i, j)] != 0.0 || params.admittance_imag[(i, j)] != 0.0)
                    })
                    .map(|j| (j, params.admittance_real[(i, j)], params.admittance_imag[(i, j)]))
                    .collect(),
            })
            .collect();
        let load_buses: Vec<usize> = topology.loads().to_vec();
        let mut load_pos = vec![None; n];
        for (p, &b) in load_buses.iter().enumerate() {
            load_pos[b] = Some(p);
        }
        Ok(Self {
            n,
            rows,
            gens: params.generators.clone(),
            load_buses,
            load_pos,
            reference: params.load_reference(),
            sync_speed: params.sync_speed,
            phase_jumps: true,
        })
    }

    /// Whether injection samples include the load-angle jump (default on).
    pub fn set_phase_jumps(&mut self, on: bool) {
        self.phase_jumps = on;
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn generator_count(&self) -> usize {
        self.gens.len()
    }

    fn injection(&self, i: usize, theta: &[f64]) -> f64 {
        let row = &self.rows[i];
        let ti = theta[i];
        row.nbrs.iter().fold(row.diag_g, |acc, &(j, g, b)| {
            let d = ti - theta[j];
            acc + g * d.cos() + b * d.sin()
        })
    }

    fn load_residual(&self, theta: &[f64], load: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.load_buses.len(),
            self.load_buses.iter().map(|&i| self.injection(i, theta) + load[i]),
        )
    }

    /// `(J_LL, J_LG)`: derivatives of the load residual w.r.t. load and
    /// generator angles.
    fn jacobians(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let nl = self.load_buses.len();
        let mut jll = DMatrix::zeros(nl, nl);
        let mut jlg = DMatrix::zeros(nl, self.gens.len());
        let gen_pos = |bus: usize| self.gens.iter().position(|g| g.bus == bus);
        for (p, &i) in self.load_buses.iter().enumerate() {
            let mut diag = 0.0;
            for &(j, g, b) in &self.rows[i].nbrs {
                let d = theta[i] - theta[j];
                let (s, c) = d.sin_cos();
                let dj = g * s - b * c;
                diag -= dj;
                if let Some(q) = self.load_pos[j] {
                    jll[(p, q)] += dj;
                } else if let Some(q) = gen_pos(j) {
                    jlg[(p, q)] += dj;
                }
            }
            jll[(p, p)] += diag;
        }
        (jll, jlg)
    }

    /// Damped Newton on the load-bus equations, updating load angles in
    /// `theta` in place. Returns the iteration count.
    fn solve_loads(&self, theta: &mut [f64], load: &DVector<f64>, step: usize) -> Result<usize> {
        let mut res = self.load_residual(theta, load);
        let mut norm = res.amax();
        let mut it = 0;
        while norm > NEWTON_TOL {
            if it == NEWTON_MAX_ITER {
                return Err(Error::NewtonNonConvergence {
                    step,
                    iterations: it,
                    residual: norm,
                });
            }
            it += 1;
            let (jll, _) = self.jacobians(theta);
            let delta = jll.lu().solve(&res).ok_or(Error::NewtonNonConvergence {
                step,
                iterations: it,
                residual: norm,
            })?;
            let base: Vec<f64> = self.load_buses.iter().map(|&i| theta[i]).collect();
            let mut t = 1.0;
            loop {
                for (p, &i) in self.load_buses.iter().enumerate() {
                    theta[i] = base[p] - t * delta[p];
                }
                let trial = self.load_residual(theta, load);
                let tn = trial.amax();
                if tn < norm || t < 1e-4 {
                    res = trial;
                    norm = tn;
                    break;
                }
                t *= 0.5;
            }
            if !norm.is_finite() {
                return Err(Error::Divergence {
                    step,
                    detail: "non-finite load-flow residual".into(),
                });
            }
        }
        Ok(it)
    }

    fn derivative(&self, s: &GenState, theta: &[f64]) -> GenState {
        let m = self.gens.len();
        let mut d_omega = DVector::zeros(m);
        for (q, g) in self.gens.iter().enumerate() {
            let p = self.injection(g.bus, theta);
            let torque = -(g.kp * s.omega[q] + g.ki * s.integral[q]);
            d_omega[q] = self.sync_speed / (2.0 * g.inertia) * (torque - p - g.damping * s.omega[q]);
        }
        GenState {
            theta: s.omega.clone(),
            omega: d_omega,
            integral: s.omega.clone(),
        }
    }

    fn write_gen_angles(&self, s: &GenState, theta: &mut [f64]) {
        for (q, g) in self.gens.iter().enumerate() {
            theta[g.bus] = s.theta[q];
        }
    }

    fn apply_injections(&self, load: &mut DVector<f64>, updates: &[(usize, f64)]) {
        for &(bus, v) in updates {
            load[bus] = self.reference[bus] + v;
        }
    }

    /// Speed deviation of every bus at the current state.
    fn speeds(&self, s: &GenState, theta: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        for (q, g) in self.gens.iter().enumerate() {
            out[g.bus] = s.omega[q];
        }
        if !self.load_buses.is_empty() {
            let (jll, jlg) = self.jacobians(theta);
            let rhs = -(jlg * &s.omega);
            let dl = jll
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Solver("singular load Jacobian".into()))?;
            for (p, &i) in self.load_buses.iter().enumerate() {
                out[i] = dl[p];
            }
        }
        Ok(out)
    }

    /// Run `horizon` samples at step `dt`. Injections at index `k` change
    /// the loads before sample `k` is recorded.
    pub fn simulate(
        &self,
        process: &PerturbationProcess,
        initial: &SwingInitial,
        horizon: usize,
        dt: f64,
    ) -> Result<DynamicsTrace> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        ensure_dim("initial load deviation", self.n, initial.load_deviation.len())?;
        ensure_dim("initial speed deviation", self.gens.len(), initial.speed_deviation.len())?;
        for inj in process.injections() {
            for &(bus, _) in &inj.updates {
                if bus >= self.n || self.load_pos[bus].is_none() {
                    return Err(Error::invalid(format!(
                        "perturbation targets bus {} which is not a load bus",
                        bus + 1
                    )));
                }
            }
        }
        let m = self.gens.len();
        let mut load = &self.reference + &initial.load_deviation;
        let mut theta = vec![0.0; self.n];
        self.solve_loads(&mut theta, &load, 0)?;

        // equilibrium governor state: T = P at zero speed deviation
        let mut integral = DVector::zeros(m);
        for (q, g) in self.gens.iter().enumerate() {
            integral[q] = -self.injection(g.bus, &theta) / g.ki;
        }
        let mut state = GenState {
            theta: DVector::zeros(m),
            omega: initial.speed_deviation.clone(),
            integral,
        };

        let mut out = DMatrix::zeros(self.n, horizon);
        let mut injections = process.injections().iter().peekable();
        let mut stage_theta = theta.clone();
        for k in 0..horizon {
            let mut changed = false;
            while let Some(inj) = injections.peek() {
                if inj.index > k {
                    break;
                }
                if inj.index == k {
                    self.apply_injections(&mut load, &inj.updates);
                    changed = true;
                }
                injections.next();
            }
            let speed = if changed {
                let before: Vec<f64> = self.load_buses.iter().map(|&i| theta[i]).collect();
                self.solve_loads(&mut theta, &load, k)?;
                let mut speed = self.speeds(&state, &theta)?;
                if self.phase_jumps {
                    for (p, &i) in self.load_buses.iter().enumerate() {
                        speed[i] += (theta[i] - before[p]) / dt;
                    }
                }
                speed
            } else {
                self.speeds(&state, &theta)?
            };
            out.set_column(k, &speed);
            if k + 1 == horizon {
                break;
            }

            // RK4 with the algebraic loads solved at each stage
            let k1 = self.derivative(&state, &theta);
            stage_theta.copy_from_slice(&theta);
            let s2 = state.axpy(0.5 * dt, &k1);
            self.write_gen_angles(&s2, &mut stage_theta);
            self.solve_loads(&mut stage_theta, &load, k)?;
            let k2 = self.derivative(&s2, &stage_theta);
            let s3 = state.axpy(0.5 * dt, &k2);
            self.write_gen_angles(&s3, &mut stage_theta);
            self.solve_loads(&mut stage_theta, &load, k)?;
            let k3 = self.derivative(&s3, &stage_theta);
            let s4 = state.axpy(dt, &k3);
            self.write_gen_angles(&s4, &mut stage_theta);
            self.solve_loads(&mut stage_theta, &load, k)?;
            let k4 = self.derivative(&s4, &stage_theta);

            let mut incr = k1.axpy(2.0, &k2);
            incr = incr.axpy(2.0, &k3);
            incr = incr.axpy(1.0, &k4);
            state = state.axpy(dt / 6.0, &incr);
            if !state.is_finite() {
                return Err(Error::Divergence {
                    step: k + 1,
                    detail: "non-finite generator state".into(),
                });
            }
            self.write_gen_angles(&state, &mut theta);
            // warm start from the last stage, which is closest to the new state
            for &i in &self.load_buses {
                theta[i] = stage_theta[i];
            }
            self.solve_loads(&mut theta, &load, k + 1)?;
        }
        DynamicsTrace::new(out, dt)
    }
}

/// Simulate from the reference equilibrium.
pub fn simulate_swing(
    topology: &NetworkTopology,
    params: &SwingParams,
    process: &PerturbationProcess,
    horizon: usize,
    dt: f64,
) -> Result<DynamicsTrace> {
    let sim = SwingSimulator::new(topology, params)?;
    let init = SwingInitial::equilibrium(sim.node_count(), sim.generator_count());
    sim.simulate(process, &init, horizon, dt)
}
