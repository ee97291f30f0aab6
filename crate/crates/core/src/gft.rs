//! Data-driven graph Fourier transform surrogate.
//!
//! The GFT basis `U` is the eigenvector matrix of the accumulated Gram
//! matrix `Σ_d Y⁽ᵈ⁾ Y⁽ᵈ⁾ᵀ` of the training signals, sorted by descending
//! eigenvalue. The surrogate `Γ = U[:, 0..r]` spans the band the training
//! signals live in, with `r` the largest numerical rank of any single
//! training signal or, under [`RankRule::Pooled`], the numerical rank of
//! the Gram spectrum.
//!
//! The signal `Y` is either the raw trace or its first time difference;
//! the surrogate remembers which, and [`GftSurrogate::transform`] applies
//! the same transform to any trace handed to it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg;
use crate::net_model::DynamicsTrace;

/// Default relative singular-value cutoff for numerical rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// Fraction of each trace held out when comparing signal modes.
const HOLDOUT_FRACTION: f64 = 0.2;

/// Residual gap below which the two signal modes are considered tied.
const MODE_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    Raw,
    TimeDifference,
}

impl SignalMode {
    pub fn name(self) -> &'static str {
        match self {
            SignalMode::Raw => "raw",
            SignalMode::TimeDifference => "time_difference",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(SignalMode::Raw),
            "time_difference" => Ok(SignalMode::TimeDifference),
            other => Err(Error::invalid(format!("unknown signal mode {other:?}"))),
        }
    }

    /// Map a node-by-time matrix to the signal this mode analyses.
    /// Time differencing drops one column.
    pub fn apply(self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            SignalMode::Raw => Ok(x.clone()),
            SignalMode::TimeDifference => {
                if x.ncols() < 2 {
                    return Err(Error::invalid("time difference needs at least two samples"));
                }
                let k = x.ncols();
                Ok(x.columns(1, k - 1) - x.columns(0, k - 1))
            }
        }
    }

    /// Number of signal columns produced from `horizon` samples.
    pub fn output_len(self, horizon: usize) -> usize {
        match self {
            SignalMode::Raw => horizon,
            SignalMode::TimeDifference => horizon.saturating_sub(1),
        }
    }
}

/// Training traces for fitting a surrogate.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub traces: Vec<DynamicsTrace>,
    pub mode: SignalMode,
    /// Number of leading signal columns used from each trace; `None` uses
    /// the shortest available length.
    pub window: Option<usize>,
}

impl TrainingSet {
    pub fn new(traces: Vec<DynamicsTrace>, mode: SignalMode) -> Self {
        Self {
            traces,
            mode,
            window: None,
        }
    }

    fn validate(&self) -> Result<(usize, usize)> {
        let first = self
            .traces
            .first()
            .ok_or_else(|| Error::invalid("training set needs at least one trace"))?;
        let n = first.node_count();
        for t in &self.traces {
            ensure_dim("training trace node count", n, t.node_count())?;
        }
        let available = self
            .traces
            .iter()
            .map(|t| self.mode.output_len(t.horizon()))
            .min()
            .unwrap_or(0);
        if self.mode == SignalMode::TimeDifference && self.traces.iter().any(|t| t.horizon() < 2) {
            return Err(Error::invalid("time difference needs traces of at least two samples"));
        }
        let window = self.window.unwrap_or(available);
        if window == 0 || window > available {
            return Err(Error::invalid(format!(
                "training window {window} outside 1..={available}"
            )));
        }
        Ok((n, window))
    }

    /// Windowed signals `Y⁽ᵈ⁾[:, 0..L]`.
    fn signals(&self) -> Result<Vec<DMatrix<f64>>> {
        let (_, window) = self.validate()?;
        self.traces
            .iter()
            .map(|t| {
                let y = self.mode.apply(t.values())?;
                Ok(y.columns(0, window).into_owned())
            })
            .collect()
    }
}

/// Fitted GFT basis and band-limited surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct GftSurrogate {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    rank: usize,
    surrogate: DMatrix<f64>,
    mode: SignalMode,
}

impl GftSurrogate {
    /// Assemble from a basis with orthonormal columns ordered by descending
    /// eigenvalue.
    pub fn from_parts(basis: DMatrix<f64>, eigenvalues: DVector<f64>, rank: usize, mode: SignalMode) -> Result<Self> {
        let n = basis.nrows();
        if !basis.is_square() {
            return Err(Error::invalid("GFT basis must be square"));
        }
        ensure_dim("eigenvalue count", n, eigenvalues.len())?;
        if rank == 0 || rank > n {
            return Err(Error::invalid(format!("band-limit rank {rank} outside 1..={n}")));
        }
        let surrogate = basis.columns(0, rank).into_owned();
        Ok(Self {
            basis,
            eigenvalues,
            rank,
            surrogate,
            mode,
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Γ = U[:, 0..r]`.
    pub fn surrogate(&self) -> &DMatrix<f64> {
        &self.surrogate
    }

    pub fn mode(&self) -> SignalMode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.basis.nrows()
    }

    /// Same basis truncated to a different band-limit rank.
    pub fn with_rank(&self, rank: usize) -> Result<Self> {
        Self::from_parts(self.basis.clone(), self.eigenvalues.clone(), rank, self.mode)
    }

    /// Apply the surrogate's signal mode to a node-by-time matrix.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dim("trace node count", self.node_count(), x.nrows())?;
        self.mode.apply(x)
    }

    /// Serialize as text: header, eigenvalues, then the basis row by row.
    pub fn to_text(&self) -> String {
        let n = self.node_count();
        let mut out = String::new();
        out.push_str("gls-gft-surrogate,1\n");
        out.push_str("nodes,rank,mode\n");
        let _ = writeln!(out, "{n},{},{}", self.rank, self.mode.name());
        out.push_str("eigenvalues\n");
        out.push_str(&join(self.eigenvalues.iter()));
        out.push('\n');
        out.push_str("basis\n");
        for i in 0..n {
            out.push_str(&join(self.basis.row(i).iter()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, d: &str| Error::Parse {
            path: "<surrogate>".into(),
            line,
            detail: d.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&"gls-gft-surrogate,1") {
            return Err(bad(1, "missing gls-gft-surrogate,1 header"));
        }
        let meta: Vec<&str> = lines.get(2).ok_or_else(|| bad(3, "missing metadata"))?.split(',').collect();
        if meta.len() != 3 {
            return Err(bad(3, "expected nodes,rank,mode"));
        }
        let n: usize = meta[0].parse().map_err(|_| bad(3, "bad node count"))?;
        let rank: usize = meta[1].parse().map_err(|_| bad(3, "bad rank"))?;
        let mode = SignalMode::parse(meta[2])?;
        let parse_row = |idx: usize| -> Result<Vec<f64>> {
            let l = lines.get(idx).ok_or_else(|| bad(idx + 1, "truncated file"))?;
            let v = l
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(idx + 1, &e.to_string()))?;
            if v.len() != n {
                return Err(bad(idx + 1, "wrong row length"));
            }
            Ok(v)
        };
        let eig = parse_row(4)?;
        let mut basis = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = parse_row(6 + i)?;
            for (j, v) in row.into_iter().enumerate() {
                basis[(i, j)] = v;
            }
        }
        Self::from_parts(basis, DVector::from_vec(eig), rank, mode)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn join<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    vals.map(|v| crate::fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

/// How the band-limit rank is read off the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// Largest numerical rank of any single training trace.
    #[default]
    PerTraceMax,
    /// Numerical rank of all traces side by side, read off the Gram spectrum.
    Pooled,
}

/// Fit the GFT basis and surrogate from a training set, with the rank of
/// the most complex single trace.
pub fn fit_surrogate(training: &TrainingSet, rank_tolerance: f64) -> Result<GftSurrogate> {
    fit_surrogate_with(training, rank_tolerance, RankRule::PerTraceMax)
}

/// [`fit_surrogate`] with an explicit rank rule.
pub fn fit_surrogate_with(training: &TrainingSet, rank_tolerance: f64, rule: RankRule) -> Result<GftSurrogate> {
    if !(rank_tolerance > 0.0 && rank_tolerance < 1.0) {
        return Err(Error::invalid("rank tolerance must lie in (0, 1)"));
    }
    let signals = training.signals()?;
    let n = signals[0].nrows();
    let mut gram = DMatrix::zeros(n, n);
    let mut rank = 0;
    for y in &signals {
        gram += y * y.transpose();
        rank = rank.max(linalg::numerical_rank(y, rank_tolerance));
    }
    if rank == 0 {
        return Err(Error::invalid("training data has rank zero"));
    }
    // symmetrize against accumulated rounding
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iter().enumerate().fold(0, |best, (i, v)| {
            if v.abs() > col[best].abs() {
                i
            } else {
                best
            }
        });
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
        values[dst] = eig.eigenvalues[src].max(0.0);
    }
    if rule == RankRule::Pooled {
        // Gram eigenvalues carry rounding of order eps·λ₁
        let cut = (rank_tolerance * rank_tolerance).max(n as f64 * f64::EPSILON) * values[0];
        rank = values.iter().filter(|&&v| v > 0.0 && v >= cut).count();
    }
    GftSurrogate::from_parts(basis, values, rank, training.mode)
}

/// Relative energy of a trace outside the surrogate band,
/// `‖(I − ΓΓᵀ) Y‖_F / ‖Y‖_F`, in the surrogate's signal mode.
pub fn bandlimited_residual(surrogate: &GftSurrogate, trace: &DynamicsTrace) -> Result<f64> {
    let y = surrogate.transform(trace.values())?;
    signal_residual(surrogate, &y)
}

/// [`bandlimited_residual`] for an already-transformed signal.
pub fn signal_residual(surrogate: &GftSurrogate, y: &DMatrix<f64>) -> Result<f64> {
    ensure_dim("signal node count", surrogate.node_count(), y.nrows())?;
    let total = y.norm();
    if total == 0.0 {
        return Err(Error::invalid("zero-norm trace has no residual"));
    }
    let out = linalg::out_of_span(surrogate.surrogate(), y);
    Ok((out.norm() / total).clamp(0.0, 1.0))
}

/// Pick raw or time-difference signals by held-out band-limited residual.
///
/// Each mode is fitted on the leading 80% of every trace, both fits are
/// truncated to the smaller of their two ranks, and the mean residual on
/// the trailing 20% decides. Ties go to raw.
pub fn choose_signal_mode(traces: &[DynamicsTrace], rank_tolerance: f64) -> Result<SignalMode> {
    if traces.is_empty() {
        return Err(Error::invalid("need at least one trace"));
    }
    if traces.iter().any(|t| t.horizon() < 2) {
        return Err(Error::invalid("time difference needs traces of at least two samples"));
    }
    let modes = [SignalMode::Raw, SignalMode::TimeDifference];
    let mut fits = Vec::with_capacity(2);
    let mut holdouts = Vec::with_capacity(2);
    for mode in modes {
        let mut train = Vec::with_capacity(traces.len());
        let mut hold = Vec::with_capacity(traces.len());
        for t in traces {
            let y = mode.apply(t.values())?;
            let k = y.ncols();
            let held = ((k as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, k.saturating_sub(1).max(1));
            let fit_len = k - held;
            if fit_len == 0 {
                return Err(Error::invalid("trace too short for a held-out split"));
            }
            train.push(DynamicsTrace::new(y.columns(0, fit_len).into_owned(), t.sample_period())?);
            hold.push(y.columns(fit_len, held).into_owned());
        }
        let set = TrainingSet::new(train, SignalMode::Raw);
        match fit_surrogate(&set, rank_tolerance) {
            Ok(fit) => fits.push(fit),
            // differences carry no energy at all
            Err(Error::InvalidInput(_)) if mode == SignalMode::TimeDifference => return Ok(SignalMode::Raw),
            Err(e) => return Err(e),
        }
        holdouts.push(hold);
    }
    let rank = fits[0].rank().min(fits[1].rank());
    let mut scores = [0.0; 2];
    for m in 0..2 {
        let s = fits[m].with_rank(rank)?;
        let mut sum = 0.0;
        let mut count = 0;
        for y in &holdouts[m] {
            if y.norm() > 0.0 {
                sum += signal_residual(&s, y)?;
                count += 1;
            }
        }
        scores[m] = if count > 0 { sum / count as f64 } else { 0.0 };
    }
    if scores[1] < scores[0] - MODE_TIE_TOLERANCE {
        Ok(SignalMode::TimeDifference)
    } else {
        Ok(SignalMode::Raw)
    }
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

    fn trace(m: DMatrix<f64>) -> DynamicsTrace {
        DynamicsTrace::new(m, 1.0).unwrap()
    }

    #[test]
    fn rank_one_data() {
        let col = DVector::from_vec(vec![1.0, -2.0, 2.0]);
        let x = DMatrix::from_fn(3, 6, |i, _| col[i]);
        let s = fit_surrogate(&TrainingSet::new(vec![trace(x)], SignalMode::Raw), 1e-8).unwrap();
        assert_eq!(s.rank(), 1);
        let g = s.surrogate().column(0).into_owned();
        let expect = &col / col.norm();
        assert!((g - expect).norm() < 1e-12);
    }

    #[test]
    fn pooled_rank_counts_joint_span() {
        let u = orthonormal(6, 2, 9);
        let a = u.column(0) * gaussian(1, 20, 10);
        let b = u.column(1) * gaussian(1, 20, 11);
        let set = TrainingSet::new(vec![trace(a), trace(b)], SignalMode::Raw);
        for tol in [1e-8, 1e-6] {
            assert_eq!(fit_surrogate_with(&set, tol, RankRule::PerTraceMax).unwrap().rank(), 1);
            assert_eq!(fit_surrogate_with(&set, tol, RankRule::Pooled).unwrap().rank(), 2);
        }
    }

    #[test]
    fn recovers_known_subspace() {
        let u = orthonormal(8, 3, 1);
        let x = &u * gaussian(3, 40, 2);
        let s = fit_surrogate(&TrainingSet::new(vec![trace(x.clone())], SignalMode::Raw), 1e-8).unwrap();
        assert_eq!(s.rank(), 3);
        // sines of the principal angles, from the part of Γ outside span(U*)
        let outside = s.surrogate() - &u * (u.transpose() * s.surrogate());
        for sine in linalg::singular_values(&outside) {
            assert!(sine.min(1.0).asin() < 1e-8);
        }
        let g = s.surrogate();
        let rec = g * (g.transpose() * &x);
        assert!((rec - &x).norm() / x.norm() < 1e-8);
    }

    #[test]
    fn basis_orthonormal_and_ordered() {
        let traces = vec![trace(gaussian(6, 30, 3)), trace(gaussian(6, 30, 4))];
        let total: f64 = traces.iter().map(|t| t.values().norm_squared()).sum();
        let s = fit_surrogate(&TrainingSet::new(traces, SignalMode::Raw), 1e-8).unwrap();
        let u = s.basis();
        let err = (u.transpose() * u - DMatrix::identity(6, 6)).abs().max();
        assert!(err < 1e-10);
        let l = s.eigenvalues();
        for i in 1..l.len() {
            assert!(l[i] <= l[i - 1]);
        }
        assert!((l.sum() - total).abs() / total < 1e-8);
        for j in 0..6 {
            let c = u.column(j);
            let big = c.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn window_limits_columns() {
        let x = gaussian(4, 10, 5);
        let mut set = TrainingSet::new(vec![trace(x.clone())], SignalMode::Raw);
        set.window = Some(2);
        let s = fit_surrogate(&set, 1e-8).unwrap();
        assert_eq!(s.rank(), 2);
        set.window = Some(11);
        assert!(fit_surrogate(&set, 1e-8).is_err());
        set.window = Some(0);
        assert!(fit_surrogate(&set, 1e-8).is_err());
    }

    #[test]
    fn rejects_zero_data() {
        let set = TrainingSet::new(vec![trace(DMatrix::zeros(3, 5))], SignalMode::Raw);
        assert!(fit_surrogate(&set, 1e-8).is_err());
        let set = TrainingSet::new(vec![], SignalMode::Raw);
        assert!(fit_surrogate(&set, 1e-8).is_err());
    }

    #[test]
    fn residual_projection_identities() {
        let u = orthonormal(6, 6, 6);
        let s = GftSurrogate::from_parts(u.clone(), DVector::from_element(6, 1.0), 2, SignalMode::Raw).unwrap();
        let inside = u.columns(0, 2) * gaussian(2, 7, 7);
        let outside = u.columns(2, 4) * gaussian(4, 7, 8);
        assert!(bandlimited_residual(&s, &trace(inside.clone())).unwrap() < 1e-10);
        assert!((bandlimited_residual(&s, &trace(outside.clone())).unwrap() - 1.0).abs() < 1e-10);
        let mixed = inside + outside;
        let g = u.columns(0, 2);
        let projector = DMatrix::identity(6, 6) - g * g.transpose();
        let oracle = (projector * &mixed).norm() / mixed.norm();
        let got = bandlimited_residual(&s, &trace(mixed)).unwrap();
        assert!((got - oracle).abs() < 1e-10);
        assert!(bandlimited_residual(&s, &trace(DMatrix::zeros(6, 3))).is_err());
    }

    #[test]
    fn difference_mode_matches_raw_on_differenced() {
        let x = gaussian(5, 12, 9);
        let u = orthonormal(5, 5, 10);
        let raw = GftSurrogate::from_parts(u.clone(), DVector::from_element(5, 1.0), 2, SignalMode::Raw).unwrap();
        let diff = GftSurrogate::from_parts(u, DVector::from_element(5, 1.0), 2, SignalMode::TimeDifference).unwrap();
        let d = SignalMode::TimeDifference.apply(&x).unwrap();
        assert_eq!(d.ncols(), 11);
        let a = bandlimited_residual(&diff, &trace(x)).unwrap();
        let b = bandlimited_residual(&raw, &trace(d)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode_choice() {
        let u = orthonormal(8, 3, 11);
        let banded = &u * gaussian(3, 200, 12);
        assert_eq!(choose_signal_mode(&[trace(banded.clone())], 1e-8).unwrap(), SignalMode::Raw);

        // random walk with band-limited increments plus a full-rank offset
        let offset = gaussian(8, 1, 13);
        let mut walk = DMatrix::zeros(8, 200);
        let mut acc = offset.column(0).into_owned();
        for k in 0..200 {
            acc += banded.column(k);
            walk.set_column(k, &acc);
        }
        assert_eq!(choose_signal_mode(&[trace(walk)], 1e-8).unwrap(), SignalMode::TimeDifference);

        // constant trace: differences vanish entirely, raw wins
        let flat = DMatrix::from_element(4, 10, 1.0);
        assert_eq!(choose_signal_mode(&[trace(flat)], 1e-8).unwrap(), SignalMode::Raw);

        let short = trace(DMatrix::from_element(3, 1, 1.0));
        assert!(choose_signal_mode(&[short], 1e-8).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let traces = vec![trace(gaussian(5, 20, 14))];
        let s = fit_surrogate(&TrainingSet::new(traces, SignalMode::TimeDifference), 1e-8).unwrap();
        let text = s.to_text();
        let back = GftSurrogate::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        s.save(&p).unwrap();
        assert_eq!(GftSurrogate::load(&p).unwrap(), s);
        assert!(matches!(GftSurrogate::load(&dir.path().join("none")), Err(Error::MissingData(_))));
    }
}
