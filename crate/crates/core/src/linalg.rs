//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Relative cutoff below which singular values are treated as zero in
/// pseudo-inverses and condition numbers.
pub const PINV_RTOL: f64 = 1e-12;

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    // nalgebra is faster on tall matrices
    let svd = if m.nrows() >= m.ncols() {
        m.clone().svd(false, false)
    } else {
        m.transpose().svd(false, false)
    };
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values at least `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v >= rel_tol * top).count(),
        _ => 0,
    }
}

/// Ratio of the extreme non-zero singular values; `inf` for a zero matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let top = match s.first() {
        Some(&t) if t > 0.0 => t,
        _ => return f64::INFINITY,
    };
    let low = s
        .iter()
        .copied()
        .filter(|&v| v > PINV_RTOL * top)
        .fold(top, f64::min);
    top / low
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if m.is_empty() {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let top = svd.singular_values.max();
    let mut out = DMatrix::zeros(c, r);
    if top <= 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * top {
            let vk = vt.row(k).transpose();
            let uk = u.column(k);
            out += (vk / s) * uk.transpose();
        }
    }
    out
}

/// Rows of `m` selected by `idx`, in order.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Component of `y` outside the column span of an orthonormal-column `basis`.
pub fn out_of_span(basis: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let coeff = basis.transpose() * y;
    y - basis * coeff
}
