//! Dense helpers for the small (n <= ~10) systems that show up in the
//! Lie algebra code. Everything is expressed with `nalgebra` dynamic types.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis (Euclidean) of the null space of `m`.
///
/// Singular values below `RANK_TOL * sigma_max` count as zero. A zero
/// matrix has the whole space as its kernel.
pub fn null_space(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    // Pad with zero rows so that V^T is square and carries every direction.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return (0..cols).map(|i| unit(cols, i)).collect();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= RANK_TOL * sigma_max)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect()
}

pub fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

pub fn inner(ip: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x.transpose() * ip * y)[(0, 0)]
}

pub fn norm(ip: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    inner(ip, x, x).max(0.0).sqrt()
}

/// Modified Gram-Schmidt with respect to `ip`. Vectors whose residual norm
/// drops below `RANK_TOL` times their input norm are discarded.
pub fn orthonormalize(ip: &DMatrix<f64>, vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let scale = norm(ip, v);
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for b in &basis {
            let c = inner(ip, b, &w);
            w -= b * c;
        }
        // second pass keeps orthogonality at machine precision
        for b in &basis {
            let c = inner(ip, b, &w);
            w -= b * c;
        }
        let nw = norm(ip, &w);
        if nw > RANK_TOL * scale.max(1.0) {
            basis.push(w / nw);
        }
    }
    basis
}

/// `ip`-orthogonal projection of `v` onto the span of the orthonormal `basis`.
pub fn project(ip: &DMatrix<f64>, basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for b in basis {
        out += b * inner(ip, b, v);
    }
    out
}

/// Deterministic basis of span(`basis`): project e_1, ..., e_n in order and
/// orthonormalize. Subspaces spanned by coordinate vectors come back as
/// exactly those coordinate vectors.
pub fn canonical_basis(ip: &DMatrix<f64>, basis: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if basis.is_empty() {
        return Vec::new();
    }
    let n = basis[0].len();
    let onb = orthonormalize(ip, basis);
    let projected: Vec<DVector<f64>> = (0..n).map(|i| project(ip, &onb, &unit(n, i))).collect();
    let mut out = orthonormalize(ip, &projected);
    out.truncate(onb.len());
    out
}
