//! Metric nilpotent Lie algebras given by structure constants.
//!
//! A [`LieAlgebra`] stores `c[i][j][k]`, the coefficient of `e_k` in
//! `[e_i, e_j]`, together with an inner product matrix. From these we get
//! brackets, the upper central series, the plane-producing dimension
//! condition, commuting pairs inside `h_i = g_{i-1}^perp ∩ g_i`, and the
//! Levi-Civita connection of the left-invariant metric via Koszul.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inner, norm};

/// Residual allowed for the Jacobi identity and antisymmetry checks.
pub const JACOBI_TOL: f64 = 1e-12;

/// Threshold below which brackets and covariant derivatives count as zero
/// when certifying a plane.
pub const PLANE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    /// Flattened `c[i][j][k]`, index `(i * n + j) * n + k`.
    c: Vec<f64>,
    ip: DMatrix<f64>,
}

/// On-disk description: 1-based `[i, j, k, coeff]` entries meaning
/// `[e_i, e_j]` has `coeff` in direction `e_k`. The antisymmetric partner is
/// filled in automatically.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip: Option<Vec<Vec<f64>>>,
}

impl LieAlgebra {
    /// Builds an algebra from 0-based `(i, j, k, coeff)` entries.
    pub fn new(
        dim: usize,
        brackets: &[(usize, usize, usize, f64)],
        ip: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be positive".into()));
        }
        let mut c = vec![0.0; dim * dim * dim];
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        for &(i, j, k, coeff) in brackets {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::InvalidAlgebra(format!(
                    "bracket index ({i}, {j}, {k}) out of range for dimension {dim}"
                )));
            }
            if i == j {
                if coeff != 0.0 {
                    return Err(Error::InvalidAlgebra(format!(
                        "[e_{i}, e_{i}] must vanish"
                    )));
                }
                continue;
            }
            let existing = c[idx(j, i, k)];
            if existing != 0.0 && existing != -coeff {
                return Err(Error::InvalidAlgebra(format!(
                    "conflicting entries for [e_{i}, e_{j}] and [e_{j}, e_{i}]"
                )));
            }
            c[idx(i, j, k)] = coeff;
            c[idx(j, i, k)] = -coeff;
        }
        let ip = ip.unwrap_or_else(|| DMatrix::identity(dim, dim));
        if ip.nrows() != dim || ip.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: ip.nrows() });
        }
        if (&ip - ip.transpose()).amax() > 1e-14 * ip.amax().max(1.0) {
            return Err(Error::InvalidAlgebra("inner product is not symmetric".into()));
        }
        if ip.clone().cholesky().is_none() {
            return Err(Error::InvalidAlgebra("inner product is not positive definite".into()));
        }
        let alg = LieAlgebra { dim, c, ip };
        let jac = alg.jacobi_residual();
        if jac > JACOBI_TOL {
            return Err(Error::InvalidAlgebra(format!("Jacobi identity fails (residual {jac:e})")));
        }
        Ok(alg)
    }

    pub fn from_file(file: &AlgebraFile) -> Result<Self> {
        let mut entries = Vec::with_capacity(file.brackets.len());
        for &(i, j, k, coeff) in &file.brackets {
            if i == 0 || j == 0 || k == 0 {
                return Err(Error::InvalidAlgebra("bracket indices are 1-based".into()));
            }
            entries.push((i - 1, j - 1, k - 1, coeff));
        }
        let ip = match &file.ip {
            None => None,
            Some(rows) => {
                if rows.len() != file.dim || rows.iter().any(|r| r.len() != file.dim) {
                    return Err(Error::InvalidAlgebra("ip must be a dim x dim matrix".into()));
                }
                Some(DMatrix::from_fn(file.dim, file.dim, |i, j| rows[i][j]))
            }
        };
        Self::new(file.dim, &entries, ip)
    }

    pub fn to_file(&self) -> AlgebraFile {
        let n = self.dim;
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let v = self.structure_constant(i, j, k);
                    if v != 0.0 {
                        brackets.push((i + 1, j + 1, k + 1, v));
                    }
                }
            }
        }
        let ip = if self.ip == DMatrix::identity(n, n) {
            None
        } else {
            Some((0..n).map(|i| (0..n).map(|j| self.ip[(i, j)]).collect()).collect())
        };
        AlgebraFile { dim: n, brackets, ip }
    }

    /// The abelian algebra of dimension `n`.
    pub fn abelian(n: usize) -> Result<Self> {
        Self::new(n, &[], None)
    }

    /// Heisenberg algebra, `[e1, e2] = e3`, orthonormal basis.
    pub fn heisenberg() -> Self {
        Self::new(3, &[(0, 1, 2, 1.0)], None).expect("heisenberg is valid")
    }

    /// Heisenberg ⊕ R: four dimensions with a two-dimensional center.
    pub fn heisenberg_plus_line() -> Self {
        Self::new(4, &[(0, 1, 2, 1.0)], None).expect("heisenberg + R is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inner_product(&self) -> &DMatrix<f64> {
        &self.ip
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub(crate) fn structure_constant_flat(&self, idx: usize) -> f64 {
        self.c[idx]
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        linalg::unit(self.dim, i)
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    /// `[x, y] = Σ x_i y_j c[i][j][·]`.
    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += xy * self.c[base + k];
                }
            }
        }
        out
    }

    /// Slice-based bracket used by the ODE right-hand sides.
    pub(crate) fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += xy * self.c[base + k];
                }
            }
        }
    }

    /// Matrix of `ad_x = [x, ·]`.
    pub fn ad(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        let n = self.dim;
        Ok(DMatrix::from_fn(n, n, |k, j| {
            (0..n).map(|i| x[i] * self.structure_constant(i, j, k)).sum()
        }))
    }

    /// Largest entry of the cyclic Jacobi sum over all basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let e: Vec<_> = (0..n).map(|i| self.basis_vector(i)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ij = self.bracket_unchecked(&e[i], &e[j]);
                for k in 0..n {
                    let jk = self.bracket_unchecked(&e[j], &e[k]);
                    let ki = self.bracket_unchecked(&e[k], &e[i]);
                    let s = self.bracket_unchecked(&e[i], &jk)
                        + self.bracket_unchecked(&e[j], &ki)
                        + self.bracket_unchecked(&e[k], &ij);
                    worst = worst.max(s.amax());
                }
            }
        }
        worst
    }

    /// Largest entry of `[e_i, [e_j, e_k]]`; zero exactly for 2-step algebras.
    pub fn two_step_residual(&self) -> f64 {
        let n = self.dim;
        let e: Vec<_> = (0..n).map(|i| self.basis_vector(i)).collect();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                let jk = self.bracket_unchecked(&e[j], &e[k]);
                for ei in &e {
                    worst = worst.max(self.bracket_unchecked(ei, &jk).amax());
                }
            }
        }
        worst
    }

    pub fn is_two_step(&self) -> bool {
        self.two_step_residual() <= JACOBI_TOL
    }

    /// `0 = g_0 ◁ g_1 ◁ … ◁ g_k = g`, returned without the trivial `g_0`.
    pub fn upper_central_series(&self) -> Result<Vec<Subspace>> {
        let n = self.dim;
        let mut series: Vec<Subspace> = Vec::new();
        let mut prev = Subspace::zero(n);
        loop {
            // x ∈ g_i  <=>  (I - P_{g_{i-1}}) [x, e_j] = 0 for every j.
            let complement = DMatrix::identity(n, n) - prev.projector(&self.ip);
            let mut stacked = DMatrix::zeros(n * n, n);
            for j in 0..n {
                let ad_j = DMatrix::from_fn(n, n, |k, i| self.structure_constant(i, j, k));
                let block = &complement * ad_j;
                stacked.view_mut((j * n, 0), (n, n)).copy_from(&block);
            }
            let kernel = linalg::null_space(&stacked);
            let next = Subspace::from_vectors(&self.ip, &kernel, n);
            if next.dim() <= prev.dim() {
                return Err(Error::NotNilpotent { stalled_at: prev.dim(), dim: n });
            }
            let done = next.dim() == n;
            series.push(next.clone());
            if done {
                return Ok(series);
            }
            prev = next;
        }
    }

    pub fn central_series_dims(&self) -> Result<Vec<usize>> {
        Ok(self.upper_central_series()?.iter().map(Subspace::dim).collect())
    }

    /// Nilpotency step `k` (length of the upper central series).
    pub fn nilpotency_step(&self) -> Result<usize> {
        Ok(self.upper_central_series()?.len())
    }

    /// Smallest `i` with `dim g_i/g_{i-1} > 1 + dim g_{i-1}`, if any.
    pub fn dimension_condition(&self) -> Result<Option<usize>> {
        let dims = self.central_series_dims()?;
        let mut prev = 0usize;
        for (idx, &d) in dims.iter().enumerate() {
            if d - prev > 1 + prev {
                return Ok(Some(idx + 1));
            }
            prev = d;
        }
        Ok(None)
    }

    /// `h_i = g_{i-1}^⊥ ∩ g_i` (orthogonal complement in the metric).
    pub fn layer(&self, i: usize) -> Result<Subspace> {
        let series = self.upper_central_series()?;
        if i == 0 || i > series.len() {
            return Err(Error::InvalidArgument(format!(
                "layer index {i} outside 1..={}",
                series.len()
            )));
        }
        let upper = &series[i - 1];
        if i == 1 {
            return Ok(upper.clone());
        }
        let lower = &series[i - 2];
        let residuals: Vec<DVector<f64>> = upper
            .basis()
            .iter()
            .map(|v| v - linalg::project(&self.ip, lower.basis(), v))
            .collect();
        Ok(Subspace::from_vectors(&self.ip, &residuals, self.dim))
    }

    /// A commuting, orthonormal pair in `h_i`.
    ///
    /// Candidates `x` are taken from the basis of `h_i` in index order; the
    /// first whose centralizer in `h_i` has dimension at least two wins, and
    /// `y` is the first canonical unit vector of that centralizer orthogonal
    /// to `x`.
    pub fn find_commuting_pair(&self, i: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = self.layer(i)?;
        let hb = h.basis();
        for x in hb {
            let m = DMatrix::from_fn(self.dim, hb.len(), |k, j| {
                self.bracket_unchecked(x, &hb[j])[k]
            });
            let coeffs = linalg::null_space(&m);
            if coeffs.len() < 2 {
                continue;
            }
            let kernel: Vec<DVector<f64>> = coeffs
                .iter()
                .map(|c| {
                    hb.iter()
                        .zip(c.iter())
                        .fold(DVector::zeros(self.dim), |acc, (b, ci)| acc + b * *ci)
                })
                .collect();
            let canon = linalg::canonical_basis(&self.ip, &kernel);
            let ortho: Vec<DVector<f64>> = canon
                .iter()
                .map(|v| v - x * inner(&self.ip, x, v))
                .collect();
            if let Some(y) = linalg::orthonormalize(&self.ip, &ortho).into_iter().next() {
                return Ok((x.clone(), y));
            }
        }
        Err(Error::ConditionFails(format!(
            "no element of h_{i} has a centralizer of dimension >= 2 inside h_{i}"
        )))
    }

    /// Levi-Civita connection of left-invariant fields:
    /// `2⟨∇_x y, z⟩ = ⟨[x,y],z⟩ − ⟨x,[y,z]⟩ − ⟨y,[x,z]⟩`.
    pub fn koszul(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        let n = self.dim;
        let xy = self.bracket_unchecked(x, y);
        let rhs = DVector::from_fn(n, |k, _| {
            let z = linalg::unit(n, k);
            0.5 * (inner(&self.ip, &xy, &z)
                - inner(&self.ip, x, &self.bracket_unchecked(y, &z))
                - inner(&self.ip, y, &self.bracket_unchecked(x, &z)))
        });
        let chol = self
            .ip
            .clone()
            .cholesky()
            .expect("inner product validated at construction");
        Ok(chol.solve(&rhs))
    }

    /// Checks whether `span{x, y}` exponentiates to a totally geodesic flat.
    pub fn certify_plane(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<PlaneCertificate> {
        self.check_len(x)?;
        self.check_len(y)?;
        let nx = norm(&self.ip, x);
        let ny = norm(&self.ip, y);
        let xy = inner(&self.ip, x, y);
        let gram = nx * nx * ny * ny - xy * xy;
        if nx == 0.0 || ny == 0.0 || gram <= 1e-20 * nx * nx * ny * ny {
            return Err(Error::DegenerateSpan);
        }
        let bracket_norm = norm(&self.ip, &self.bracket_unchecked(x, y));
        let nabla_xx = norm(&self.ip, &self.koszul(x, x)?);
        let nabla_xy = norm(&self.ip, &self.koszul(x, y)?);
        let nabla_yy = norm(&self.ip, &self.koszul(y, y)?);
        let is_plane = [bracket_norm, nabla_xx, nabla_xy, nabla_yy]
            .iter()
            .all(|v| *v <= PLANE_TOL);
        Ok(PlaneCertificate { bracket_norm, nabla_xx, nabla_xy, nabla_yy, is_plane })
    }
}

/// Filiform algebra `L_n`: `[X_1, X_i] = X_{i+1}` for `2 <= i < n`.
pub fn filiform(n: usize) -> Result<LieAlgebra> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("filiform algebra needs n >= 3, got {n}")));
    }
    let brackets: Vec<_> = (1..n - 1).map(|i| (0, i, i + 1, 1.0)).collect();
    LieAlgebra::new(n, &brackets, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneCertificate {
    pub bracket_norm: f64,
    pub nabla_xx: f64,
    pub nabla_xy: f64,
    pub nabla_yy: f64,
    pub is_plane: bool,
}

/// Linear subspace of the algebra with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<DVector<f64>>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, basis: Vec::new() }
    }

    pub fn from_vectors(ip: &DMatrix<f64>, vectors: &[DVector<f64>], ambient: usize) -> Self {
        Subspace { ambient, basis: linalg::canonical_basis(ip, vectors) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn projector(&self, ip: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.ambient, self.ambient);
        for b in &self.basis {
            p += b * (b.transpose() * ip);
        }
        p
    }

    pub fn contains(&self, ip: &DMatrix<f64>, v: &DVector<f64>, tol: f64) -> bool {
        let r = v - linalg::project(ip, &self.basis, v);
        norm(ip, &r) <= tol * norm(ip, v).max(1.0)
    }
}
