//! Symmetric-matrix kernel: packed storage, eigendecomposition, projection
//! onto the PSD cone and its generalized derivative, pseudo-inverses.
//!
//! Everything downstream works in terms of [`SymMat`]: the matrix variables
//! X and S, the cost matrix C, and the penalized combinations the inner
//! solver projects. Storage is dense packed lower triangle; the intended
//! scale is n up to a few hundred. All operations are pure functions of
//! their inputs, so values can be shared freely across threads.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Default tolerance for classifying eigenvalues as zero, relative to the
/// matrix scale: `1e-8 * max(1, scale)`.
pub fn default_eigtol(scale: f64) -> f64 {
    1e-8 * scale.max(1.0)
}

/// Dense real symmetric matrix, packed lower triangle (row-major):
/// entries (0,0), (1,0), (1,1), (2,0), ...
///
/// Symmetry is structural: only one triangle is stored, so the
/// reconstructed full matrix always satisfies `M == M^T` exactly.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_idx(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; packed_len(n)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.data[packed_idx(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMat::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[packed_idx(i, i)] = v;
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle (`i >= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymMat { n, data }
    }

    /// Packs a dense matrix, symmetrizing via `(M + M^T) / 2`.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "from_dense needs a square matrix");
        SymMat::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    /// Row-major 2x2 shorthand used heavily by fixtures and tests.
    pub fn from_rows_2x2(a: f64, b: f64, c: f64) -> Self {
        let mut m = SymMat::zeros(2);
        m.set(0, 0, a);
        m.set(1, 0, b);
        m.set(1, 1, c);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.data[packed_idx(i, j)]
        } else {
            self.data[packed_idx(j, i)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            self.data[packed_idx(i, j)] = v;
        } else {
            self.data[packed_idx(j, i)] = v;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Trace inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        assert_eq!(self.n, other.n, "inner: dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = i * (i + 1) / 2;
            for j in 0..i {
                acc += 2.0 * self.data[row + j] * other.data[row + j];
            }
            acc += self.data[row + i] * other.data[row + i];
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[packed_idx(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> SymMat {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SymMat) {
        assert_eq!(self.n, other.n, "axpy: dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    /// Isometric vectorization: lower triangle with off-diagonal entries
    /// scaled by sqrt(2), so Euclidean norms match Frobenius norms.
    pub fn svec(&self) -> DVector<f64> {
        let mut v = DVector::zeros(packed_len(self.n));
        let mut k = 0;
        for i in 0..self.n {
            for j in 0..=i {
                v[k] = if i == j {
                    self.data[packed_idx(i, j)]
                } else {
                    SQRT2 * self.data[packed_idx(i, j)]
                };
                k += 1;
            }
        }
        v
    }

    pub fn from_svec(n: usize, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), packed_len(n), "from_svec: wrong length");
        let mut m = SymMat::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m.data[packed_idx(i, j)] = if i == j { v[k] } else { v[k] / SQRT2 };
                k += 1;
            }
        }
        m
    }
}

impl std::fmt::Debug for SymMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "SymMat {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:>12.5e} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl std::ops::Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scaled(-1.0)
    }
}

/// Eigendecomposition of a [`SymMat`]: eigenvalues sorted non-increasing,
/// eigenvector columns aligned and sign-normalized (the largest-magnitude
/// entry of each column is positive) so repeated runs are reproducible.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Euclidean norm of the spectrum = Frobenius norm of the source matrix.
    pub fn spectrum_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.first().expect("empty decomposition")
    }

    /// Rebuilds `Q diag(g(lambda_i)) Q^T` as a [`SymMat`].
    pub fn recompose(&self, g: impl Fn(f64) -> f64) -> SymMat {
        let n = self.dim();
        let q = &self.eigenvectors;
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        SymMat::from_fn(n, |i, j| {
            let mut acc = 0.0;
            for (k, &gk) in vals.iter().enumerate() {
                if gk != 0.0 {
                    acc += gk * q[(i, k)] * q[(j, k)];
                }
            }
            acc
        })
    }
}

/// Index partition of the spectrum by sign relative to a tolerance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexPartition {
    /// indices with eigenvalue > eigtol
    pub alpha: Vec<usize>,
    /// indices with |eigenvalue| <= eigtol
    pub beta: Vec<usize>,
    /// indices with eigenvalue < -eigtol
    pub gamma: Vec<usize>,
}

/// Symmetric eigendecomposition with deterministic ordering and signs.
pub fn eig_sym(m: &SymMat) -> Result<EigenDecomposition> {
    let n = m.dim();
    if !m.is_finite() {
        return Err(Error::EigenFailed { n, norm: f64::NAN });
    }
    let dense = m.to_dense();
    let se = nalgebra::linalg::SymmetricEigen::try_new(dense, f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailed { n, norm: m.norm() })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = se.eigenvectors.column(k);
        // sign normalization: make the first largest-magnitude entry positive
        let mut imax = 0;
        for i in 1..n {
            if src[i].abs() > src[imax].abs() {
                imax = i;
            }
        }
        let flip = if src[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, col)] = flip * src[i];
        }
    }

    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::EigenFailed { n, norm: m.norm() });
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Projection onto the PSD cone: `P = Q max(Lambda, 0) Q^T`.
///
/// Returns the eigendecomposition of the argument for reuse by the
/// generalized derivative and the multiplier update.
pub fn project_psd(m: &SymMat) -> Result<(SymMat, EigenDecomposition)> {
    let decomp = eig_sym(m)?;
    let p = decomp.recompose(|l| l.max(0.0));
    Ok((p, decomp))
}

/// Clarke generalized directional derivative of the PSD projection at the
/// point whose decomposition is `decomp`, applied to `h`:
/// `Q (Omega o (Q^T h Q)) Q^T` with
/// `Omega_ij = (lam_i^+ + lam_j^+) / (|lam_i| + |lam_j|)`.
///
/// When the denominator falls below the eigenvalue tolerance the entry is 1
/// if both eigenvalues are nonnegative and 0 otherwise. The resulting map
/// is self-adjoint and positive semidefinite with operator norm <= 1.
pub fn project_psd_dderiv(decomp: &EigenDecomposition, h: &SymMat) -> SymMat {
    let n = decomp.dim();
    assert_eq!(n, h.dim(), "dderiv: dimension mismatch");
    let eigtol = default_eigtol(decomp.spectrum_norm());
    let q = &decomp.eigenvectors;
    let ht = q.transpose() * h.to_dense() * q;
    let lam = &decomp.eigenvalues;
    let mut mixed = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (li, lj) = (lam[i], lam[j]);
            let denom = li.abs() + lj.abs();
            let omega = if denom <= eigtol {
                if li >= 0.0 && lj >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (li.max(0.0) + lj.max(0.0)) / denom
            };
            mixed[(i, j)] = omega * ht[(i, j)];
        }
    }
    let out = q * mixed * q.transpose();
    SymMat::from_dense(&out)
}

/// Splits indices into alpha (> eigtol), gamma (< -eigtol) and beta (rest).
pub fn partition_eigs(decomp: &EigenDecomposition, eigtol: f64) -> IndexPartition {
    assert!(eigtol > 0.0, "partition_eigs: eigtol must be positive");
    let mut p = IndexPartition {
        alpha: Vec::new(),
        beta: Vec::new(),
        gamma: Vec::new(),
    };
    for (i, &l) in decomp.eigenvalues.iter().enumerate() {
        if l > eigtol {
            p.alpha.push(i);
        } else if l < -eigtol {
            p.gamma.push(i);
        } else {
            p.beta.push(i);
        }
    }
    p
}

/// Moore-Penrose pseudo-inverse of a PSD matrix: inverts eigenvalues above
/// `eigtol`, zeroes the rest. Rejects inputs with an eigenvalue below
/// `-sqrt(eigtol)`.
pub fn pinv_psd(m: &SymMat, eigtol: f64) -> Result<SymMat> {
    let decomp = eig_sym(m)?;
    let lam_min = decomp.lambda_min();
    if lam_min < -eigtol.sqrt() {
        return Err(Error::NotPsd {
            lambda_min: lam_min,
        });
    }
    Ok(decomp.recompose(|l| if l > eigtol { 1.0 / l } else { 0.0 }))
}

/// Projection of `m` onto the normal cone of the PSD cone at the point `x`
/// whose decomposition is `x_decomp` (x must be PSD up to `eigtol`).
///
/// In x's eigenbasis the normal cone consists of matrices supported on the
/// kernel block and negative semidefinite there, so the projection zeroes
/// the rows/columns of the positive-eigenvalue block and projects the
/// remaining principal block onto the NSD cone.
pub fn project_onto_normal_cone(
    x_decomp: &EigenDecomposition,
    m: &SymMat,
    eigtol: f64,
) -> Result<SymMat> {
    let n = x_decomp.dim();
    assert_eq!(n, m.dim(), "normal cone projection: dimension mismatch");
    let q = &x_decomp.eigenvectors;
    let mt = q.transpose() * m.to_dense() * q;
    let kernel: Vec<usize> = (0..n)
        .filter(|&i| x_decomp.eigenvalues[i] <= eigtol)
        .collect();
    let kdim = kernel.len();
    let mut out_t = DMatrix::zeros(n, n);
    if kdim > 0 {
        let block = SymMat::from_fn(kdim, |a, b| {
            0.5 * (mt[(kernel[a], kernel[b])] + mt[(kernel[b], kernel[a])])
        });
        // NSD projection: -Pi_PSD(-B)
        let (pos, _) = project_psd(&block.scaled(-1.0))?;
        for a in 0..kdim {
            for b in 0..kdim {
                out_t[(kernel[a], kernel[b])] = -pos.get(a, b);
            }
        }
    }
    let out = q * out_t * q.transpose();
    Ok(SymMat::from_dense(&out))
}

/// Distance to the PSD cone: `||Pi_PSD(-M)||` by Moreau decomposition.
pub fn dist_psd(m: &SymMat) -> Result<f64> {
    let (p, _) = project_psd(&m.scaled(-1.0))?;
    Ok(p.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &SymMat, b: &SymMat, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        let d = (a - b).norm();
        assert!(d <= tol, "matrices differ by {d:.3e} > {tol:.3e}\n{a:?}\n{b:?}");
    }

    #[test]
    fn eig_diagonal_already_sorted() {
        let m = SymMat::from_diag(&[3.0, 1.0]);
        let d = eig_sym(&m).unwrap();
        assert_eq!(d.eigenvalues, vec![3.0, 1.0]);
        let q = &d.eigenvectors;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((q[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_offdiag_2x2() {
        let m = SymMat::from_rows_2x2(0.0, 1.0, 0.0);
        let d = eig_sym(&m).unwrap();
        assert!((d.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((d.eigenvalues[1] + 1.0).abs() < 1e-12);
        let s = 1.0 / SQRT2;
        let q = &d.eigenvectors;
        // sign-normalized columns (1,1)/sqrt2 and (1,-1)/sqrt2
        assert!((q[(0, 0)] - s).abs() < 1e-12 && (q[(1, 0)] - s).abs() < 1e-12);
        assert!((q[(0, 1)] - s).abs() < 1e-12 && (q[(1, 1)] + s).abs() < 1e-12);
    }

    #[test]
    fn eig_zero_matrix() {
        let m = SymMat::zeros(4);
        let d = eig_sym(&m).unwrap();
        assert!(d.eigenvalues.iter().all(|&l| l == 0.0));
        let q = &d.eigenvectors;
        let qtq = q.transpose() * q;
        let err = (&qtq - DMatrix::<f64>::identity(4, 4)).norm();
        assert!(err <= 1e-10 * 4.0);
    }

    #[test]
    fn eig_invariants_random() {
        let mut seed = 42u64;
        let mut next = move || {
            // xorshift; plain uniform in [-1, 1]
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed % 10_000) as f64 / 5_000.0 - 1.0
        };
        for n in [1usize, 2, 5, 12, 30] {
            let m = SymMat::from_fn(n, |_, _| next());
            let d = eig_sym(&m).unwrap();
            let q = &d.eigenvectors;
            let orth = (q.transpose() * q - DMatrix::<f64>::identity(n, n)).norm();
            assert!(orth <= 1e-10 * n as f64, "orthogonality {orth:.2e} at n={n}");
            let rec = d.recompose(|l| l);
            let err = (&rec - &m).norm();
            assert!(err <= 1e-10 * (1.0 + m.norm()), "recompose {err:.2e} at n={n}");
            for k in 1..n {
                assert!(d.eigenvalues[k - 1] >= d.eigenvalues[k]);
            }
        }
    }

    #[test]
    fn eig_is_deterministic() {
        let mut seed = 77u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed % 10_000) as f64 / 5_000.0 - 1.0
        };
        let m = SymMat::from_fn(8, |_, _| next());
        let a = eig_sym(&m).unwrap();
        let b = eig_sym(&m).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut m = SymMat::zeros(2);
        m.set(0, 0, f64::NAN);
        assert!(matches!(eig_sym(&m), Err(Error::EigenFailed { .. })));
    }

    #[test]
    fn project_psd_examples() {
        let (p, _) = project_psd(&SymMat::from_diag(&[2.0, 3.0])).unwrap();
        assert_close(&p, &SymMat::from_diag(&[2.0, 3.0]), 1e-12);

        let (p, _) = project_psd(&SymMat::from_diag(&[1.0, -1.0])).unwrap();
        assert_close(&p, &SymMat::from_diag(&[1.0, 0.0]), 1e-12);

        let (p, _) = project_psd(&SymMat::from_rows_2x2(0.0, 1.0, 0.0)).unwrap();
        assert_close(&p, &SymMat::from_rows_2x2(0.5, 0.5, 0.5), 1e-12);
    }

    #[test]
    fn dderiv_examples() {
        let h = SymMat::from_rows_2x2(0.3, -0.7, 1.1);

        let (_, d) = project_psd(&SymMat::from_diag(&[2.0, 1.0])).unwrap();
        assert_close(&project_psd_dderiv(&d, &h), &h, 1e-12);

        let (_, d) = project_psd(&SymMat::from_diag(&[-1.0, -3.0])).unwrap();
        assert_close(&project_psd_dderiv(&d, &h), &SymMat::zeros(2), 1e-12);

        let (_, d) = project_psd(&SymMat::from_diag(&[1.0, -1.0])).unwrap();
        let h01 = SymMat::from_rows_2x2(0.0, 1.0, 0.0);
        assert_close(
            &project_psd_dderiv(&d, &h01),
            &SymMat::from_rows_2x2(0.0, 0.5, 0.0),
            1e-12,
        );
    }

    #[test]
    fn partition_examples() {
        let d = EigenDecomposition {
            eigenvalues: vec![2.0, 0.0, -1.0],
            eigenvectors: DMatrix::identity(3, 3),
        };
        let p = partition_eigs(&d, 1e-8);
        assert_eq!(p.alpha, vec![0]);
        assert_eq!(p.beta, vec![1]);
        assert_eq!(p.gamma, vec![2]);

        let d = EigenDecomposition {
            eigenvalues: vec![1e-9, 0.0],
            eigenvectors: DMatrix::identity(2, 2),
        };
        let p = partition_eigs(&d, 1e-8);
        assert!(p.alpha.is_empty());
        assert_eq!(p.beta, vec![0, 1]);

        // Z = X - S for the rank-complementary pair diag(1,0), diag(0,1)
        let xbar = SymMat::from_diag(&[1.0, 0.0]);
        let sbar = SymMat::from_diag(&[0.0, 1.0]);
        let z = &xbar - &sbar;
        let d = eig_sym(&z).unwrap();
        let p = partition_eigs(&d, 1e-8);
        assert_eq!((p.alpha.len(), p.beta.len(), p.gamma.len()), (1, 0, 1));
    }

    #[test]
    fn pinv_examples() {
        let p = pinv_psd(&SymMat::from_diag(&[2.0, 0.0]), 1e-8).unwrap();
        assert_close(&p, &SymMat::from_diag(&[0.5, 0.0]), 1e-12);

        let p = pinv_psd(&SymMat::identity(3), 1e-8).unwrap();
        assert_close(&p, &SymMat::identity(3), 1e-12);

        let half = SymMat::from_rows_2x2(0.5, 0.5, 0.5);
        let p = pinv_psd(&half, 1e-8).unwrap();
        assert_close(&p, &half, 1e-12);

        assert!(matches!(
            pinv_psd(&SymMat::from_diag(&[1.0, -0.5]), 1e-8),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn pinv_is_generalized_inverse() {
        let m = SymMat::from_rows_2x2(2.0, 1.0, 1.0);
        let p = pinv_psd(&m, 1e-8).unwrap();
        let md = m.to_dense();
        let pd = p.to_dense();
        let err = (&md * &pd * &md - &md).norm();
        assert!(err <= 1e-8 * m.norm());
    }

    #[test]
    fn svec_is_isometric() {
        let m = SymMat::from_rows_2x2(1.0, 2.0, -3.0);
        let v = m.svec();
        assert!((v.norm() - m.norm()).abs() < 1e-14);
        let back = SymMat::from_svec(2, &v);
        assert_close(&back, &m, 1e-14);
    }
}
