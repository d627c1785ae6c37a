//! Problem data model: constraint operators, cone structure, objectives,
//! KKT residuals, and the feasibility-bound constants used by the
//! implementable stopping criteria.
//!
//! A problem instance is
//!
//! ```text
//! min  h(F X) + <C, X>   s.t.  <A_i, X> = b_i  or  <A_i, X> >= b_i,  X PSD
//! ```
//!
//! with `h = 0` (linear objective) or `h(v) = 0.5 ||v - d||^2`
//! (least-squares objective). The dual, in minimization form, is
//! `min -<b,y> + h*(-w)` over `y` in the dual cone Q, subject to
//! `A*y + F*w + S = C`, `S` PSD.

use nalgebra::{DMatrix, DVector};

use crate::symcone::{eig_sym, project_psd, SymMat};
use crate::{Error, Result};

/// A stack of symmetric matrices representing a linear map from symmetric
/// matrices to vectors via row-wise trace inner products; the adjoint is
/// the matching weighted sum.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    n: usize,
    rows: Vec<SymMat>,
}

impl LinearOperator {
    pub fn new(n: usize, rows: Vec<SymMat>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "operator row {i} has dimension {} != {n}",
                    r.dim()
                )));
            }
            if !r.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "operator row {i} has non-finite entries"
                )));
            }
        }
        Ok(LinearOperator { n, rows })
    }

    pub fn empty(n: usize) -> Self {
        LinearOperator { n, rows: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SymMat] {
        &self.rows
    }

    /// `(A X)_i = <A_i, X>`.
    pub fn apply(&self, x: &SymMat) -> DVector<f64> {
        assert_eq!(x.dim(), self.n, "operator apply: dimension mismatch");
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.inner(x)))
    }

    /// `A* y = sum_i y_i A_i`.
    pub fn adjoint(&self, y: &DVector<f64>) -> SymMat {
        assert_eq!(y.len(), self.rows.len(), "adjoint: dimension mismatch");
        let mut out = SymMat::zeros(self.n);
        for (i, r) in self.rows.iter().enumerate() {
            if y[i] != 0.0 {
                out.axpy(y[i], r);
            }
        }
        out
    }

    /// Matricization with isometric row vectorization, so singular values
    /// agree with the operator's singular values on the symmetric space.
    pub fn matricize(&self) -> DMatrix<f64> {
        let cols = self.n * (self.n + 1) / 2;
        let mut m = DMatrix::zeros(self.rows.len(), cols);
        for (i, r) in self.rows.iter().enumerate() {
            m.set_row(i, &r.svec().transpose());
        }
        m
    }

    /// Smallest singular value exceeding `1e-8 * sigma_max`.
    pub fn sigma_min_positive(&self) -> Result<f64> {
        if self.rows.is_empty() {
            return Err(Error::ZeroOperator);
        }
        let m = self.matricize();
        let svd = nalgebra::linalg::SVD::new(m, false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        if smax == 0.0 {
            return Err(Error::ZeroOperator);
        }
        let thresh = 1e-8 * smax;
        Ok(svd
            .singular_values
            .iter()
            .cloned()
            .filter(|s| *s > thresh)
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest eigenvalue of the Gram operator `A* A` (= sigma_max^2).
    pub fn gram_lambda_max(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let m = self.matricize();
        let svd = nalgebra::linalg::SVD::new(m, false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        smax * smax
    }

    /// Largest Frobenius norm among the rows.
    pub fn max_row_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }
}

/// Kind of a scalar constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// `<A_i, X> = b_i`; multiplier free.
    Equality,
    /// `<A_i, X> >= b_i`; multiplier nonnegative.
    InequalityGe,
}

/// Row kinds for the polyhedral cone Q = R^{m_e} x R_+^{m_i} (and its polar
/// {0}^{m_e} x R_-^{m_i}).
#[derive(Clone, Debug)]
pub struct ConeSpec {
    kinds: Vec<RowKind>,
}

impl ConeSpec {
    pub fn new(kinds: Vec<RowKind>) -> Self {
        ConeSpec { kinds }
    }

    pub fn all_equality(m: usize) -> Self {
        ConeSpec {
            kinds: vec![RowKind::Equality; m],
        }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    pub fn is_all_equality(&self) -> bool {
        self.kinds.iter().all(|k| *k == RowKind::Equality)
    }

    /// Projection onto Q: equality components pass through, inequality
    /// components clamp to `max(., 0)`.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.kinds.len(), "cone projection: dimension mismatch");
        DVector::from_fn(y.len(), |i, _| match self.kinds[i] {
            RowKind::Equality => y[i],
            RowKind::InequalityGe => y[i].max(0.0),
        })
    }

    /// Projection onto the polar cone Q°.
    pub fn project_polar(&self, r: &DVector<f64>) -> DVector<f64> {
        assert_eq!(r.len(), self.kinds.len(), "polar projection: dimension mismatch");
        DVector::from_fn(r.len(), |i, _| match self.kinds[i] {
            RowKind::Equality => 0.0,
            RowKind::InequalityGe => r[i].min(0.0),
        })
    }

    /// Distance of `r` to Q°.
    pub fn dist_polar(&self, r: &DVector<f64>) -> f64 {
        (r - self.project_polar(r)).norm()
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        y.len() == self.kinds.len()
            && y.iter().zip(self.kinds.iter()).all(|(v, k)| match k {
                RowKind::Equality => true,
                RowKind::InequalityGe => *v >= 0.0,
            })
    }
}

/// Objective form of the primal problem.
#[derive(Clone, Debug)]
pub enum Objective {
    /// `<C, X>` only.
    Linear,
    /// `0.5 ||F X - d||^2 + <C, X>`.
    LeastSquares { f: LinearOperator, d: DVector<f64> },
}

/// Immutable problem instance. Validated at construction; all operations
/// on it are pure, so it is safe to share across threads.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    n: usize,
    c: SymMat,
    a: LinearOperator,
    b: DVector<f64>,
    cone: ConeSpec,
    objective: Objective,
    strictly_feasible: Option<SymMat>,
}

impl SdpProblem {
    pub fn new(
        c: SymMat,
        a: LinearOperator,
        b: DVector<f64>,
        cone: ConeSpec,
        objective: Objective,
        strictly_feasible: Option<SymMat>,
    ) -> Result<Self> {
        let n = c.dim();
        if a.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint operator dimension {} != {n}",
                a.dim()
            )));
        }
        if b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} != {} constraint rows",
                b.len(),
                a.n_rows()
            )));
        }
        if cone.len() != a.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "cone spec length {} != {} constraint rows",
                cone.len(),
                a.n_rows()
            )));
        }
        if !c.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite problem data".into()));
        }
        if let Objective::LeastSquares { f, d } = &objective {
            if f.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "objective operator dimension {} != {n}",
                    f.dim()
                )));
            }
            if d.len() != f.n_rows() {
                return Err(Error::DimensionMismatch(format!(
                    "objective target length {} != {} rows",
                    d.len(),
                    f.n_rows()
                )));
            }
        }
        if let Some(xhat) = &strictly_feasible {
            if xhat.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "strictly feasible point dimension {} != {n}",
                    xhat.dim()
                )));
            }
            let lam_min = eig_sym(xhat)?.lambda_min();
            if lam_min <= 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "strictly_feasible: lambda_min = {lam_min:.3e} is not positive"
                )));
            }
            let ax = a.apply(xhat);
            for i in 0..b.len() {
                if cone.kinds()[i] == RowKind::Equality
                    && (ax[i] - b[i]).abs() > 1e-10 * (1.0 + b[i].abs())
                {
                    return Err(Error::InvalidProblem(format!(
                        "strictly_feasible violates equality row {i}: <A_i, Xhat> = {} vs b_i = {}",
                        ax[i], b[i]
                    )));
                }
            }
        }
        Ok(SdpProblem {
            n,
            c,
            a,
            b,
            cone,
            objective,
            strictly_feasible,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.a.n_rows()
    }

    /// Number of least-squares rows (0 for linear objectives).
    pub fn m_prime(&self) -> usize {
        match &self.objective {
            Objective::Linear => 0,
            Objective::LeastSquares { f, .. } => f.n_rows(),
        }
    }

    pub fn c(&self) -> &SymMat {
        &self.c
    }

    pub fn a_op(&self) -> &LinearOperator {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.cone
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn strictly_feasible(&self) -> Option<&SymMat> {
        self.strictly_feasible.as_ref()
    }

    /// `F X` (empty vector for linear objectives).
    pub fn f_apply(&self, x: &SymMat) -> DVector<f64> {
        match &self.objective {
            Objective::Linear => DVector::zeros(0),
            Objective::LeastSquares { f, .. } => f.apply(x),
        }
    }

    /// `F* w` (zero matrix for linear objectives).
    pub fn f_adjoint(&self, w: &DVector<f64>) -> SymMat {
        match &self.objective {
            Objective::Linear => {
                assert_eq!(w.len(), 0, "nonempty w on a linear problem");
                SymMat::zeros(self.n)
            }
            Objective::LeastSquares { f, .. } => f.adjoint(w),
        }
    }

    pub fn d(&self) -> DVector<f64> {
        match &self.objective {
            Objective::Linear => DVector::zeros(0),
            Objective::LeastSquares { d, .. } => d.clone(),
        }
    }

    /// `A* y + F* w + S - C`, the dual equality residual matrix.
    pub fn dual_residual_matrix(&self, y: &DVector<f64>, w: &DVector<f64>, s: &SymMat) -> SymMat {
        let mut r = self.a.adjoint(y);
        r.axpy(1.0, &self.f_adjoint(w));
        r.axpy(1.0, s);
        r.axpy(-1.0, &self.c);
        r
    }

    /// `h*(-w)`: 0 for linear, `0.5 ||w||^2 - <d, w>` for least squares.
    pub fn h_star_neg(&self, w: &DVector<f64>) -> f64 {
        match &self.objective {
            Objective::Linear => 0.0,
            Objective::LeastSquares { d, .. } => 0.5 * w.norm_squared() - d.dot(w),
        }
    }

    /// `h(F X)`: 0 for linear, `0.5 ||F X - d||^2` for least squares.
    pub fn h_of_fx(&self, x: &SymMat) -> f64 {
        match &self.objective {
            Objective::Linear => 0.0,
            Objective::LeastSquares { f, d } => {
                let r = f.apply(x) - d;
                0.5 * r.norm_squared()
            }
        }
    }
}

/// A candidate KKT point `(y, w, S, X)`; `w` is empty for linear problems.
#[derive(Clone, Debug)]
pub struct KktPoint {
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub s: SymMat,
    pub x: SymMat,
}

/// Blockwise optimality residuals of a KKT point.
///
/// `kkt_norm` is the Euclidean norm of all four residual blocks stacked;
/// it vanishes exactly at KKT solutions.
#[derive(Clone, Copy, Debug)]
pub struct Residuals {
    /// Distance of `b - A X` to the polar cone Q°.
    pub primal_infeas: f64,
    /// `||A* y + F* w + S - C||`.
    pub dual_infeas: f64,
    /// `||S - Pi_PSD(S - X)||`, the X-S complementarity residual.
    pub comp_x: f64,
    /// `||y - Pi_Q(y + b - A X)||`, the multiplier-cone residual.
    pub comp_y: f64,
    pub kkt_norm: f64,
}

/// Four-block KKT residual of `pt` for `prob`:
/// `r1 = y - Pi_Q(y + b - A X)`, `r2 = F X - d + w` (least squares only),
/// `r3 = S - Pi_PSD(S - X)`, `r4 = C - A* y - F* w - S`.
pub fn kkt_residual(prob: &SdpProblem, pt: &KktPoint) -> Result<Residuals> {
    if pt.x.dim() != prob.n() || pt.s.dim() != prob.n() {
        return Err(Error::DimensionMismatch(
            "KKT point matrix dimension does not match the problem".into(),
        ));
    }
    if pt.y.len() != prob.m() || pt.w.len() != prob.m_prime() {
        return Err(Error::DimensionMismatch(
            "KKT point multiplier length does not match the problem".into(),
        ));
    }

    let ax = prob.a_op().apply(&pt.x);
    let shifted = &pt.y + prob.b() - &ax;
    let r1 = &pt.y - prob.cone().project(&shifted);

    let r2 = match prob.objective() {
        Objective::Linear => DVector::zeros(0),
        Objective::LeastSquares { f, d } => f.apply(&pt.x) - d + &pt.w,
    };

    let (proj, _) = project_psd(&(&pt.s - &pt.x))?;
    let r3 = &pt.s - &proj;

    let r4 = prob.dual_residual_matrix(&pt.y, &pt.w, &pt.s).scaled(-1.0);

    let kkt_norm = (r1.norm_squared() + r2.norm_squared() + r3.norm_sq() + r4.norm_sq()).sqrt();
    Ok(Residuals {
        primal_infeas: prob.cone().dist_polar(&(prob.b() - &ax)),
        dual_infeas: r4.norm(),
        comp_x: r3.norm(),
        comp_y: r1.norm(),
        kkt_norm,
    })
}

/// The constant `mu_bar` from the feasibility bound: with `Xhat` strictly
/// feasible for an equality-constrained problem,
/// `mu_bar = sigma_min^{-1}(A) * max(1/lam_min(Xhat), 1 + ||Xhat||/lam_min(Xhat))`.
pub fn mu_bar(prob: &SdpProblem) -> Result<f64> {
    let xhat = prob
        .strictly_feasible()
        .ok_or(Error::MissingStrictlyFeasible)?;
    if !prob.cone().is_all_equality() {
        return Err(Error::NonEqualityRows);
    }
    let sigma_min = prob.a_op().sigma_min_positive()?;
    let lam_min = eig_sym(xhat)?.lambda_min();
    let inv = 1.0 / lam_min;
    Ok((inv.max(1.0 + inv * xhat.norm())) / sigma_min)
}

/// Upper bound `mu_bar * (1 + ||X||) * ||b - A X||` on the distance of a
/// PSD matrix `X` to the feasible set of an equality-constrained problem.
pub fn feasibility_distance_bound(prob: &SdpProblem, x: &SymMat) -> Result<f64> {
    let mu = mu_bar(prob)?;
    let r = (prob.b() - prob.a_op().apply(x)).norm();
    Ok(mu * (1.0 + x.norm()) * r)
}

/// Primal objective in minimization form: `<C,X>` plus the least-squares
/// term when present.
pub fn primal_objective(prob: &SdpProblem, x: &SymMat) -> f64 {
    prob.h_of_fx(x) + prob.c().inner(x)
}

/// Dual objective in minimization form: `-<b,y> + h*(-w)`.
pub fn dual_objective(prob: &SdpProblem, pt: &KktPoint) -> f64 {
    -prob.b().dot(&pt.y) + prob.h_star_neg(&pt.w)
}
