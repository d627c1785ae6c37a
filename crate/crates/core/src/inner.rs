//! Inner subproblem solver: approximate minimization of the reduced
//! augmented Lagrangian over the multipliers `(y, w)`, by projected
//! semismooth Newton-CG with a gradient-descent safeguard.
//!
//! With `W = X^k/c_k + A*y + F*w - C` the reduced objective is
//!
//! ```text
//! zeta(y, w) = -<b,y> + h*(-w) + (c_k/2) ||Pi_PSD(W)||^2 - ||X^k||^2 / (2 c_k)
//! ```
//!
//! which equals the full augmented Lagrangian after eliminating the `S`
//! block through its closed-form minimizer `Pi_PSD(-W)`. The multiplier
//! trial update is `X_trial = c_k Pi_PSD(W)`, which makes the gradient
//! `(-b + A X_trial, w - d + F X_trial)`.

use nalgebra::DVector;

use crate::model::{ConeSpec, Objective, SdpProblem};
use crate::symcone::{eig_sym, project_psd_dderiv, EigenDecomposition, SymMat};
use crate::{Error, Result};

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK_RATIO: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;

/// One outer iteration's subproblem: minimize the reduced augmented
/// Lagrangian for fixed multiplier matrix `X^k` and penalty `c_k`.
pub struct InnerProblem<'a> {
    prob: &'a SdpProblem,
    xk: SymMat,
    ck: f64,
    xk_norm_sq: f64,
    max_coupling_norm_sq: f64,
}

/// Result of an inner solve. `s` and `xnext` come from the same
/// eigendecomposition of `W`, so the Moreau identity
/// `xnext = X^k + c_k (A*y + F*w + S - C)` holds to rounding.
#[derive(Clone, Debug)]
pub struct InnerResult {
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    /// `Pi_PSD(C - A*y - F*w - X^k/c_k)`.
    pub s: SymMat,
    /// `Pi_PSD(X^k + c_k (A*y + F*w - C))`.
    pub xnext: SymMat,
    /// Exact distance of 0 to the gradient plus the normal cone of Q.
    pub grad_norm_q: f64,
    pub objective_value: f64,
    /// Newton/gradient steps taken.
    pub iterations: usize,
    /// False when the iteration cap was reached or progress stalled.
    pub converged: bool,
}

#[derive(Clone)]
struct EvalPoint {
    decomp: EigenDecomposition,
    obj: f64,
    g_y: DVector<f64>,
    g_w: DVector<f64>,
    xtrial: SymMat,
}

impl<'a> InnerProblem<'a> {
    pub fn new(prob: &'a SdpProblem, xk: SymMat, ck: f64) -> Result<Self> {
        if !(ck > 0.0 && ck.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty ck = {ck} must be positive")));
        }
        if xk.dim() != prob.n() {
            return Err(Error::DimensionMismatch(
                "inner problem X^k dimension does not match the problem".into(),
            ));
        }
        let xk_norm_sq = xk.norm_sq();
        let mut max_sq = prob
            .a_op()
            .rows()
            .iter()
            .map(|r| r.norm_sq())
            .fold(0.0, f64::max);
        if let Objective::LeastSquares { f, .. } = prob.objective() {
            max_sq = max_sq.max(f.rows().iter().map(|r| r.norm_sq()).fold(0.0, f64::max));
        }
        Ok(InnerProblem {
            prob,
            xk,
            ck,
            xk_norm_sq,
            max_coupling_norm_sq: max_sq,
        })
    }

    pub fn prob(&self) -> &SdpProblem {
        self.prob
    }

    pub fn xk(&self) -> &SymMat {
        &self.xk
    }

    pub fn ck(&self) -> f64 {
        self.ck
    }

    /// `W = X^k/c_k + A*y + F*w - C`.
    pub fn w_matrix(&self, y: &DVector<f64>, w: &DVector<f64>) -> SymMat {
        let mut m = self.xk.scaled(1.0 / self.ck);
        m.axpy(1.0, &self.prob.a_op().adjoint(y));
        m.axpy(1.0, &self.prob.f_adjoint(w));
        m.axpy(-1.0, self.prob.c());
        m
    }

    fn eval(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<EvalPoint> {
        let wm = self.w_matrix(y, w);
        let decomp = eig_sym(&wm)?;
        let pos_norm_sq: f64 = decomp
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0) * l.max(0.0))
            .sum();
        let obj = -self.prob.b().dot(y) + self.prob.h_star_neg(w) + 0.5 * self.ck * pos_norm_sq
            - self.xk_norm_sq / (2.0 * self.ck);
        let xtrial = decomp.recompose(|l| self.ck * l.max(0.0));
        let g_y = self.prob.a_op().apply(&xtrial) - self.prob.b();
        let g_w = match self.prob.objective() {
            Objective::Linear => DVector::zeros(0),
            Objective::LeastSquares { f, d } => w - d + f.apply(&xtrial),
        };
        Ok(EvalPoint {
            decomp,
            obj,
            g_y,
            g_w,
            xtrial,
        })
    }

    /// Reduced objective `zeta_k(y, w, S_k(y, w))`.
    pub fn reduced_objective(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        Ok(self.eval(y, w)?.obj)
    }

    /// Gradient of the reduced objective:
    /// `(-b + A X_trial, w - d + F X_trial)` with `X_trial = c_k Pi_PSD(W)`.
    pub fn reduced_gradient(
        &self,
        y: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let e = self.eval(y, w)?;
        Ok((e.g_y, e.g_w))
    }

    /// Full augmented Lagrangian `L_{c_k}(y, w, S, X^k)` evaluated directly,
    /// without eliminating S. Used as an independent check of the reduced
    /// form.
    pub fn full_lagrangian(&self, y: &DVector<f64>, w: &DVector<f64>, s: &SymMat) -> f64 {
        let r = self.prob.dual_residual_matrix(y, w, s);
        -self.prob.b().dot(y)
            + self.prob.h_star_neg(w)
            + self.xk.inner(&r)
            + 0.5 * self.ck * r.norm_sq()
    }

    /// `S_k(y, w) = Pi_PSD(C - A*y - F*w - X^k/c_k)`.
    pub fn s_of(&self, y: &DVector<f64>, w: &DVector<f64>) -> Result<SymMat> {
        let decomp = eig_sym(&self.w_matrix(y, w))?;
        Ok(decomp.recompose(|l| (-l).max(0.0)))
    }

    fn newton_apply(
        &self,
        decomp: &EigenDecomposition,
        vy: &DVector<f64>,
        vw: &DVector<f64>,
        reg: f64,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut dir = self.prob.a_op().adjoint(vy);
        dir.axpy(1.0, &self.prob.f_adjoint(vw));
        let vh = project_psd_dderiv(decomp, &dir);
        let out_y = self.prob.a_op().apply(&vh).scale(self.ck) + vy.scale(reg);
        let out_w = match self.prob.objective() {
            Objective::Linear => DVector::zeros(0),
            Objective::LeastSquares { f, .. } => {
                f.apply(&vh).scale(self.ck) + vw + vw.scale(reg)
            }
        };
        (out_y, out_w)
    }

    fn newton_direction(
        &self,
        y: &DVector<f64>,
        e: &EvalPoint,
        stat: f64,
    ) -> (DVector<f64>, DVector<f64>) {
        let m = self.prob.m();
        let mp = self.prob.m_prime();
        let reg = 1e-12 * (1.0 + self.ck * self.max_coupling_norm_sq);
        let target = stat.sqrt().min(0.5);

        // inequality rows pinned at the boundary with a gradient pointing
        // outward stay fixed; the Newton system is solved on the rest
        let active: Vec<bool> = (0..m)
            .map(|i| {
                self.prob.cone().kinds()[i] == crate::model::RowKind::InequalityGe
                    && y[i] == 0.0
                    && e.g_y[i] >= 0.0
            })
            .collect();
        let mask = |v: &mut DVector<f64>| {
            for (i, &a) in active.iter().enumerate() {
                if a {
                    v[i] = 0.0;
                }
            }
        };

        // CG on the (m + m') system, split into y and w blocks.
        let mut dy = DVector::zeros(m);
        let mut dw = DVector::zeros(mp);
        let mut ry = -&e.g_y;
        mask(&mut ry);
        let mut rw = -&e.g_w;
        let rhs_norm = (ry.norm_squared() + rw.norm_squared()).sqrt();
        if rhs_norm == 0.0 {
            return (dy, dw);
        }
        let mut py = ry.clone();
        let mut pw = rw.clone();
        let mut rr = rhs_norm * rhs_norm;
        let iter_cap = 2 * (m + mp) + 20;
        for _ in 0..iter_cap {
            let (mut apy, apw) = self.newton_apply(&e.decomp, &py, &pw, reg);
            mask(&mut apy);
            let pap = py.dot(&apy) + pw.dot(&apw);
            if pap <= 0.0 {
                break; // numerically indefinite direction; keep current iterate
            }
            let alpha = rr / pap;
            dy.axpy(alpha, &py, 1.0);
            dw.axpy(alpha, &pw, 1.0);
            ry.axpy(-alpha, &apy, 1.0);
            rw.axpy(-alpha, &apw, 1.0);
            let rr_new = ry.norm_squared() + rw.norm_squared();
            if rr_new.sqrt() <= target * rhs_norm {
                break;
            }
            let beta = rr_new / rr;
            py = &ry + py.scale(beta);
            pw = &rw + pw.scale(beta);
            rr = rr_new;
        }
        (dy, dw)
    }
}

/// Exact Euclidean distance of 0 to `grad + N_Q(y) x {0}`: equality rows
/// contribute `|g_i|`; inequality rows contribute `|g_i|` when `y_i > 0`
/// and `|min(g_i, 0)|` when `y_i = 0`.
pub fn stationarity_distance(
    cone: &ConeSpec,
    y: &DVector<f64>,
    g_y: &DVector<f64>,
    g_w: &DVector<f64>,
) -> Result<f64> {
    if !cone.contains(y) {
        return Err(Error::OutsideCone);
    }
    if g_y.len() != y.len() {
        return Err(Error::DimensionMismatch(
            "gradient length does not match multiplier length".into(),
        ));
    }
    let mut acc = g_w.norm_squared();
    for i in 0..y.len() {
        let g = g_y[i];
        let contrib = match cone.kinds()[i] {
            crate::model::RowKind::Equality => g,
            crate::model::RowKind::InequalityGe => {
                if y[i] > 0.0 {
                    g
                } else {
                    g.min(0.0)
                }
            }
        };
        acc += contrib * contrib;
    }
    Ok(acc.sqrt())
}

/// Minimizes the reduced augmented Lagrangian from `start` until the
/// stationarity distance drops below `tol` or `max_iter` steps are taken.
///
/// Each step solves the semismooth Newton system by conjugate gradients
/// (relative residual `min(0.5, sqrt(stationarity))`), backtracks with an
/// Armijo test on the reduced objective, falls back to a projected
/// gradient step when the Newton direction is not a descent direction,
/// and projects `y` onto Q after every step.
pub fn solve_inner(
    ip: &InnerProblem,
    start: (&DVector<f64>, &DVector<f64>),
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("inner tol = {tol} must be positive")));
    }
    let cone = ip.prob().cone();
    let mut y = cone.project(start.0);
    let mut w = start.1.clone();
    if y.len() != ip.prob().m() || w.len() != ip.prob().m_prime() {
        return Err(Error::DimensionMismatch(
            "inner start point has wrong multiplier lengths".into(),
        ));
    }

    let mut e = ip.eval(&y, &w)?;
    let mut iterations = 0;
    let mut best: Option<(DVector<f64>, DVector<f64>, EvalPoint, f64)> = None;
    loop {
        if !e.obj.is_finite() {
            return Err(Error::InnerDiverged(format!(
                "objective became non-finite at iteration {iterations} \
                 (||y|| = {:.3e}, ||w|| = {:.3e}, ck = {:.3e})",
                y.norm(),
                w.norm(),
                ip.ck()
            )));
        }
        let stat = stationarity_distance(cone, &y, &e.g_y, &e.g_w)?;
        let improved = best.as_ref().is_none_or(|(_, _, _, s)| stat < *s);
        if improved {
            best = Some((y.clone(), w.clone(), e.clone(), stat));
        }
        if stat <= tol {
            return finish_best(best.expect("just set"), iterations, true);
        }
        if iterations >= max_iter {
            return finish_best(best.expect("just set"), iterations, false);
        }

        let (dy, dw) = ip.newton_direction(&y, &e, stat);
        let slope = e.g_y.dot(&dy) + e.g_w.dot(&dw);
        let mut moved = false;
        if slope < 0.0 {
            if let Some((y_new, w_new, e_new)) = line_search(ip, &y, &w, &e, &dy, &dw)? {
                y = y_new;
                w = w_new;
                e = e_new;
                moved = true;
            }
        }
        if !moved {
            let gy = -&e.g_y;
            let gw = -&e.g_w;
            if let Some((y_new, w_new, e_new)) = line_search(ip, &y, &w, &e, &gy, &gw)? {
                y = y_new;
                w = w_new;
                e = e_new;
                moved = true;
            }
        }
        iterations += 1;
        if !moved {
            let (by, bw, be, bs) = best.expect("set before first step");
            let converged = bs <= tol;
            return finish_best((by, bw, be, bs), iterations, converged);
        }
    }
}

/// Projected-arc Armijo backtracking: accepts the first step length whose
/// projected move both points downhill (`<g, z(a) - z> < 0`) and achieves
/// the sufficient decrease `f(z(a)) <= f(z) + 1e-4 <g, z(a) - z>`.
#[allow(clippy::type_complexity)]
fn line_search(
    ip: &InnerProblem,
    y: &DVector<f64>,
    w: &DVector<f64>,
    e: &EvalPoint,
    dy: &DVector<f64>,
    dw: &DVector<f64>,
) -> Result<Option<(DVector<f64>, DVector<f64>, EvalPoint)>> {
    let cone = ip.prob().cone();
    let mut alpha = 1.0;
    while alpha >= MIN_STEP {
        let y_new = cone.project(&(y + dy.scale(alpha)));
        let w_new = w + dw.scale(alpha);
        let pred = e.g_y.dot(&(&y_new - y)) + e.g_w.dot(&(&w_new - w));
        if pred < 0.0 {
            let e_new = ip.eval(&y_new, &w_new)?;
            if e_new.obj <= e.obj + ARMIJO_SLOPE * pred {
                return Ok(Some((y_new, w_new, e_new)));
            }
        }
        alpha *= BACKTRACK_RATIO;
    }
    Ok(None)
}

fn finish_best(
    best: (DVector<f64>, DVector<f64>, EvalPoint, f64),
    iterations: usize,
    converged: bool,
) -> Result<InnerResult> {
    let (y, w, e, stat) = best;
    let s = e.decomp.recompose(|l| (-l).max(0.0));
    Ok(InnerResult {
        y,
        w,
        s,
        xnext: e.xtrial,
        grad_norm_q: stat,
        objective_value: e.obj,
        iterations,
        converged,
    })
}
