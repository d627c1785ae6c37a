//! Convergence-rate measurement and validation: a scalar proximal-point
//! harness with exact resolvents, Fejér-monotonicity checks, distance
//! oracles for the built-in fixtures, rank/complementarity reports, and
//! per-iteration rate tables comparing empirical contraction factors with
//! the predicted ones.

use nalgebra::{DMatrix, DVector};

use crate::alm::{tau_k, theta_k_predicted, AlmState, ConvergenceRecord};
use crate::model::LinearOperator;
use crate::symcone::{eig_sym, project_psd, SymMat};
use crate::{Error, Result};

type ProjectionFn<'a> = &'a dyn Fn(&SymMat) -> Result<SymMat>;

/// Exact resolvent `(I + c T)^{-1}` of a maximal monotone operator on the
/// real line, for harness experiments.
pub trait Resolvent {
    fn resolve(&self, c: f64, x: f64) -> f64;
}

/// `T = d|.|`: the resolvent is soft-thresholding by `c`.
pub struct AbsSubdifferential;

impl Resolvent for AbsSubdifferential {
    fn resolve(&self, c: f64, x: f64) -> f64 {
        x.signum() * (x.abs() - c).max(0.0)
    }
}

/// `T = I`: the resolvent is `x / (1 + c)`.
pub struct IdentityOperator;

impl Resolvent for IdentityOperator {
    fn resolve(&self, c: f64, x: f64) -> f64 {
        x / (1.0 + c)
    }
}

/// `T = N_{[lo, hi]}`: the resolvent is the projection onto the interval.
pub struct IntervalNormalCone {
    pub lo: f64,
    pub hi: f64,
}

impl Resolvent for IntervalNormalCone {
    fn resolve(&self, _c: f64, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Log of a proximal-point run: iterates, injected errors, and whether the
/// absolute and relative error criteria held at each step.
#[derive(Clone, Debug)]
pub struct PpaLog {
    /// `xi^0, ..., xi^K`.
    pub iterates: Vec<f64>,
    /// `e^1, ..., e^K` (difference between the exact resolvent and the
    /// accepted iterate).
    pub errors: Vec<f64>,
    /// `|e^{k+1}| <= eps_k` per step.
    pub crit_a: Vec<bool>,
    /// `|e^{k+1}| <= eta_k |xi^{k+1} - xi^k|` per step.
    pub crit_b: Vec<bool>,
}

/// Runs the proximal-point iteration with exact resolvents and an optional
/// injected error per step: `xi^{k+1} = resolvent(c_k, xi^k) - e^{k+1}`.
pub fn ppa_run(
    resolvent: &dyn Resolvent,
    x0: f64,
    cs: &[f64],
    eps: &[f64],
    eta: &[f64],
    error_injector: Option<&dyn Fn(usize) -> f64>,
) -> PpaLog {
    assert_eq!(cs.len(), eps.len());
    assert_eq!(cs.len(), eta.len());
    let mut log = PpaLog {
        iterates: vec![x0],
        errors: Vec::new(),
        crit_a: Vec::new(),
        crit_b: Vec::new(),
    };
    let mut x = x0;
    for (k, &c) in cs.iter().enumerate() {
        let exact = resolvent.resolve(c, x);
        let e = error_injector.map_or(0.0, |f| f(k));
        let next = exact - e;
        log.errors.push(e);
        log.crit_a.push(e.abs() <= eps[k]);
        log.crit_b.push(e.abs() <= eta[k] * (next - x).abs());
        log.iterates.push(next);
        x = next;
    }
    log
}

/// Worst violation of the Fejér inequality
/// `||xi^{k+1} + e^{k+1} - xbar||^2 <= ||xi^k - xbar||^2 - ||xi^{k+1} + e^{k+1} - xi^k||^2`
/// over the run; nonpositive means the inequality held everywhere.
pub fn fejer_check(points: &[DVector<f64>], errors: &[DVector<f64>], xbar: &DVector<f64>) -> f64 {
    assert!(points.len() == errors.len() + 1, "need K+1 points for K errors");
    let mut worst = f64::NEG_INFINITY;
    for k in 0..errors.len() {
        let corrected = &points[k + 1] + &errors[k];
        let lhs = (&corrected - xbar).norm_squared();
        let rhs = (&points[k] - xbar).norm_squared() - (&corrected - &points[k]).norm_squared();
        worst = worst.max(lhs - rhs);
    }
    worst
}

/// [`fejer_check`] over a scalar PPA log.
pub fn fejer_check_scalar(log: &PpaLog, xbar: f64) -> f64 {
    let points: Vec<DVector<f64>> = log
        .iterates
        .iter()
        .map(|&v| DVector::from_vec(vec![v]))
        .collect();
    let errors: Vec<DVector<f64>> = log
        .errors
        .iter()
        .map(|&v| DVector::from_vec(vec![v]))
        .collect();
    fejer_check(&points, &errors, &DVector::from_vec(vec![xbar]))
}

/// [`fejer_check`] over matrix sequences via isometric vectorization.
pub fn fejer_check_mats(points: &[SymMat], errors: &[SymMat], xbar: &SymMat) -> f64 {
    let pts: Vec<DVector<f64>> = points.iter().map(|m| m.svec()).collect();
    let errs: Vec<DVector<f64>> = errors.iter().map(|m| m.svec()).collect();
    fejer_check(&pts, &errs, &xbar.svec())
}

/// Distance of a 2x2 matrix to `{diag(t, 0) : t >= 0}`, the primal solution
/// set of the first fixture: `sqrt(2 X_12^2 + X_22^2 + min(X_11, 0)^2)`.
pub fn dist_example31(x: &SymMat) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch(
            "example31 distance needs a 2x2 matrix".into(),
        ));
    }
    let x12 = x.get(1, 0);
    let x22 = x.get(1, 1);
    let neg = x.get(0, 0).min(0.0);
    Ok((2.0 * x12 * x12 + x22 * x22 + neg * neg).sqrt())
}

/// Distance of a 2x2 matrix to the second fixture's primal solution set
/// `{X PSD : tr X = 1, <A, X> <= 1}`, computed by Dykstra-corrected
/// alternating projections among the hyperplane, the halfspace and the
/// cone (tolerance 1e-12, capped at 1e5 sweeps).
pub fn dist_example32(x: &SymMat) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch(
            "example32 distance needs a 2x2 matrix".into(),
        ));
    }
    let a = crate::fixtures::example32_constraint_matrix();
    let a_norm_sq = a.norm_sq();
    let identity = SymMat::identity(2);

    let proj_trace = |m: &SymMat| -> Result<SymMat> {
        let mut out = m.clone();
        out.axpy(-(m.trace() - 1.0) / 2.0, &identity);
        Ok(out)
    };
    let proj_halfspace = |m: &SymMat| -> Result<SymMat> {
        let v = a.inner(m);
        let mut out = m.clone();
        if v > 1.0 {
            out.axpy(-(v - 1.0) / a_norm_sq, &a);
        }
        Ok(out)
    };
    let proj_psd_set = |m: &SymMat| -> Result<SymMat> { Ok(project_psd(m)?.0) };

    let projections: [ProjectionFn; 3] = [&proj_trace, &proj_halfspace, &proj_psd_set];
    let projected = dykstra(x, &projections, 1e-12, 100_000)?;
    Ok((x - &projected).norm())
}

/// Dykstra's alternating projection scheme over an arbitrary list of
/// projections; stops when the summed squared change of the correction
/// terms over a sweep drops below `tol^2`.
fn dykstra(
    x0: &SymMat,
    projections: &[ProjectionFn],
    tol: f64,
    max_sweeps: usize,
) -> Result<SymMat> {
    let n = x0.dim();
    let mut x = x0.clone();
    let mut corrections = vec![SymMat::zeros(n); projections.len()];
    let mut last_change = f64::INFINITY;
    for _ in 0..max_sweeps {
        let mut change = 0.0;
        for (proj, corr) in projections.iter().zip(corrections.iter_mut()) {
            let shifted = &x + corr;
            let projected = proj(&shifted)?;
            let new_corr = &shifted - &projected;
            change += (&new_corr - corr).norm_sq();
            *corr = new_corr;
            x = projected;
        }
        if change.sqrt() <= tol {
            return Ok(x);
        }
        last_change = change.sqrt();
    }
    Err(Error::ProjectionStalled {
        max_iter: max_sweeps,
        last_change,
    })
}

/// Projection of `x` onto `{X PSD : A X = b}` by Dykstra between the affine
/// set and the cone. Returns the projected point and the distance.
pub fn dykstra_affine_psd(
    a: &LinearOperator,
    b: &DVector<f64>,
    x: &SymMat,
    tol: f64,
    max_sweeps: usize,
) -> Result<(SymMat, f64)> {
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch(
            "rhs length does not match the operator".into(),
        ));
    }
    // pseudo-inverse of the Gram matrix A A* handles dependent rows
    let m = a.n_rows();
    let gram = DMatrix::from_fn(m, m, |i, j| a.rows()[i].inner(&a.rows()[j]));
    let svd = nalgebra::linalg::SVD::new(gram, true, true);
    let gram_pinv = svd.pseudo_inverse(1e-12).map_err(|e| {
        Error::InvalidProblem(format!("gram pseudo-inverse failed: {e}"))
    })?;

    let proj_affine = |mat: &SymMat| -> Result<SymMat> {
        let r = a.apply(mat) - b;
        let coeff = &gram_pinv * r;
        let mut out = mat.clone();
        out.axpy(-1.0, &a.adjoint(&coeff));
        Ok(out)
    };
    let proj_cone = |mat: &SymMat| -> Result<SymMat> { Ok(project_psd(mat)?.0) };
    let projections: [ProjectionFn; 2] = [&proj_affine, &proj_cone];
    let projected = dykstra(x, &projections, tol, max_sweeps)?;
    let dist = (x - &projected).norm();
    Ok((projected, dist))
}

/// One row of the subregularity-failure table for the first fixture.
#[derive(Clone, Copy, Debug)]
pub struct PerturbationRow {
    pub eps: f64,
    /// `||(u, V)||` computed from the constructed perturbation.
    pub perturbation_norm: f64,
    /// Closed form `2 sqrt(2) eps`.
    pub expected_perturbation_norm: f64,
    /// Largest residual over the three blocks of the perturbed KKT system.
    pub max_system_residual: f64,
    /// Distance of X(eps) to the primal solution set.
    pub primal_dist: f64,
    /// Closed form `sqrt(6) eps`.
    pub expected_primal_dist: f64,
    /// Exact distance of (y(eps), S(eps)) to the singleton dual solution.
    pub dual_dist: f64,
    /// Lower bound `2 sqrt(eps)`.
    pub dual_dist_lower: f64,
    /// `dual_dist / perturbation_norm`; grows without bound as eps -> 0.
    pub amplification: f64,
}

/// Builds the perturbed KKT triples
/// `(y, S, X)(eps) = (sqrt(eps), [[eps, -sqrt(eps)], [-sqrt(eps), 1+sqrt(eps)]], [[eps, eps], [eps, 2 eps]])`
/// for the first fixture, verifies blockwise that each solves the KKT
/// system perturbed by `u = (0, X(eps))`, `V = diag(-eps, 0)`, and tabulates
/// the primal/dual distances demonstrating that the dual distance is not
/// controlled by the perturbation size.
pub fn example31_perturbation_demo(eps_list: &[f64]) -> Result<Vec<PerturbationRow>> {
    let prob = crate::fixtures::example31_problem();
    let (_, sbar) = crate::fixtures::example31_dual_solution();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps = {eps} must be positive")));
        }
        let se = eps.sqrt();
        let y = DVector::from_vec(vec![se]);
        let s = SymMat::from_rows_2x2(eps, -se, 1.0 + se);
        let x = SymMat::from_rows_2x2(eps, eps, 2.0 * eps);
        let u_mat = x.clone();
        let v_mat = SymMat::from_diag(&[-eps, 0.0]);

        // block 1: A X - b = u_1 with u_1 = 0 (equality row)
        let r_primal = (prob.a_op().apply(&x) - prob.b()).norm();
        // block 3: U in X + N_PSD(S), i.e. S PSD and complementary to X - U
        let (proj, _) = project_psd(&(&s - &(&x - &u_mat)))?;
        let r_cone = (&s - &proj).norm();
        // block 4: C - A* y - S = V
        let mut r4 = prob.c().clone();
        r4.axpy(-1.0, &prob.a_op().adjoint(&y));
        r4.axpy(-1.0, &s);
        r4.axpy(-1.0, &v_mat);
        let r_dual = r4.norm();
        let max_system_residual = r_primal.max(r_cone).max(r_dual);

        let perturbation_norm = (u_mat.norm_sq() + v_mat.norm_sq()).sqrt();
        let dual_dist = (y.norm_squared() + (&s - &sbar).norm_sq()).sqrt();
        rows.push(PerturbationRow {
            eps,
            perturbation_norm,
            expected_perturbation_norm: 2.0 * 2f64.sqrt() * eps,
            max_system_residual,
            primal_dist: dist_example31(&x)?,
            expected_primal_dist: 6f64.sqrt() * eps,
            dual_dist,
            dual_dist_lower: 2.0 * se,
            amplification: dual_dist / perturbation_norm,
        });
    }
    Ok(rows)
}

/// Rank and strict-complementarity report for a complementary pair.
#[derive(Clone, Copy, Debug)]
pub struct RankReport {
    pub rank_x: usize,
    pub rank_s: usize,
    /// `n - rank_x - rank_s`, clipped at zero.
    pub beta_size: usize,
    /// `rank(S) >= n - 1`.
    pub cond_i: bool,
    /// `rank(X) + rank(S) = n` (partial strict complementarity).
    pub cond_ii: bool,
    /// False when `<X, S>` exceeds the complementarity tolerance; the
    /// report is then only indicative.
    pub complementary: bool,
}

/// Counts eigenvalue ranks of `x` and `s` with tolerance `eigtol` and
/// evaluates the two sufficient rank conditions for subregularity of the
/// primal solution map.
pub fn rank_conditions(x: &SymMat, s: &SymMat, eigtol: f64) -> Result<RankReport> {
    if x.dim() != s.dim() {
        return Err(Error::DimensionMismatch(
            "rank report needs matrices of equal dimension".into(),
        ));
    }
    let n = x.dim();
    let rank_of = |m: &SymMat| -> Result<usize> {
        Ok(eig_sym(m)?
            .eigenvalues
            .iter()
            .filter(|&&l| l > eigtol)
            .count())
    };
    let rank_x = rank_of(x)?;
    let rank_s = rank_of(s)?;
    let complementary = x.inner(s).abs() <= eigtol * x.norm() * s.norm();
    Ok(RankReport {
        rank_x,
        rank_s,
        beta_size: n.saturating_sub(rank_x + rank_s),
        cond_i: rank_s + 1 >= n,
        cond_ii: rank_x + rank_s == n,
        complementary,
    })
}

type DistFn = Box<dyn Fn(&SymMat) -> Result<f64> + Send + Sync>;
type DualDistFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>, &SymMat) -> f64 + Send + Sync>;

/// Exact distance functions to the documented solution sets of a fixture.
pub struct SolutionSetOracle {
    pub tag: &'static str,
    dist: DistFn,
    dual_dist: Option<DualDistFn>,
}

impl SolutionSetOracle {
    pub fn example31() -> Self {
        SolutionSetOracle {
            tag: "example31",
            dist: Box::new(dist_example31),
            dual_dist: Some(Box::new(|y, _w, s| {
                let (_, sbar) = crate::fixtures::example31_dual_solution();
                (y.norm_squared() + (s - &sbar).norm_sq()).sqrt()
            })),
        }
    }

    pub fn example32() -> Self {
        SolutionSetOracle {
            tag: "example32",
            dist: Box::new(dist_example32),
            dual_dist: Some(Box::new(|y, w, s| {
                (y.norm_squared() + w.norm_squared() + s.norm_sq()).sqrt()
            })),
        }
    }

    pub fn distance(&self, x: &SymMat) -> Result<f64> {
        (self.dist)(x)
    }

    pub fn dual_distance(&self, y: &DVector<f64>, w: &DVector<f64>, s: &SymMat) -> Option<f64> {
        self.dual_dist.as_ref().map(|f| f(y, w, s))
    }
}

/// Fills `dist_est` in the run history from the recorded X iterates and
/// returns the distance of the start point. Needs a run made with
/// `keep_iterates`.
pub fn attach_distances(state: &mut AlmState, oracle: &SolutionSetOracle) -> Result<f64> {
    if state.x_iterates.len() != state.history.len() + 1 {
        return Err(Error::InvalidConfig(
            "attach_distances needs a run recorded with keep_iterates".into(),
        ));
    }
    for i in 0..state.history.len() {
        state.history[i].dist_est = Some(oracle.distance(&state.x_iterates[i + 1])?);
    }
    oracle.distance(&state.x_iterates[0])
}

/// One measured contraction step.
#[derive(Clone, Copy, Debug)]
pub struct RateRow {
    /// Outer iteration index of the step producing the ratio.
    pub k: usize,
    /// `dist_{k+1} / dist_k`.
    pub ratio: f64,
    /// Penalty value of the step.
    pub ck: f64,
    /// Step-proportional tolerance value of the step.
    pub eta_k: f64,
    /// `theta_k` from the hypothesized modulus, when given.
    pub theta_pred: Option<f64>,
    /// `dual_infeas_k / (tau_k dist_k)`; at most ~1 once the linear rate is
    /// active.
    pub feas_ratio: Option<f64>,
}

/// Rate table with the back-solved empirical modulus and verdicts.
#[derive(Clone, Debug)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Index into `rows` of the first ratio below 1 (start of the tail).
    pub tail_start: Option<usize>,
    /// Smallest modulus making every tail ratio satisfy the predicted
    /// bound; `None` when there is no tail or no finite modulus works.
    pub kappa_empirical: Option<f64>,
    /// True when some tail ratio exceeds the bound for every finite kappa.
    pub kappa_unbounded: bool,
    /// With a hypothesized kappa: all tail ratios within 1.05x of the
    /// predicted theta.
    pub verdict: Option<bool>,
    /// Tail ratios nonincreasing and ending below 0.1.
    pub superlinear_signature: bool,
}

/// Builds the rate table from run records carrying `dist_est`.
///
/// `dist0` supplies the distance of the start iterate when known, which
/// adds the first step's ratio. Ratios stop once the distance falls below
/// the resolution of the run: 10 machine epsilons of the problem scale, or
/// the best KKT residual the run achieved, whichever is larger. Distances
/// below that are indistinguishable from solver noise.
pub fn rate_report(
    records: &[ConvergenceRecord],
    dist0: Option<f64>,
    kappa_guess: Option<f64>,
) -> RateReport {
    // (distance before step, record of the step) pairs
    let mut steps: Vec<(f64, &ConvergenceRecord)> = Vec::new();
    if let Some(d0) = dist0 {
        if let Some(first) = records.first() {
            steps.push((d0, first));
        }
    }
    for pair in records.windows(2) {
        if let Some(d) = pair[0].dist_est {
            steps.push((d, &pair[1]));
        }
    }

    let scale = 1.0 + steps.first().map_or(0.0, |(d, _)| *d);
    let best_kkt = records
        .iter()
        .map(|r| r.kkt_norm)
        .fold(f64::INFINITY, f64::min);
    let floor = (10.0 * f64::EPSILON * scale).max(if best_kkt.is_finite() {
        best_kkt
    } else {
        0.0
    });
    let mut rows = Vec::new();
    for (prev, rec) in steps {
        let next = match rec.dist_est {
            Some(d) => d,
            None => break,
        };
        if prev <= floor {
            break;
        }
        let ratio = next / prev;
        let theta_pred = kappa_guess
            .filter(|_| rec.eta_k < 1.0)
            .map(|kappa| theta_k_predicted(kappa, rec.ck, rec.eta_k));
        let feas_ratio = if rec.eta_k < 1.0 && prev > 0.0 {
            Some(rec.dual_infeas / (tau_k(rec.ck, rec.eta_k) * prev))
        } else {
            None
        };
        rows.push(RateRow {
            k: rec.k,
            ratio,
            ck: rec.ck,
            eta_k: rec.eta_k,
            theta_pred,
            feas_ratio,
        });
    }

    let tail_start = rows.iter().position(|r| r.ratio < 1.0);
    let tail = tail_start.map(|i| &rows[i..]).unwrap_or(&[]);

    // back-solve kappa from ratio <= (kappa/sqrt(kappa^2 + c^2) + 2 eta) / (1 - eta)
    let mut kappa_emp: f64 = 0.0;
    let mut kappa_unbounded = false;
    for row in tail {
        let v = row.ratio * (1.0 - row.eta_k) - 2.0 * row.eta_k;
        if v <= 0.0 {
            continue;
        }
        if v >= 1.0 {
            kappa_unbounded = true;
            break;
        }
        kappa_emp = kappa_emp.max(row.ck * v / (1.0 - v * v).sqrt());
    }
    let kappa_empirical = if tail.is_empty() || kappa_unbounded {
        None
    } else {
        Some(kappa_emp)
    };

    let verdict = kappa_guess.map(|_| {
        !tail.is_empty()
            && tail
                .iter()
                .all(|r| r.theta_pred.is_some_and(|t| r.ratio <= 1.05 * t))
    });

    let superlinear_signature = !tail.is_empty()
        && tail
            .windows(2)
            .all(|w| w[1].ratio <= w[0].ratio + 1e-12)
        && tail.last().is_some_and(|r| r.ratio < 0.1);

    RateReport {
        rows,
        tail_start,
        kappa_empirical,
        kappa_unbounded,
        verdict,
        superlinear_signature,
    }
}
