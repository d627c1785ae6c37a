//! Built-in problem instances used by demos, diagnostics and tests.

use nalgebra::DVector;

use crate::model::{ConeSpec, LinearOperator, Objective, RowKind, SdpProblem};
use crate::symcone::SymMat;

/// Linear SDP on S^2 with multiple primal solutions:
///
/// ```text
/// min X_22   s.t.  2 X_12 - X_22 = 0,  X PSD
/// ```
///
/// The primal solution set is `{diag(t, 0) : t >= 0}`; the dual solution is
/// the singleton `(y, S) = (0, diag(0, 1))`. Ships with the strictly
/// feasible interior point `[[5, 1], [1, 2]]`.
pub fn example31_problem() -> SdpProblem {
    let c = SymMat::from_diag(&[0.0, 1.0]);
    let row = SymMat::from_rows_2x2(0.0, 1.0, -1.0);
    let a = LinearOperator::new(2, vec![row]).expect("fixture operator");
    SdpProblem::new(
        c,
        a,
        DVector::from_vec(vec![0.0]),
        ConeSpec::all_equality(1),
        Objective::Linear,
        Some(example31_xhat()),
    )
    .expect("fixture problem")
}

/// Strictly feasible interior point for [`example31_problem`].
pub fn example31_xhat() -> SymMat {
    SymMat::from_rows_2x2(5.0, 1.0, 2.0)
}

/// The unique dual solution `(y, S)` of [`example31_problem`].
pub fn example31_dual_solution() -> (f64, SymMat) {
    (0.0, SymMat::from_diag(&[0.0, 1.0]))
}

/// Coupling matrix of the inequality constraint in [`example32_problem`],
/// in the original orientation `<A, X> <= 1`.
pub fn example32_constraint_matrix() -> SymMat {
    SymMat::from_rows_2x2(1.0, -2.0, 1.0)
}

/// Convex least-squares SDP on S^2 with a non-singleton primal solution set:
///
/// ```text
/// min 0.5 (<I, X> - 1)^2   s.t.  <A, X> <= 1,  X PSD
/// ```
///
/// with `A = [[1, -2], [-2, 1]]`. Stored in `>=` row orientation as
/// `<-A, X> >= -1`. The dual solution is the singleton `(y, w, S) = (0, 0, 0)`;
/// the primal solution set is `{X PSD : tr X = 1, <A, X> <= 1}`.
pub fn example32_problem() -> SdpProblem {
    let c = SymMat::zeros(2);
    let row = example32_constraint_matrix().scaled(-1.0);
    let a = LinearOperator::new(2, vec![row]).expect("fixture operator");
    let f = LinearOperator::new(2, vec![SymMat::identity(2)]).expect("fixture operator");
    SdpProblem::new(
        c,
        a,
        DVector::from_vec(vec![-1.0]),
        ConeSpec::new(vec![RowKind::InequalityGe]),
        Objective::LeastSquares {
            f,
            d: DVector::from_vec(vec![1.0]),
        },
        None,
    )
    .expect("fixture problem")
}

/// Small trace-constrained linear SDP:
///
/// ```text
/// min <diag(1, 2), X>   s.t.  tr X = 1,  X PSD
/// ```
///
/// with strictly feasible point `I/2`. Optimal solution `diag(1, 0)` with
/// value 1.
pub fn trace_problem() -> SdpProblem {
    trace_problem_with_xhat(SymMat::identity(2).scaled(0.5))
}

/// [`trace_problem`] with a caller-supplied strictly feasible point.
pub fn trace_problem_with_xhat(xhat: SymMat) -> SdpProblem {
    let a = LinearOperator::new(2, vec![SymMat::identity(2)]).expect("fixture operator");
    let b = DVector::from_vec(vec![xhat.trace()]);
    SdpProblem::new(
        SymMat::from_diag(&[1.0, 2.0]),
        a,
        b,
        ConeSpec::all_equality(1),
        Objective::Linear,
        Some(xhat),
    )
    .expect("fixture problem")
}
