//! JSON problem format: parsing, validation with field-level error
//! messages, and conversion to the solver's problem type.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use sdpalm::model::{ConeSpec, LinearOperator, Objective, RowKind, SdpProblem};
use sdpalm::symcone::SymMat;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub objective: ObjectiveFile,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub constraints: Vec<ConstraintFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strictly_feasible: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ObjectiveFile {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "least_squares")]
    LeastSquares {
        #[serde(rename = "F")]
        f: Vec<Vec<Vec<f64>>>,
        d: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: f64,
    pub kind: ConstraintKind,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum ConstraintKind {
    #[serde(rename = "eq")]
    Eq,
    #[serde(rename = "ge")]
    Ge,
}

/// Validates a dense row-major matrix from the file: square of dimension
/// `n`, finite, with asymmetry at most `1e-12 * scale`. Returns the
/// symmetrized matrix.
fn matrix_from_file(field: &str, rows: &[Vec<f64>], n: usize) -> Result<SymMat, String> {
    if rows.len() != n {
        return Err(format!("{field}: has {} rows, expected {n}", rows.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(format!(
                "{field}: row {i} has length {}, expected {n}",
                row.len()
            ));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(format!("{field}: entry ({i}, {j}) is not finite"));
            }
        }
    }
    let scale = rows
        .iter()
        .flatten()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate().take(i) {
            let asym = (v - rows[j][i]).abs();
            if asym > 1e-12 * scale {
                return Err(format!(
                    "{field}: asymmetry {asym:.3e} at ({i}, {j}) exceeds 1e-12 * scale"
                ));
            }
        }
    }
    Ok(SymMat::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
}

#[cfg(test)]
fn matrix_to_rows(m: &SymMat) -> Vec<Vec<f64>> {
    let n = m.dim();
    (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j)).collect())
        .collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, String> {
        serde_json::from_str(text).map_err(|e| format!("problem file: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serialization")
    }

    /// Builds the validated solver problem, naming the offending field in
    /// every rejection message.
    pub fn build(&self) -> Result<SdpProblem, String> {
        let n = self.n;
        if n == 0 {
            return Err("n: must be positive".into());
        }
        let c = matrix_from_file("C", &self.c, n)?;
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut b = Vec::with_capacity(self.constraints.len());
        let mut kinds = Vec::with_capacity(self.constraints.len());
        for (i, con) in self.constraints.iter().enumerate() {
            rows.push(matrix_from_file(&format!("constraints[{i}].A"), &con.a, n)?);
            if !con.b.is_finite() {
                return Err(format!("constraints[{i}].b: not finite"));
            }
            b.push(con.b);
            kinds.push(match con.kind {
                ConstraintKind::Eq => RowKind::Equality,
                ConstraintKind::Ge => RowKind::InequalityGe,
            });
        }
        let a_op = LinearOperator::new(n, rows).map_err(|e| format!("constraints: {e}"))?;
        let objective = match &self.objective {
            ObjectiveFile::Linear => Objective::Linear,
            ObjectiveFile::LeastSquares { f, d } => {
                let mut f_rows = Vec::with_capacity(f.len());
                for (i, mat) in f.iter().enumerate() {
                    f_rows.push(matrix_from_file(&format!("objective.F[{i}]"), mat, n)?);
                }
                if d.len() != f.len() {
                    return Err(format!(
                        "objective.d: has length {}, expected {} (one per F row)",
                        d.len(),
                        f.len()
                    ));
                }
                Objective::LeastSquares {
                    f: LinearOperator::new(n, f_rows).map_err(|e| format!("objective.F: {e}"))?,
                    d: DVector::from_vec(d.clone()),
                }
            }
        };
        let strictly_feasible = match &self.strictly_feasible {
            None => None,
            Some(rows) => Some(matrix_from_file("strictly_feasible", rows, n)?),
        };
        SdpProblem::new(c, a_op, DVector::from_vec(b), ConeSpec::new(kinds), objective, strictly_feasible)
            .map_err(|e| format!("problem validation: {e}"))
    }

    /// File representation of an in-memory problem; pins the shipped
    /// fixture files to the built-in fixtures.
    #[cfg(test)]
    pub fn from_problem(prob: &SdpProblem) -> ProblemFile {
        let constraints = prob
            .a_op()
            .rows()
            .iter()
            .zip(prob.cone().kinds())
            .zip(prob.b().iter())
            .map(|((a, kind), b)| ConstraintFile {
                a: matrix_to_rows(a),
                b: *b,
                kind: match kind {
                    RowKind::Equality => ConstraintKind::Eq,
                    RowKind::InequalityGe => ConstraintKind::Ge,
                },
            })
            .collect();
        let objective = match prob.objective() {
            Objective::Linear => ObjectiveFile::Linear,
            Objective::LeastSquares { f, d } => ObjectiveFile::LeastSquares {
                f: f.rows().iter().map(matrix_to_rows).collect(),
                d: d.iter().cloned().collect(),
            },
        };
        ProblemFile {
            n: prob.n(),
            objective,
            c: matrix_to_rows(prob.c()),
            constraints,
            strictly_feasible: prob.strictly_feasible().map(matrix_to_rows),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "n": 2,
        "objective": {"kind": "linear"},
        "C": [[0.0, 0.0], [0.0, 1.0]],
        "constraints": [{"A": [[0.0, 1.0], [1.0, -1.0]], "b": 0.0, "kind": "eq"}],
        "strictly_feasible": [[5.0, 1.0], [1.0, 2.0]]
    }"#;

    #[test]
    fn parses_and_builds() {
        let pf = ProblemFile::parse(EXAMPLE).unwrap();
        let prob = pf.build().unwrap();
        assert_eq!(prob.n(), 2);
        assert_eq!(prob.m(), 1);
        assert!(prob.strictly_feasible().is_some());
    }

    #[test]
    fn rejects_asymmetry_naming_field() {
        let bad = EXAMPLE.replace("[[0.0, 1.0], [1.0, -1.0]]", "[[0.0, 1.0], [0.5, -1.0]]");
        let pf = ProblemFile::parse(&bad).unwrap();
        let err = pf.build().unwrap_err();
        assert!(err.contains("constraints[0].A"), "message: {err}");
        assert!(err.contains("asymmetry"), "message: {err}");
    }

    #[test]
    fn rejects_wrong_dimensions_naming_field() {
        let bad = EXAMPLE.replace("\"C\": [[0.0, 0.0], [0.0, 1.0]]", "\"C\": [[0.0], [0.0]]");
        let pf = ProblemFile::parse(&bad).unwrap();
        let err = pf.build().unwrap_err();
        assert!(err.starts_with("C:"), "message: {err}");
    }

    #[test]
    fn round_trip_is_stable() {
        let pf = ProblemFile::parse(EXAMPLE).unwrap();
        let first = pf.to_json();
        let second = ProblemFile::parse(&first).unwrap().to_json();
        assert_eq!(first, second);
    }

    #[test]
    fn shipped_fixtures_match_builtin_problems() {
        for (file, prob) in [
            ("example31.json", sdpalm::fixtures::example31_problem()),
            ("example32.json", sdpalm::fixtures::example32_problem()),
        ] {
            let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("fixtures")
                .join(file);
            let shipped = std::fs::read_to_string(path).unwrap();
            let shipped_json = ProblemFile::parse(&shipped).unwrap().to_json();
            let built_json = ProblemFile::from_problem(&prob).to_json();
            assert_eq!(shipped_json, built_json, "{file} drifted from the fixture");
        }
    }
}
