//! Command-line front end: problem ingestion, run orchestration, and
//! machine-readable convergence output.

mod problem_file;
mod records;
mod sdpa;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdpalm::alm::{alm_run, AlmConfig, AlmState, CriterionMode, StopReason};
use sdpalm::diagnostics::{
    attach_distances, example31_perturbation_demo, rank_conditions, rate_report, RateReport,
    SolutionSetOracle,
};
use sdpalm::fixtures;
use sdpalm::model::SdpProblem;
use sdpalm::symcone::{default_eigtol, SymMat};

use problem_file::ProblemFile;

#[derive(Parser)]
#[command(
    name = "sdpalm",
    about = "Augmented Lagrangian solver for linear and least-squares SDPs, \
             with convergence-rate diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem given as a JSON file.
    Solve(SolveArgs),
    /// Rate/rank diagnostics for a finished run (re-runs the solve to
    /// recover the final iterate).
    Diagnose(DiagnoseArgs),
    /// Run a built-in fixture end to end.
    Demo(DemoArgs),
    /// Convert an SDPA sparse (.dat-s) linear SDP to the JSON format.
    ImportSdpa(ImportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeFlag {
    /// Implementable gap criteria (needs a strictly feasible point).
    Implementable,
    /// Gap criteria certified by a high-accuracy oracle solve.
    BprimeOracle,
    /// Stationarity-versus-step criterion only.
    BppOnly,
}

impl From<ModeFlag> for CriterionMode {
    fn from(m: ModeFlag) -> Self {
        match m {
            ModeFlag::Implementable => CriterionMode::Implementable,
            ModeFlag::BprimeOracle => CriterionMode::Rockafellar,
            ModeFlag::BppOnly => CriterionMode::BppOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleFlag {
    Example31,
    Example32,
}

impl OracleFlag {
    fn oracle(self) -> SolutionSetOracle {
        match self {
            OracleFlag::Example31 => SolutionSetOracle::example31(),
            OracleFlag::Example32 => SolutionSetOracle::example32(),
        }
    }
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Initial penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// Multiplicative penalty growth per outer iteration.
    #[arg(long = "c-growth", default_value_t = 2.0)]
    c_growth: f64,
    /// Penalty cap ("inf" allowed).
    #[arg(long = "c-max", default_value_t = 1e6)]
    c_max: f64,
    /// Inner stopping-criteria regime.
    #[arg(long, value_enum, default_value_t = ModeFlag::Implementable)]
    mode: ModeFlag,
    /// Outer stop tolerance on the KKT residual norm.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Outer iteration cap.
    #[arg(long = "max-outer", default_value_t = 100)]
    max_outer: usize,
    /// Seed echoed into the summary (runs are deterministic).
    #[arg(long)]
    seed: Option<u64>,
    /// Start point: "zero", "xhat", or "file:PATH" (JSON dense matrix).
    #[arg(long)]
    x0: Option<String>,
    /// Attach exact solution-set distances for a built-in fixture.
    #[arg(long = "fixture-oracle", value_enum)]
    fixture_oracle: Option<OracleFlag>,
}

impl SolverFlags {
    fn config(&self) -> AlmConfig {
        AlmConfig {
            c0: self.c0,
            c_growth: self.c_growth,
            c_max: self.c_max,
            mode: self.mode.into(),
            max_outer: self.max_outer,
            kkt_stop_tol: self.tol,
            keep_iterates: true,
            ..Default::default()
        }
    }

    fn config_echo(&self) -> serde_json::Value {
        serde_json::json!({
            "c0": self.c0,
            "c_growth": self.c_growth,
            "c_max": self.c_max,
            "mode": format!("{:?}", CriterionMode::from(self.mode)),
            "tol": self.tol,
            "max_outer": self.max_outer,
            "seed": self.seed,
            "x0": self.x0.clone().unwrap_or_else(|| "default".into()),
        })
    }

    fn start_point(&self, prob: &SdpProblem) -> Result<SymMat, String> {
        match self.x0.as_deref() {
            None => Ok(default_start(prob, self.mode.into())),
            Some("zero") => Ok(SymMat::zeros(prob.n())),
            Some("xhat") => prob.strictly_feasible().cloned().ok_or_else(|| {
                "x0 = xhat requested but the problem has no strictly_feasible point".into()
            }),
            Some(other) => {
                let path = other.strip_prefix("file:").ok_or_else(|| {
                    format!("x0: expected zero, xhat or file:PATH, got {other:?}")
                })?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("x0 file {path}: {e}"))?;
                let rows: Vec<Vec<f64>> =
                    serde_json::from_str(&text).map_err(|e| format!("x0 file {path}: {e}"))?;
                if rows.len() != prob.n() || rows.iter().any(|r| r.len() != prob.n()) {
                    return Err(format!("x0 file {path}: expected a {0}x{0} matrix", prob.n()));
                }
                Ok(SymMat::from_fn(prob.n(), |i, j| {
                    0.5 * (rows[i][j] + rows[j][i])
                }))
            }
        }
    }
}

/// Implementable mode starts from the strictly feasible point when one is
/// recorded; everything else starts from the zero matrix.
fn default_start(prob: &SdpProblem, mode: CriterionMode) -> SymMat {
    if mode == CriterionMode::Implementable {
        if let Some(xhat) = prob.strictly_feasible() {
            return xhat.clone();
        }
    }
    SymMat::zeros(prob.n())
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON file.
    problem: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Write the per-iteration CSV here.
    #[arg(long = "out-csv")]
    out_csv: Option<PathBuf>,
    /// Write the JSON summary here (also printed to stdout).
    #[arg(long = "out-json")]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Problem JSON file.
    problem: PathBuf,
    /// Run CSV produced by `solve`.
    run_csv: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Hypothesized subregularity modulus for the rate verdict.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args)]
struct DemoArgs {
    /// One of: example31, example32, perturbation.
    name: String,
}

#[derive(Args)]
struct ImportArgs {
    /// SDPA sparse input file.
    input: PathBuf,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Diagnose(args) => cmd_diagnose(&args),
        Command::Demo(args) => cmd_demo(&args.name),
        Command::ImportSdpa(args) => cmd_import(&args),
    };
    match code {
        Ok(code) => std::process::exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}

fn load_problem(path: &PathBuf) -> Result<SdpProblem, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ProblemFile::parse(&text)?.build()
}

fn run_solver(
    prob: &SdpProblem,
    flags: &SolverFlags,
) -> Result<(AlmState, StopReason, Option<f64>), String> {
    let cfg = flags.config();
    let x0 = flags.start_point(prob)?;
    let (mut state, reason) = alm_run(prob, &cfg, &x0).map_err(|e| e.to_string())?;
    let dist0 = match flags.fixture_oracle {
        Some(oracle) => {
            Some(attach_distances(&mut state, &oracle.oracle()).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    Ok((state, reason, dist0))
}

fn exit_code(reason: &StopReason) -> i32 {
    match reason {
        StopReason::KktTol => 0,
        StopReason::MaxOuter => 2,
        StopReason::CriterionUnattainable { .. } => 1,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, String> {
    let prob = load_problem(&args.problem)?;
    let started = Instant::now();
    let (state, reason, _) = run_solver(&prob, &args.flags)?;
    let wall = started.elapsed().as_millis();
    if state.x0_projected {
        eprintln!("note: start point was not positive semidefinite; projected onto the cone");
    }

    if let Some(path) = &args.out_csv {
        std::fs::write(path, records::records_to_csv(&state.history))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let summary = records::summary_json(&reason, &state.history, wall, args.flags.config_echo());
    let pretty = serde_json::to_string_pretty(&summary).expect("summary serialization");
    println!("{pretty}");
    if let Some(path) = &args.out_json {
        std::fs::write(path, &pretty).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let StopReason::CriterionUnattainable { k } = reason {
        eprintln!(
            "error: inner stopping criteria unattainable at outer iteration {k} \
             (inner tolerance exhausted below 1e-14)"
        );
    }
    Ok(exit_code(&reason))
}

fn print_rate_report(rep: &RateReport) {
    println!("k,ratio,theta_pred,feas_ratio");
    for row in &rep.rows {
        let theta = row
            .theta_pred
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_default();
        let feas = row
            .feas_ratio
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_default();
        println!("{},{:.6e},{},{}", row.k, row.ratio, theta, feas);
    }
    match rep.kappa_empirical {
        Some(k) => println!("kappa_empirical: {k:.6e}"),
        None if rep.kappa_unbounded => {
            println!("kappa_empirical: unbounded (a tail ratio admits no finite modulus)")
        }
        None => println!("kappa_empirical: unavailable (no tail with ratio < 1)"),
    }
    if let Some(v) = rep.verdict {
        println!(
            "rate verdict vs hypothesized kappa: {}",
            if v { "pass" } else { "fail" }
        );
    }
    if rep.superlinear_signature {
        println!("superlinear signature: tail ratios decreasing to < 0.1");
    }
}

fn print_rank_report(tag: &str, state: &AlmState) {
    let eigtol = default_eigtol(state.xk.norm().max(state.sk.norm()));
    match rank_conditions(&state.xk, &state.sk, eigtol) {
        Ok(rep) => {
            println!(
                "rank report ({tag}): rank_X = {}, rank_S = {}, beta = {}, \
                 cond_i (rank_S >= n-1): {}, cond_ii (rank_X + rank_S = n): {}{}",
                rep.rank_x,
                rep.rank_s,
                rep.beta_size,
                rep.cond_i,
                rep.cond_ii,
                if rep.complementary {
                    ""
                } else {
                    " [pair not complementary]"
                }
            );
        }
        Err(e) => println!("rank report ({tag}): unavailable ({e})"),
    }
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<i32, String> {
    let prob = load_problem(&args.problem)?;
    let cfg = args.flags.config();
    let text = std::fs::read_to_string(&args.run_csv)
        .map_err(|e| format!("{}: {e}", args.run_csv.display()))?;
    let csv_records = records::records_from_csv(&text, &cfg)?;
    if args.kappa.is_some() && csv_records.iter().all(|r| r.dist_est.is_none()) {
        return Err(
            "rate verdict requested but the run csv has no dist_est values; \
             produce it with solve --fixture-oracle"
                .into(),
        );
    }

    // re-run to recover the final iterate for the rank report
    let (state, _, dist0) = run_solver(&prob, &args.flags)?;
    if state.history.len() != csv_records.len() {
        eprintln!(
            "note: re-run produced {} iterations vs {} csv rows; \
             flags may differ from the original run",
            state.history.len(),
            csv_records.len()
        );
    }

    let rep = rate_report(&csv_records, dist0, args.kappa);
    print_rate_report(&rep);
    print_rank_report(&args.problem.display().to_string(), &state);
    Ok(0)
}

fn cmd_demo(name: &str) -> Result<i32, String> {
    match name {
        "example31" => demo_example31(),
        "example32" => demo_example32(),
        "perturbation" => demo_perturbation(),
        other => Err(format!(
            "unknown demo {other:?}; expected example31, example32 or perturbation"
        )),
    }
}

fn demo_example31() -> Result<i32, String> {
    let prob = fixtures::example31_problem();
    let cfg = AlmConfig {
        c0: 1.0,
        c_growth: 2.0,
        c_max: f64::INFINITY,
        kkt_stop_tol: 1e-9,
        max_outer: 40,
        keep_iterates: true,
        ..Default::default()
    };
    let started = Instant::now();
    let (mut state, reason) =
        alm_run(&prob, &cfg, &fixtures::example31_xhat()).map_err(|e| e.to_string())?;
    let oracle = SolutionSetOracle::example31();
    let dist0 = attach_distances(&mut state, &oracle).map_err(|e| e.to_string())?;

    println!("fixture: linear SDP with solution ray {{diag(t, 0) : t >= 0}}");
    println!("k,ck,kkt_norm,dist,step_norm,inner_iters");
    for r in &state.history {
        println!(
            "{},{:.3e},{:.6e},{:.6e},{:.6e},{}",
            r.k,
            r.ck,
            r.kkt_norm,
            r.dist_est.unwrap_or(f64::NAN),
            r.step_norm,
            r.inner_iters
        );
    }
    let rep = rate_report(&state.history, Some(dist0), None);
    print_rate_report(&rep);
    print_rank_report("example31", &state);

    let final_dist = state
        .history
        .last()
        .and_then(|r| r.dist_est)
        .unwrap_or(f64::NAN);
    let summary = records::summary_json(
        &reason,
        &state.history,
        started.elapsed().as_millis(),
        serde_json::json!({"demo": "example31", "dist_est_final": final_dist}),
    );
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
    Ok(exit_code(&reason))
}

fn demo_example32() -> Result<i32, String> {
    let prob = fixtures::example32_problem();
    let cfg = AlmConfig {
        c0: 1.0,
        c_growth: 1.5,
        mode: CriterionMode::BppOnly,
        kkt_stop_tol: 1e-9,
        max_outer: 100,
        keep_iterates: true,
        ..Default::default()
    };
    let started = Instant::now();
    let (state, reason) =
        alm_run(&prob, &cfg, &SymMat::identity(2)).map_err(|e| e.to_string())?;

    println!("fixture: least-squares SDP with unique dual solution (0, 0, 0)");
    println!("k,ck,kkt_norm,dual_point_norm,step_norm");
    let mut dual_norms = Vec::new();
    for (i, (y, w, s)) in state.z_iterates.iter().enumerate() {
        let dn = (y.norm_squared() + w.norm_squared() + s.norm_sq()).sqrt();
        dual_norms.push(dn);
        let r = &state.history[i];
        println!(
            "{},{:.3e},{:.6e},{:.6e},{:.6e}",
            r.k, r.ck, r.kkt_norm, dn, r.step_norm
        );
    }
    let a = fixtures::example32_constraint_matrix();
    let lam_min = sdpalm::symcone::eig_sym(&state.xk)
        .map_err(|e| e.to_string())?
        .lambda_min();
    println!(
        "final X: trace = {:.12}, <A, X> = {:.12}, lambda_min = {:.3e}",
        state.xk.trace(),
        a.inner(&state.xk),
        lam_min
    );
    println!(
        "final dual point norm: {:.6e}",
        dual_norms.last().copied().unwrap_or(f64::NAN)
    );
    let summary = records::summary_json(
        &reason,
        &state.history,
        started.elapsed().as_millis(),
        serde_json::json!({"demo": "example32", "dual_point_norm": dual_norms.last()}),
    );
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary"));
    Ok(exit_code(&reason))
}

fn demo_perturbation() -> Result<i32, String> {
    let rows =
        example31_perturbation_demo(&[1e-2, 1e-4, 1e-6, 1e-8]).map_err(|e| e.to_string())?;
    println!("subregularity failure at the rank-deficient KKT point:");
    println!(
        "eps,pert_norm,expected_2sqrt2_eps,system_residual,primal_dist,\
         expected_sqrt6_eps,dual_dist,lower_2sqrt_eps,amplification"
    );
    for r in &rows {
        println!(
            "{:.0e},{:.8e},{:.8e},{:.2e},{:.8e},{:.8e},{:.8e},{:.8e},{:.3e}",
            r.eps,
            r.perturbation_norm,
            r.expected_perturbation_norm,
            r.max_system_residual,
            r.primal_dist,
            r.expected_primal_dist,
            r.dual_dist,
            r.dual_dist_lower,
            r.amplification
        );
    }
    println!(
        "dual distance / perturbation grows like 1/sqrt(eps): \
         the dual solution map admits no finite error bound here"
    );
    Ok(0)
}

fn cmd_import(args: &ImportArgs) -> Result<i32, String> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| format!("{}: {e}", args.input.display()))?;
    let pf = sdpa::parse_sdpa(&text)?;
    pf.build()?; // validate before emitting
    let json = pf.to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => println!("{json}"),
    }
    Ok(0)
}
