//! CSV serialization of convergence records (17 significant digits, one
//! row per outer iteration) and the JSON run summary.

use sdpalm::alm::{AlmConfig, ConvergenceRecord, StopReason};

pub const CSV_HEADER: &str =
    "k,ck,primal_obj,dual_obj,primal_infeas,dual_infeas,kkt_norm,step_norm,inner_iters,dist_est";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let dist = r.dist_est.map(fmt).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            fmt(r.ck),
            fmt(r.primal_obj),
            fmt(r.dual_obj),
            fmt(r.primal_infeas),
            fmt(r.dual_infeas),
            fmt(r.kkt_norm),
            fmt(r.step_norm),
            r.inner_iters,
            dist
        ));
    }
    out
}

/// Parses a run CSV back into records. `eta` rebuilds the tolerance
/// sequence column that the CSV does not carry.
pub fn records_from_csv(text: &str, cfg: &AlmConfig) -> Result<Vec<ConvergenceRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(format!("run csv: unexpected header {h:?}")),
        None => return Err("run csv: empty file".into()),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(format!(
                "run csv line {}: {} columns, expected 10",
                lineno + 2,
                cols.len()
            ));
        }
        let field = |i: usize, name: &str| -> Result<f64, String> {
            cols[i]
                .parse::<f64>()
                .map_err(|e| format!("run csv line {}: bad {name}: {e}", lineno + 2))
        };
        let k: usize = cols[0]
            .parse()
            .map_err(|e| format!("run csv line {}: bad k: {e}", lineno + 2))?;
        let dist_est = if cols[9].trim().is_empty() {
            None
        } else {
            Some(field(9, "dist_est")?)
        };
        records.push(ConvergenceRecord {
            k,
            ck: field(1, "ck")?,
            primal_obj: field(2, "primal_obj")?,
            dual_obj: field(3, "dual_obj")?,
            primal_infeas: field(4, "primal_infeas")?,
            dual_infeas: field(5, "dual_infeas")?,
            kkt_norm: field(6, "kkt_norm")?,
            inner_iters: cols[8]
                .parse()
                .map_err(|e| format!("run csv line {}: bad inner_iters: {e}", lineno + 2))?,
            criterion_gap: None,
            dist_est,
            step_norm: field(7, "step_norm")?,
            eta_k: cfg.eta.value(k),
        });
    }
    Ok(records)
}

pub fn summary_json(
    reason: &StopReason,
    records: &[ConvergenceRecord],
    wall_time_ms: u128,
    config_echo: serde_json::Value,
) -> serde_json::Value {
    serde_json::json!({
        "stop_reason": reason.to_string(),
        "iterations": records.len(),
        "final_kkt": records.last().map(|r| r.kkt_norm),
        "wall_time_ms": wall_time_ms,
        "config_echo": config_echo,
    })
}
