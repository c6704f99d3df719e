//! CSV and JSON emission. Outputs are deterministic: no timestamps, fixed
//! column orders, ordered rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::experiments::{
    CommutativeRow, ConvergenceReport, MeshRow, ParticleRow, RunRecord, TimingRow, VarianceRow,
};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(
        "h,k,realization,state_error,control_error,nogap,suboptimality,control_l2_sq,coercivity_bound,forward_randomized_s,forward_original_s,optimize_s,optimizer_iterations\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.h,
            r.intervals,
            r.realization,
            r.state_error,
            opt(r.control_error),
            opt(r.nogap),
            opt(r.suboptimality),
            opt(r.control_l2_sq),
            opt(r.coercivity_bound),
            r.forward_randomized_s,
            r.forward_original_s,
            opt(r.optimize_s),
            r.optimizer_iterations
                .map(|v| v.to_string())
                .unwrap_or_default(),
        );
    }
    out
}

pub fn summary_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("metric,h,mean,sd,ci2,slope,slope_drop_largest_h\n");
    for s in &report.summaries {
        let slope = report
            .slopes
            .iter()
            .find(|sl| sl.metric == s.metric)
            .map(|sl| (sl.slope.to_string(), sl.slope_drop_largest_h.to_string()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.metric, s.h, s.mean, s.sd, s.ci2, slope.0, slope.1
        );
    }
    for (h, e) in &report.mean_control_error {
        let _ = writeln!(out, "mean_control_error,{},{},,,,", h, e);
    }
    out
}

pub fn variance_table_csv(rows: &[VarianceRow]) -> String {
    let mut out = String::from("case,var,var_weighted\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.case, r.var, r.var_weighted);
    }
    out
}

pub fn mesh_csv(rows: &[MeshRow]) -> String {
    let mut out = String::from(
        "nodes,var,var_weighted,state_error,state_over_sqrt_var,state_over_sqrt_var_weighted,control_error\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.nodes,
            r.var,
            r.var_weighted,
            r.state_error,
            r.state_over_sqrt_var,
            r.state_over_sqrt_var_weighted,
            r.control_error
        );
    }
    out
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("solver,h,k,setup_s,step_median_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.solver, r.h, r.intervals, r.setup_s, r.step_median_s
        );
    }
    out
}

pub fn commutative_csv(rows: &[CommutativeRow]) -> String {
    let mut out = String::from(
        "k,h,exact_mse,growth_bound,weighted_bound_identity,weighted_bound_resolvent,pass\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.intervals,
            r.h,
            r.exact_mse,
            r.growth_bound,
            r.weighted_bound_identity,
            r.weighted_bound_resolvent,
            r.pass
        );
    }
    out
}

pub fn particle_csv(rows: &[ParticleRow]) -> String {
    let mut out = String::from("particles,batch,partitions,inclusion_exact,assembly_max_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.particles, r.batch, r.partitions, r.inclusion_exact, r.assembly_max_err
        );
    }
    out
}

pub fn meta_json(command: &str, config: &crate::config::Config) -> String {
    let meta = serde_json::json!({
        "command": command,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    serde_json::to_string_pretty(&meta).expect("meta serializes")
}

pub fn write(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(())
}
