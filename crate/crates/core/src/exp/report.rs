use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::runner::ExperimentReport;

/// Per-arm averages over seeds, one row per sweep.
///
/// Columns are `iteration` followed by `<arm>_cost`, `<arm>_residual` and
/// `<arm>_admitted` for each arm in configuration order.
pub fn trajectory_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("iteration");
    for name in &report.arm_names {
        let _ = write!(out, ",{name}_cost,{name}_residual,{name}_admitted");
    }
    out.push('\n');
    let rows = report
        .seeds
        .iter()
        .flat_map(|s| s.arms.iter().map(|a| a.records.len()))
        .min()
        .unwrap_or(0);
    let n = report.seeds.len() as f64;
    for k in 0..rows {
        let _ = write!(out, "{k}");
        for a in 0..report.arm_names.len() {
            let (mut cost, mut res, mut adm) = (0.0, 0.0, 0.0);
            for s in &report.seeds {
                let r = &s.arms[a].records[k];
                cost += r.cost;
                res += r.residual.max();
                adm += r.admitted_rate;
            }
            let _ = write!(out, ",{},{},{}", cost / n, res / n, adm / n);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub mean_final_cost: f64,
    pub final_costs: Vec<f64>,
    /// First sweep with all residuals at tolerance, per seed.
    pub converged_at: Vec<Option<usize>>,
    pub guard_reverts: usize,
    pub loop_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seeds: Vec<u64>,
    pub instance_seeds: Vec<u64>,
    pub arms: Vec<ArmSummary>,
}

pub fn summarize(report: &ExperimentReport) -> Summary {
    let arms = report
        .arm_names
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let final_costs: Vec<f64> = report.seeds.iter().map(|s| s.arms[a].final_cost).collect();
            ArmSummary {
                name: name.clone(),
                mean_final_cost: final_costs.iter().sum::<f64>() / final_costs.len().max(1) as f64,
                converged_at: report.seeds.iter().map(|s| s.arms[a].converged_at).collect(),
                guard_reverts: report.seeds.iter().map(|s| s.arms[a].guard_reverts).sum(),
                loop_violations: report.seeds.iter().map(|s| s.arms[a].loop_violations).sum(),
                final_costs,
            }
        })
        .collect();
    Summary {
        name: report.name.clone(),
        seeds: report.seeds.iter().map(|s| s.seed).collect(),
        instance_seeds: report.seeds.iter().map(|s| s.instance_seed).collect(),
        arms,
    }
}

/// Gnuplot data from a trajectory CSV: a commented header, whitespace
/// separated columns and at most `max_points` evenly spaced rows (the last
/// row is always kept).
pub fn emit_plots(csv: &str, max_points: usize) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let mut out = format!("# {}\n", header.replace(',', " "));
    if rows.is_empty() || max_points == 0 {
        return out;
    }
    let stride = rows.len().div_ceil(max_points).max(1);
    let mut picked: Vec<usize> = (0..rows.len()).step_by(stride).collect();
    if picked.last() != Some(&(rows.len() - 1)) {
        if picked.len() == max_points {
            picked.pop();
        }
        picked.push(rows.len() - 1);
    }
    for i in picked {
        out.push_str(&rows[i].replace(',', " "));
        out.push('\n');
    }
    out
}
