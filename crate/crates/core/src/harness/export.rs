use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::config::Strategy;
use super::metrics::{fmt_f64, AggregateTable};

/// One CSV per figure and horizon, keyed by file name.
///
/// `pose_L{L}.csv` has the step index against each strategy's mean position
/// and attitude error and uncertainty, `map_L{L}.csv` the plan id against
/// each strategy's per-plan map uncertainty and error, and `coverage_L{L}.csv`
/// the step index against mean coverage. Errors (not uncertainties) are
/// multiplied by `error_scale`.
pub fn figure_csvs(tables: &[AggregateTable], error_scale: f64) -> BTreeMap<String, String> {
    let mut by_horizon: BTreeMap<usize, Vec<&AggregateTable>> = BTreeMap::new();
    for t in tables {
        by_horizon.entry(t.horizon).or_default().push(t);
    }
    let mut out = BTreeMap::new();
    for (horizon, mut ts) in by_horizon {
        ts.sort_by_key(|t| t.strategy);
        let names: Vec<Strategy> = ts.iter().map(|t| t.strategy).collect();

        let mut pose = String::from("step");
        for s in &names {
            let _ = write!(pose, ",e_r_{s},U_r_{s},e_phi_{s},U_phi_{s}");
        }
        pose.push('\n');
        for i in 0..horizon {
            let _ = write!(pose, "{}", i + 1);
            for t in &ts {
                let _ = write!(
                    pose,
                    ",{},{},{},{}",
                    fmt_f64(t.e_r[i] * error_scale),
                    fmt_f64(t.u_r[i]),
                    fmt_f64(t.e_phi[i] * error_scale),
                    fmt_f64(t.u_phi[i])
                );
            }
            pose.push('\n');
        }
        out.insert(format!("pose_L{horizon}.csv"), pose);

        let mut map = String::from("plan_id");
        for s in &names {
            let _ = write!(map, ",U_M_{s},e_M_{s}");
        }
        map.push('\n');
        let plans: std::collections::BTreeSet<usize> = ts.iter().flat_map(|t| t.per_plan.iter().map(|p| p.plan_id)).collect();
        for plan in plans {
            let _ = write!(map, "{plan}");
            for t in &ts {
                match t.per_plan.iter().find(|p| p.plan_id == plan) {
                    Some(p) => {
                        let _ = write!(map, ",{},{}", fmt_f64(p.u_m), fmt_f64(p.e_m * error_scale));
                    }
                    None => map.push_str(",,"),
                }
            }
            map.push('\n');
        }
        out.insert(format!("map_L{horizon}.csv"), map);

        let mut cov = String::from("step");
        for s in &names {
            let _ = write!(cov, ",coverage_{s}");
        }
        cov.push('\n');
        for i in 0..horizon {
            let _ = write!(cov, "{}", i + 1);
            for t in &ts {
                let _ = write!(cov, ",{}", fmt_f64(t.coverage[i]));
            }
            cov.push('\n');
        }
        out.insert(format!("coverage_L{horizon}.csv"), cov);
    }
    out
}
