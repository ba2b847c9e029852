use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Strategy;
use super::episode::RunRecord;
use crate::error::{Error, Result};

/// Fraction of the reconnaissance map seen up to and including each step.
pub fn metric_coverage(observed_ids_by_step: &[Vec<usize>], recon_map_size: usize) -> Result<Vec<f64>> {
    if recon_map_size == 0 {
        return Err(Error::Domain("coverage needs a nonempty reconnaissance map".into()));
    }
    let mut seen = BTreeSet::new();
    Ok(observed_ids_by_step
        .iter()
        .map(|ids| {
            seen.extend(ids.iter().copied());
            seen.len() as f64 / recon_map_size as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMapMetrics {
    pub plan_id: usize,
    pub episodes: usize,
    pub u_m: f64,
    pub e_m: f64,
}

/// Means over every successful episode of one strategy and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub strategy: Strategy,
    pub horizon: usize,
    pub episodes: usize,
    pub failed: usize,
    pub u_r: Vec<f64>,
    pub e_r: Vec<f64>,
    pub u_phi: Vec<f64>,
    pub e_phi: Vec<f64>,
    pub coverage: Vec<f64>,
    pub per_plan: Vec<PlanMapMetrics>,
}

/// Fixed 17-significant-digit float rendering used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn mean_series<'a>(series: impl Iterator<Item = &'a Vec<f64>>, len: usize) -> Vec<f64> {
    let mut sum = vec![0.0; len];
    let mut n = 0usize;
    for s in series {
        for (acc, v) in sum.iter_mut().zip(s) {
            *acc += v;
        }
        n += 1;
    }
    sum.into_iter().map(|s| s / n as f64).collect()
}

/// Groups records by strategy and horizon and averages them. Records are
/// sorted by key first, so the result does not depend on their order.
/// `failures` counts excluded episodes per (strategy, horizon).
pub fn aggregate(records: &[RunRecord], failures: &BTreeMap<(Strategy, usize), usize>) -> Vec<AggregateTable> {
    let mut groups: BTreeMap<(Strategy, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.strategy, r.horizon)).or_default().push(r);
    }
    for (key, n) in failures {
        if *n > 0 {
            groups.entry(*key).or_default();
        }
    }
    groups
        .into_iter()
        .map(|((strategy, horizon), mut recs)| {
            recs.sort_by_key(|r| (r.plan_id, r.run_id));
            let mut plans: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
            for r in &recs {
                let e = plans.entry(r.plan_id).or_insert((0, 0.0, 0.0));
                e.0 += 1;
                e.1 += r.u_m;
                e.2 += r.e_m;
            }
            AggregateTable {
                strategy,
                horizon,
                episodes: recs.len(),
                failed: failures.get(&(strategy, horizon)).copied().unwrap_or(0),
                u_r: mean_series(recs.iter().map(|r| &r.u_r), horizon),
                e_r: mean_series(recs.iter().map(|r| &r.e_r), horizon),
                u_phi: mean_series(recs.iter().map(|r| &r.u_phi), horizon),
                e_phi: mean_series(recs.iter().map(|r| &r.e_phi), horizon),
                coverage: mean_series(recs.iter().map(|r| &r.coverage), horizon),
                per_plan: plans
                    .into_iter()
                    .map(|(plan_id, (n, u, e))| PlanMapMetrics {
                        plan_id,
                        episodes: n,
                        u_m: u / n as f64,
                        e_m: e / n as f64,
                    })
                    .collect(),
            }
        })
        .collect()
}

impl AggregateTable {
    /// Per-step means, one row per step.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,U_r,e_r,U_phi,e_phi,coverage\n");
        for i in 0..self.horizon {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                fmt_f64(self.u_r[i]),
                fmt_f64(self.e_r[i]),
                fmt_f64(self.u_phi[i]),
                fmt_f64(self.e_phi[i]),
                fmt_f64(self.coverage[i])
            );
        }
        out
    }

    /// Per-plan map means.
    pub fn map_csv(&self) -> String {
        let mut out = String::from("plan_id,episodes,U_M,e_M\n");
        for p in &self.per_plan {
            let _ = writeln!(out, "{},{},{},{}", p.plan_id, p.episodes, fmt_f64(p.u_m), fmt_f64(p.e_m));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_examples() {
        assert_eq!(metric_coverage(&[vec![0, 1, 2], vec![1], vec![]], 3).unwrap(), vec![1.0; 3]);
        assert_eq!(metric_coverage(&[vec![], vec![]], 5).unwrap(), vec![0.0; 2]);
        let c = metric_coverage(&[vec![1, 2], vec![2, 3], vec![9]], 10).unwrap();
        assert_eq!(c, vec![0.2, 0.3, 0.4]);
        assert!(metric_coverage(&[vec![1]], 0).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-7, -123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
