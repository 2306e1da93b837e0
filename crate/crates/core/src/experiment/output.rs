//! Aggregation and files of a sweep.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResultRow;
use crate::error::Result;
use crate::selfrep::Algorithm;

pub(super) const PARTIAL_FILE: &str = "results.partial.csv";

/// Mean errors below these count as zero.
pub const CLUSTERING_ZERO: f64 = 1e-3;
pub const COMPLETION_ZERO: f64 = 1e-3;
pub const SUBSPACE_ZERO: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Clustering,
    Completion,
    SubspaceMax,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Clustering, Metric::Completion, Metric::SubspaceMax];

    pub fn zero_level(self) -> f64 {
        match self {
            Metric::Clustering => CLUSTERING_ZERO,
            Metric::Completion => COMPLETION_ZERO,
            Metric::SubspaceMax => SUBSPACE_ZERO,
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            Metric::Clustering => "fig_clustering",
            Metric::Completion => "fig_completion",
            Metric::SubspaceMax => "fig_subspace",
        }
    }
}

/// Mean, standard error and count of the present values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

fn stat(values: impl Iterator<Item = f64>) -> Option<Stat> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let stderr = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Some(Stat {
        mean,
        stderr,
        count: v.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: u8,
    pub p: f64,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub failures: usize,
    pub clustering: Option<Stat>,
    pub completion: Option<Stat>,
    pub subspace_max: Option<Stat>,
    pub subspace_mean: Option<Stat>,
}

impl SummaryRow {
    pub fn metric(&self, m: Metric) -> Option<Stat> {
        match m {
            Metric::Clustering => self.clustering,
            Metric::Completion => self.completion,
            Metric::SubspaceMax => self.subspace_max,
        }
    }
}

/// Per `(p, algorithm)` means and standard errors over trials. `rows` must be
/// sorted.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(f64, Algorithm, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|(p, a, _)| *p == r.p && *a == r.algorithm)
        {
            Some(g) => g.2.push(r),
            None => groups.push((r.p, r.algorithm, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    groups
        .into_iter()
        .map(|(p, algorithm, g)| SummaryRow {
            case: g[0].case,
            p,
            algorithm,
            trials: g.len(),
            failures: g.iter().filter(|r| r.status.is_failure()).count(),
            clustering: stat(g.iter().filter_map(|r| r.clustering_error)),
            completion: stat(g.iter().filter_map(|r| r.completion_error)),
            subspace_max: stat(g.iter().filter_map(|r| r.subspace_error_max_rad)),
            subspace_mean: stat(g.iter().filter_map(|r| r.subspace_error_mean_rad)),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorPoint {
    pub p: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Smallest grid ratio whose mean error is below the metric's zero level,
/// with the 95% interval of that mean and the grid point just before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub algorithm: Algorithm,
    pub metric: Metric,
    pub zero_level: f64,
    pub p: Option<f64>,
    pub mean: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub previous: Option<PriorPoint>,
}

/// Thresholds per algorithm and metric. A grid point qualifies only when all
/// `trials` produced the metric.
pub fn thresholds(summary: &[SummaryRow], trials: usize) -> Vec<ThresholdReport> {
    let mut algs: Vec<Algorithm> = summary.iter().map(|s| s.algorithm).collect();
    algs.sort();
    algs.dedup();
    let mut out = Vec::new();
    for &algorithm in &algs {
        let series: Vec<&SummaryRow> = summary
            .iter()
            .filter(|s| s.algorithm == algorithm)
            .collect();
        for metric in Metric::ALL {
            if series.iter().all(|s| s.metric(metric).is_none()) {
                continue;
            }
            let zero = metric.zero_level();
            let hit = series.iter().position(|s| {
                s.metric(metric)
                    .is_some_and(|st| st.count == trials && st.mean < zero)
            });
            let at = hit.and_then(|k| series[k].metric(metric));
            let previous = hit.filter(|&k| k > 0).and_then(|k| {
                series[k - 1].metric(metric).map(|st| PriorPoint {
                    p: series[k - 1].p,
                    mean: st.mean,
                    stderr: st.stderr,
                })
            });
            out.push(ThresholdReport {
                algorithm,
                metric,
                zero_level: zero,
                p: hit.map(|k| series[k].p),
                mean: at.map(|st| st.mean),
                ci95: at.map(|st| [st.mean - 1.96 * st.stderr, st.mean + 1.96 * st.stderr]),
                previous,
            });
        }
    }
    out
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "case",
        "p",
        "algorithm",
        "trials",
        "failures",
        "clustering_mean",
        "clustering_stderr",
        "completion_mean",
        "completion_stderr",
        "completion_count",
        "subspace_max_mean",
        "subspace_max_stderr",
        "subspace_mean_mean",
        "subspace_count",
    ])?;
    for s in summary {
        let c = s.clustering;
        let m = s.completion;
        let sm = s.subspace_max;
        w.write_record([
            s.case.to_string(),
            s.p.to_string(),
            s.algorithm.to_string(),
            s.trials.to_string(),
            s.failures.to_string(),
            opt(c.map(|x| x.mean)),
            opt(c.map(|x| x.stderr)),
            opt(m.map(|x| x.mean)),
            opt(m.map(|x| x.stderr)),
            m.map_or(0, |x| x.count).to_string(),
            opt(sm.map(|x| x.mean)),
            opt(sm.map(|x| x.stderr)),
            opt(s.subspace_mean.map(|x| x.mean)),
            sm.map_or(0, |x| x.count).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns `p mean stderr` per algorithm; `nan` marks
/// missing values.
fn dat_table(summary: &[SummaryRow], metric: Metric) -> String {
    let mut algs: Vec<Algorithm> = summary.iter().map(|s| s.algorithm).collect();
    algs.sort();
    algs.dedup();
    let mut ps: Vec<f64> = summary.iter().map(|s| s.p).collect();
    ps.dedup();
    let mut out = String::from("# p");
    for a in &algs {
        let _ = write!(out, " {a} {a}_stderr");
    }
    out.push('\n');
    for p in ps {
        let _ = write!(out, "{p}");
        for a in &algs {
            let st = summary
                .iter()
                .find(|s| s.p == p && s.algorithm == *a)
                .and_then(|s| s.metric(metric));
            match st {
                Some(st) => {
                    let _ = write!(out, " {} {}", st.mean, st.stderr);
                }
                None => out.push_str(" nan nan"),
            }
        }
        out.push('\n');
    }
    out
}

pub(super) fn write_all(
    dir: &Path,
    rows: &[ResultRow],
    summary: &[SummaryRow],
    thresholds: &[ThresholdReport],
) -> Result<()> {
    write_results_csv(&dir.join("results.csv"), rows)?;
    write_summary_csv(&dir.join("summary.csv"), summary)?;
    serde_json::to_writer_pretty(
        std::fs::File::create(dir.join("thresholds.json"))?,
        thresholds,
    )?;
    for metric in Metric::ALL {
        if summary.iter().any(|s| s.metric(metric).is_some()) {
            std::fs::write(
                dir.join(format!("{}.dat", metric.file_stem())),
                dat_table(summary, metric),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RowStatus;

    fn row(p: f64, trial: usize, algorithm: Algorithm, err: f64) -> ResultRow {
        ResultRow {
            case: 3,
            p,
            trial,
            algorithm,
            clustering_error: Some(err),
            completion_error: None,
            subspace_error_max_rad: None,
            status: RowStatus::Ok,
            seed: 1,
            subspace_error_mean_rad: None,
        }
    }

    #[test]
    fn threshold_is_first_zero_mean() {
        let rows = vec![
            row(0.3, 0, Algorithm::Tsc, 0.2),
            row(0.3, 1, Algorithm::Tsc, 0.0),
            row(0.4, 0, Algorithm::Tsc, 0.0),
            row(0.4, 1, Algorithm::Tsc, 0.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert!((s[0].clustering.unwrap().stderr - 0.1).abs() < 1e-12);
        let t = thresholds(&s, 2);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].p, Some(0.4));
        assert_eq!(t[0].previous.unwrap().mean, 0.1);
        // a grid point missing trials cannot qualify
        assert_eq!(thresholds(&s, 3)[0].p, None);
    }

    #[test]
    fn csv_round_trip_keeps_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![row(0.5, 0, Algorithm::SscLp, 0.25)];
        write_results_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "case,p,trial,algorithm,clustering_error,completion_error,subspace_error_max_rad,status,seed"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "3,0.5,0,ssc-lp,0.25,,,ok,1");
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }
}
