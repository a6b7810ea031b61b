//! Long-format results and the mean (±sd) comparison table.

use std::io::Write;

use pgs2s::metrics::MetricReport;
use pgs2s::trainer::RegimeSpec;

/// Metrics written per run, in column order.
pub const METRICS: [&str; 4] = ["rmse", "mape", "smape", "pooled_rmse"];

/// Outcome of one (regime, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub regime: RegimeSpec,
    pub seed: u64,
    pub outcome: Result<MetricReport, String>,
}

fn metric(report: &MetricReport, name: &str) -> f64 {
    match name {
        "pooled_rmse" => report.pooled_rmse,
        other => report.get(other).unwrap_or(f64::NAN),
    }
}

/// Scientific notation with a two-digit signed exponent, e.g. `1.25E-03`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.2E}");
    let (mantissa, exp) = s.split_once('E').expect("E format");
    let exp: i32 = exp.parse().expect("exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

/// Mean and sample standard deviation; the deviation is exactly 0 when all
/// values are equal.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 || values.iter().all(|v| *v == values[0]) {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per (dataset, H, regime, seed, metric). Failed cells get one row
/// per metric with an empty value and the error in `status`.
pub fn write_results_csv(out: impl Write, dataset: &str, horizon: usize, cells: &[CellResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "H", "regime", "seed", "metric", "value", "status"])?;
    for c in cells {
        for m in METRICS {
            let (value, status) = match &c.outcome {
                Ok(r) => (format!("{:e}", metric(r, m)), "ok".to_string()),
                Err(e) => (String::new(), format!("failed: {e}")),
            };
            w.write_record([
                dataset,
                &horizon.to_string(),
                c.regime.name(),
                &c.seed.to_string(),
                m,
                &value,
                &status,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-regime summary of one metric over the successful seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub regime: RegimeSpec,
    pub ok: usize,
    pub total: usize,
    /// `(mean, sd)` per entry of [`METRICS`].
    pub stats: Vec<(f64, f64)>,
}

pub fn summarize(regimes: &[RegimeSpec], cells: &[CellResult]) -> Vec<Summary> {
    regimes
        .iter()
        .map(|&regime| {
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.regime == regime).collect();
            let reports: Vec<&MetricReport> = mine.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let stats = METRICS
                .iter()
                .map(|m| mean_sd(&reports.iter().map(|r| metric(r, m)).collect::<Vec<_>>()))
                .collect();
            Summary {
                regime,
                ok: reports.len(),
                total: mine.len(),
                stats,
            }
        })
        .collect()
}

/// Markdown table, one row per regime, the lowest mean of each metric in bold.
pub fn render_table(dataset: &str, horizon: usize, summaries: &[Summary]) -> String {
    let mut s = format!("### {dataset}, H = {horizon}\n\n| Regime | Runs |");
    for m in METRICS {
        s.push_str(&format!(" {} |", m.to_uppercase()));
    }
    s.push_str("\n|---|---|");
    s.push_str(&"---|".repeat(METRICS.len()));
    s.push('\n');
    let best: Vec<Option<f64>> = (0..METRICS.len())
        .map(|j| {
            summaries
                .iter()
                .map(|r| r.stats[j].0)
                .filter(|v| v.is_finite())
                .min_by(f64::total_cmp)
        })
        .collect();
    for r in summaries {
        s.push_str(&format!("| {} | {}/{} |", r.regime.name(), r.ok, r.total));
        for (j, &(mean, sd)) in r.stats.iter().enumerate() {
            if !mean.is_finite() {
                s.push_str(" failed |");
                continue;
            }
            let cell = format!("{} (±{})", sci(mean), sci(sd));
            if best[j] == Some(mean) {
                s.push_str(&format!(" **{cell}** |"));
            } else {
                s.push_str(&format!(" {cell} |"));
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rmse: f64) -> MetricReport {
        MetricReport {
            rmse,
            mape: rmse * 10.0,
            smape: rmse * 20.0,
            per_step_rmse: vec![rmse],
            pooled_rmse: rmse,
            n_samples: 1,
        }
    }

    #[test]
    fn sci_matches_table_convention() {
        assert_eq!(sci(8.74e-5), "8.74E-05");
        assert_eq!(sci(1.25e-3), "1.25E-03");
        assert_eq!(sci(0.0), "0.00E+00");
        assert_eq!(sci(15.6), "1.56E+01");
    }

    #[test]
    fn identical_seeds_give_zero_sd() {
        let x = 0.1 + 0.2;
        assert_eq!(mean_sd(&[x, x, x]).1, 0.0);
        let (m, sd) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_cell_gives_one_row_and_bold_best() {
        let cells = vec![CellResult {
            regime: RegimeSpec::Fr,
            seed: 0,
            outcome: Ok(report(0.5)),
        }];
        let table = render_table("MG", 12, &summarize(&[RegimeSpec::Fr], &cells));
        let rows: Vec<&str> = table.lines().filter(|l| l.starts_with("| FR")).collect();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].contains("**5.00E-01 (±0.00E+00)**"));
    }

    #[test]
    fn failed_cells_are_kept() {
        let cells = vec![
            CellResult {
                regime: RegimeSpec::Fr,
                seed: 0,
                outcome: Ok(report(0.5)),
            },
            CellResult {
                regime: RegimeSpec::Tf,
                seed: 0,
                outcome: Err("diverged".into()),
            },
        ];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, "MG", 12, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * METRICS.len());
        assert!(text.lines().any(|l| l.starts_with("MG,12,TF,0,rmse,,failed: diverged")));
        let table = render_table("MG", 12, &summarize(&[RegimeSpec::Fr, RegimeSpec::Tf], &cells));
        assert!(table.contains("| TF | 0/1 | failed |"));
    }
}
