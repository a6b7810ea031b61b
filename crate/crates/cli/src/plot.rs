//! Plot data for the per-round selection percentages and pool RMSEs, with
//! small SVG line charts for a quick look.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pgs2s::trainer::RoundLog;

use crate::CliError;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Step-averaged percentage per slot. Each step's row sums to 100, so the
/// average does too.
pub fn mean_over_steps(selection: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = selection.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.len()];
    for row in selection {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter().map(|v| v / selection.len() as f64).collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `round,split,step,<slot>...` with one row per decode step and a `mean`
/// row per (round, split).
pub fn selection_csv(logs: &[RoundLog]) -> String {
    let mut s = String::from("round,split,step");
    for n in &logs[0].pool_names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for log in logs {
        for (split, sel) in [("train", &log.selection_train), ("val", &log.selection_val)] {
            let mean = mean_over_steps(sel);
            let rows = sel.iter().enumerate().map(|(k, r)| ((k + 1).to_string(), r.as_slice()));
            for (step, row) in rows.chain(std::iter::once(("mean".to_string(), mean.as_slice()))) {
                let _ = write!(s, "{},{split},{step}", log.round);
                for v in row {
                    let _ = write!(s, ",{}", num(*v));
                }
                s.push('\n');
            }
        }
    }
    s
}

/// `round,model,train_rmse,val_rmse`.
pub fn pool_rmse_csv(logs: &[RoundLog]) -> String {
    let mut s = String::from("round,model,train_rmse,val_rmse\n");
    for log in logs {
        for (a, name) in log.pool_names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{name},{},{}",
                log.round,
                num(log.pool_rmse_train[a]),
                num(log.pool_rmse_val[a])
            );
        }
    }
    s
}

/// A bare line chart: one polyline per series over `x`.
pub fn line_chart_svg(title: &str, y_label: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 70.0, 130.0, 40.0, 50.0);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let (x0, x1) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0));
    let xs = |v: f64| left + if x1 > x0 { (v - x0) / (x1 - x0) } else { 0.5 } * (w - left - right);
    let ys = |v: f64| top + (1.0 - (v - lo) / (hi - lo)) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#, left - 5.0, ys(v) + 4.0);
    }
    for &v in x {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, xs(v), h - bottom + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#, (left + w - right) / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (name, ys_raw)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys_raw)
            .filter(|(_, v)| v.is_finite())
            .map(|(&a, &b)| format!("{:.1},{:.1}", xs(a), ys(b)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = top + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            w - right + 10.0,
            w - right + 30.0,
            w - right + 35.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn read_round_logs(path: &Path) -> Result<Vec<RoundLog>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `selection.csv`, `pool_rmse.csv`, `selection.svg` and
/// `pool_rmse.svg` into `out_dir`; returns the written paths.
pub fn plot_selection(logs: &[RoundLog], source: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if logs.is_empty() {
        return Err(CliError::NothingToPlot(source.to_path_buf()));
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let rounds: Vec<f64> = logs.iter().map(|l| l.round as f64).collect();
    let names = &logs[0].pool_names;
    let per_slot = |f: &dyn Fn(&RoundLog, usize) -> f64| -> Vec<(String, Vec<f64>)> {
        names
            .iter()
            .enumerate()
            .map(|(a, n)| (n.clone(), logs.iter().map(|l| f(l, a)).collect()))
            .collect()
    };
    let selection = per_slot(&|l, a| mean_over_steps(&l.selection_train).get(a).copied().unwrap_or(f64::NAN));
    let mut rmse = per_slot(&|l, a| l.pool_rmse_val[a]);
    for (n, _) in &mut rmse {
        n.push_str(" (val)");
    }
    let files = [
        ("selection.csv", selection_csv(logs)),
        ("pool_rmse.csv", pool_rmse_csv(logs)),
        (
            "selection.svg",
            line_chart_svg("Selected by the agent (train)", "percent", &rounds, &selection),
        ),
        ("pool_rmse.svg", line_chart_svg("Pool RMSE", "RMSE", &rounds, &rmse)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(CliError::io(&p))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn log(round: usize, sel: Vec<Vec<f64>>) -> RoundLog {
        RoundLog {
            round,
            pool_names: vec!["MSVR".into(), "MLP".into(), "Decoder".into()],
            pool_rmse_train: vec![0.3, 0.2, 0.1],
            pool_rmse_val: vec![0.3, 0.2, 0.1],
            selection_train: sel.clone(),
            selection_val: sel,
            mean_return: 0.0,
            rnn_loss: 0.0,
            val_rmse: 0.1,
            seq_frozen: true,
            policy_frozen: true,
        }
    }

    #[test]
    fn all_decoder_round_gives_decoder_series_of_100() {
        let logs = vec![log(1, vec![vec![0.0, 0.0, 100.0]; 3])];
        let csv = selection_csv(&logs);
        let mean_rows: Vec<&str> = csv.lines().filter(|l| l.contains(",mean,")).collect();
        assert_eq!(mean_rows, vec!["1,train,mean,0,0,100", "1,val,mean,0,0,100"]);
    }

    #[test]
    fn rows_sum_to_one_hundred() {
        let logs = vec![
            log(1, vec![vec![20.0, 30.0, 50.0], vec![100.0 / 3.0, 100.0 / 3.0, 100.0 / 3.0]]),
            log(2, vec![vec![0.0, 90.0, 10.0], vec![12.5, 12.5, 75.0]]),
        ];
        let csv = selection_csv(&logs);
        for line in csv.lines().skip(1) {
            let sum: f64 = line.split(',').skip(3).map(|v| v.parse::<f64>().unwrap()).sum();
            assert!((sum - 100.0).abs() <= 0.1, "{line}");
        }
    }

    #[test]
    fn empty_logs_are_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = plot_selection(&[], Path::new("rounds.json"), dir.path()).unwrap_err();
        assert!(matches!(err, CliError::NothingToPlot(_)));
    }
}
