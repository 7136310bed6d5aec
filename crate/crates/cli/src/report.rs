//! `report`: merges run directories into comparison tables and a regret plot.

use crate::run::RunReport;
use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct LabeledRun {
    pub label: String,
    pub report: RunReport,
}

fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Loads `dir/report.json`, or every `dir/rep_*/report.json` for repeated runs.
pub fn load_runs(dirs: &[PathBuf]) -> Result<Vec<LabeledRun>> {
    if dirs.is_empty() {
        bail!("report needs at least one run directory");
    }
    let mut runs = Vec::new();
    for dir in dirs {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
        let single = dir.join("report.json");
        if single.exists() {
            runs.push(LabeledRun { label: name, report: read_report(&single)? });
            continue;
        }
        let mut reps: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("rep_")) && p.join("report.json").exists())
            .collect();
        if reps.is_empty() {
            bail!("{} holds no report.json", dir.display());
        }
        reps.sort();
        for r in reps {
            let rep = r.file_name().unwrap().to_string_lossy().into_owned();
            runs.push(LabeledRun { label: format!("{name}/{rep}"), report: read_report(&r.join("report.json"))? });
        }
    }
    let mut seen = std::collections::HashSet::new();
    for r in &runs {
        if !seen.insert(r.label.clone()) {
            bail!("two runs are labelled `{}`; give the directories distinct names", r.label);
        }
        let rep = &r.report;
        if rep.regret_mw.is_some() && rep.regret_series_mw.len() != rep.discovered {
            bail!("run `{}` is inconsistent: {} regret points for {} chains", r.label, rep.regret_series_mw.len(), rep.discovered);
        }
    }
    Ok(runs)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn comparison_csv(runs: &[LabeledRun]) -> String {
    let mut s = String::from("run,algorithm,seed,episodes,discovered,accumulated_tll_mw,regret_s,regret_mw\n");
    for r in runs {
        let p = &r.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.label,
            p.algorithm,
            p.seed,
            p.episodes_run,
            p.discovered,
            p.accumulated_tll_mw,
            p.regret_s.map(|x| x.to_string()).unwrap_or_default(),
            fmt_opt(p.regret_mw)
        );
    }
    s
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Mean ± SD per algorithm.
pub fn summary_csv(runs: &[LabeledRun]) -> String {
    let mut groups: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.report.algorithm.as_str()).or_default().push(&r.report);
    }
    let mut s = String::from("algorithm,runs,discovered_mean,discovered_sd,accumulated_tll_mean,accumulated_tll_sd,regret_mean,regret_sd\n");
    for (alg, reps) in groups {
        let (dm, ds) = mean_sd(&reps.iter().map(|r| r.discovered as f64).collect::<Vec<_>>());
        let (am, asd) = mean_sd(&reps.iter().map(|r| r.accumulated_tll_mw).collect::<Vec<_>>());
        let regret: Option<Vec<f64>> = reps.iter().map(|r| r.regret_mw).collect();
        let (rm, rs) = match regret {
            Some(v) => {
                let (m, d) = mean_sd(&v);
                (m.to_string(), d.to_string())
            }
            None => (String::new(), String::new()),
        };
        let _ = writeln!(s, "{alg},{},{dm},{ds},{am},{asd},{rm},{rs}", reps.len());
    }
    s
}

/// One column per run; blank cells past a run's last iteration.
pub fn merged_regret_csv(runs: &[LabeledRun]) -> String {
    let mut s = String::from("iteration");
    for r in runs {
        s.push(',');
        s.push_str(&r.label);
    }
    s.push('\n');
    let n = runs.iter().map(|r| r.report.regret_series_mw.len()).max().unwrap_or(0);
    for i in 0..n {
        let _ = write!(s, "{}", i + 1);
        for r in runs {
            s.push(',');
            if let Some(v) = r.report.regret_series_mw.get(i) {
                let _ = write!(s, "{v}");
            }
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Regret versus iteration, one polyline per run.
pub fn regret_svg(runs: &[LabeledRun]) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 180.0, 20.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x_max = runs.iter().map(|r| r.report.regret_series_mw.len()).max().unwrap_or(1).max(1) as f64;
    let y_max = runs
        .iter()
        .flat_map(|r| r.report.regret_series_mw.iter().copied().chain(r.report.reference_mw))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let px = |i: f64| left + pw * i / x_max;
    let py = |v: f64| top + ph * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{:.0}</text>"#, px(f * x_max), top + ph + 16.0, f * x_max);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{:.0}</text>"#, left - 6.0, py(f * y_max) + 4.0, f * y_max);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">iteration</text>"#, left + pw / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">regret (MW)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (k, r) in runs.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::new();
        if let Some(r0) = r.report.reference_mw {
            let _ = write!(pts, "{:.2},{:.2}", px(0.0), py(r0));
        }
        for (i, v) in r.report.regret_series_mw.iter().enumerate() {
            if !pts.is_empty() {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", px((i + 1) as f64), py(*v));
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>"#);
        let ly = top + 14.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, left + pw + 10.0, left + pw + 30.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, left + pw + 35.0, ly + 4.0, escape(&r.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes comparison.csv, summary.csv, regret_merged.csv and regret.svg.
pub fn cmd_report(dirs: &[PathBuf], out: &Path) -> Result<Vec<LabeledRun>> {
    let runs = load_runs(dirs)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("comparison.csv"), comparison_csv(&runs))?;
    fs::write(out.join("summary.csv"), summary_csv(&runs))?;
    fs::write(out.join("regret_merged.csv"), merged_regret_csv(&runs))?;
    fs::write(out.join("regret.svg"), regret_svg(&runs))?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn run(label: &str, alg: &str, series: Vec<f64>) -> LabeledRun {
        LabeledRun {
            label: label.into(),
            report: RunReport {
                algorithm: alg.into(),
                seed: 0,
                iterations: series.len(),
                episodes_run: series.len(),
                discovered: series.len(),
                accumulated_tll_mw: 10.0 - series.last().copied().unwrap_or(10.0),
                regret_s: Some(series.len()),
                reference_mw: Some(10.0),
                regret_mw: series.last().copied(),
                regret_series_mw: series,
                exhausted: false,
                budget_hit: false,
                train_steps: None,
                wall_clock_seconds: 0.5,
                config: ExperimentConfig::default(),
            },
        }
    }

    #[test]
    fn svg_has_one_polyline_per_run_and_axis_labels() {
        let runs = vec![run("a", "x", vec![8.0, 5.0]), run("b", "y", vec![9.0, 9.0, 4.0])];
        let svg = regret_svg(&runs);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">iteration</text>") && svg.contains(">regret (MW)</text>"));
    }

    #[test]
    fn tables_have_one_row_per_run_and_algorithm() {
        let runs = vec![run("a", "x", vec![8.0, 5.0]), run("b", "x", vec![9.0, 7.0]), run("c", "y", vec![6.0])];
        assert_eq!(comparison_csv(&runs[..1]).lines().count(), 2);
        assert_eq!(comparison_csv(&runs).lines().count(), 4);
        let summary = summary_csv(&runs);
        assert_eq!(summary.lines().count(), 3);
        assert!(summary.contains("x,2,2,0,4,"));
        let merged = merged_regret_csv(&runs);
        assert_eq!(merged.lines().nth(2).unwrap(), "2,5,7,");
    }
}
