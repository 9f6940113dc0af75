//! The `report` and `verify-theory` commands: plot-ready CSVs, markdown
//! summaries, and the executable theory verification run.

use std::path::Path;

use super::manifest::{load_verified, RunWriter};
use super::run::{load_summary, RunSummary};
use super::CliError;
use crate::evaluation::distortion::{distortion_curve, DistortionCurve, TailLaw};
use crate::evaluation::theory::run_theory_suite;

/// `verify-theory`: run the verification suite, write the machine-readable
/// report plus distortion-curve data, and fail (exit 1) when any check fails.
pub fn cmd_verify_theory(seed: u64, out: &Path) -> Result<(), CliError> {
    let report = run_theory_suite(seed);
    let rendered = report.render();
    print!("{rendered}");

    let mut writer = RunWriter::new(out, "theory", seed, "")?;
    writer.write("theory_report.txt", rendered.as_bytes())?;
    writer.write(
        "theory_report.json",
        serde_json::to_string_pretty(&report)
            .expect("report serialize")
            .as_bytes(),
    )?;
    // the matched-adjustment distortion curves behind the monotonicity check
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut curves: Vec<DistortionCurve> = Vec::new();
    for law in [TailLaw::Gaussian, TailLaw::StudentT { nu: 5.0 }] {
        for a in [0.25, 0.5, 1.0] {
            for kappa in [0.2, 0.4, 0.8] {
                curves.push(
                    distortion_curve(law, 0.05, a, kappa, &grid, 0, 0)
                        .expect("supported laws"),
                );
            }
        }
    }
    writer.write(
        "curves.json",
        serde_json::to_string_pretty(&curves)
            .expect("curves serialize")
            .as_bytes(),
    )?;
    writer.finalize()?;

    if report.passed() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(format!(
            "{} theory check(s) failed",
            report.checks.iter().filter(|c| !c.passed).count()
        )))
    }
}

/// `report`: emit tidy plot-data CSVs and a markdown summary from a completed
/// run directory. Consumes only manifest-listed files.
pub fn cmd_report(run_dir: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = load_verified(run_dir)?;
    let mut writer = RunWriter::new(out, "report", manifest.seed, &manifest.config_echo)?;
    match manifest.kind.as_str() {
        "backtest" => {
            let summary = load_summary(run_dir, &manifest)?;
            report_backtest(&mut writer, &summary)?;
        }
        "theory" => {
            report_theory(run_dir, &manifest, &mut writer)?;
        }
        other => {
            return Err(CliError::MissingRun(format!(
                "run kind `{other}` has no report"
            )))
        }
    }
    writer.finalize()?;
    println!("report written to {}", out.display());
    Ok(())
}

fn metric_f64(v: &serde_json::Value, key: &str) -> Option<f64> {
    v.get(key).and_then(|x| x.as_f64())
}

fn verdict_letter(v: &serde_json::Value, key: &str) -> &'static str {
    match v.get(key).and_then(|t| t.get("pass")).and_then(|p| p.as_bool()) {
        Some(true) => "Y",
        Some(false) => "N",
        None => "-",
    }
}

fn report_backtest(writer: &mut RunWriter, summary: &RunSummary) -> Result<(), CliError> {
    // pooled exceedance bars per method
    let mut bars = String::from("baseline,method,scenario,exceedance,avg_capital,tick_loss\n");
    for p in &summary.pooled {
        bars.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.baseline,
            p.method,
            p.scenario,
            metric_f64(&p.metrics, "exceedance").unwrap_or(f64::NAN),
            metric_f64(&p.metrics, "avg_capital").unwrap_or(f64::NAN),
            metric_f64(&p.metrics, "tick_loss").unwrap_or(f64::NAN),
        ));
    }
    writer.write("exceedance_by_method.csv", bars.as_bytes())?;

    // cross-asset heatmap matrix: one file per scenario, methods as columns
    let mut scenarios: Vec<String> = summary.cells.iter().map(|c| c.scenario.clone()).collect();
    scenarios.sort();
    scenarios.dedup();
    let mut methods: Vec<String> = summary.cells.iter().map(|c| c.method.clone()).collect();
    methods.sort();
    methods.dedup();
    for sc in &scenarios {
        let mut rows: Vec<(String, String)> = summary
            .cells
            .iter()
            .filter(|c| &c.scenario == sc)
            .map(|c| (c.asset.clone(), c.baseline.clone()))
            .collect();
        rows.sort();
        rows.dedup();
        let mut body = format!("asset,baseline,{}\n", methods.join(","));
        for (asset, baseline) in rows {
            body.push_str(&format!("{asset},{baseline}"));
            for m in &methods {
                let cell = summary.cells.iter().find(|c| {
                    c.asset == asset && c.baseline == baseline && &c.method == m && &c.scenario == sc
                });
                match cell {
                    Some(c) => body.push_str(&format!(
                        ",{}",
                        metric_f64(&c.metrics, "exceedance").unwrap_or(f64::NAN)
                    )),
                    None => body.push(','),
                }
            }
            body.push('\n');
        }
        writer.write(&format!("heatmap_exceedance_{sc}.csv"), body.as_bytes())?;
    }

    // exceedance vs capital scatter, one point per cell
    let mut scatter =
        String::from("asset,baseline,method,scenario,exceedance,avg_capital,stress_exceedance\n");
    for c in &summary.cells {
        scatter.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.asset,
            c.baseline,
            c.method,
            c.scenario,
            metric_f64(&c.metrics, "exceedance").unwrap_or(f64::NAN),
            metric_f64(&c.metrics, "avg_capital").unwrap_or(f64::NAN),
            metric_f64(&c.metrics, "stress_exceedance")
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ));
    }
    writer.write("exceedance_vs_capital.csv", scatter.as_bytes())?;

    writer.write("summary.md", markdown_summary(summary).as_bytes())?;
    Ok(())
}

fn markdown_summary(summary: &RunSummary) -> String {
    let mut md = String::new();
    md.push_str("# Backtest summary\n\n");
    md.push_str(&format!(
        "alpha = {}, kappa = {}, seed = {}\n\n",
        summary.alpha, summary.kappa, summary.seed
    ));

    md.push_str("## Pooled overall results\n\n");
    md.push_str("| Baseline | Method | Scenario | Exceed. | Avg cap. | Tick loss | UC | CC | DQ |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for p in &summary.pooled {
        md.push_str(&format!(
            "| {} | {} | {} | {:.4} | {:.4} | {:.6} | {} | {} | {} |\n",
            p.baseline,
            p.method,
            p.scenario,
            metric_f64(&p.metrics, "exceedance").unwrap_or(f64::NAN),
            metric_f64(&p.metrics, "avg_capital").unwrap_or(f64::NAN),
            metric_f64(&p.metrics, "tick_loss").unwrap_or(f64::NAN),
            verdict_letter(&p.metrics, "uc"),
            verdict_letter(&p.metrics, "cc"),
            verdict_letter(&p.metrics, "dq"),
        ));
    }

    // strict-stress table per scenario
    md.push_str("\n## Pooled strict-stress results\n\n");
    md.push_str("| Baseline | Method | Scenario | Stress exceed. | Stress gap | Stressed cap. |\n");
    md.push_str("|---|---|---|---|---|---|\n");
    for p in &summary.pooled {
        let se = metric_f64(&p.metrics, "stress_exceedance");
        let gap = metric_f64(&p.metrics, "stress_gap");
        let cap = metric_f64(&p.metrics, "stressed_avg_capital");
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            p.baseline,
            p.method,
            p.scenario,
            se.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
            gap.map(|v| format!("{v:+.4}")).unwrap_or_else(|| "n/a".into()),
            cap.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
        ));
    }

    // clean-vs-underreact robustness pairs when both scenarios are present
    let both: Vec<(&str, &str)> = {
        let mut pairs: Vec<(&str, &str)> = summary
            .pooled
            .iter()
            .map(|p| (p.baseline.as_str(), p.method.as_str()))
            .collect();
        pairs.sort();
        pairs.dedup();
        pairs
    };
    let find = |b: &str, m: &str, sc: &str| {
        summary
            .pooled
            .iter()
            .find(|p| p.baseline == b && p.method == m && p.scenario == sc)
    };
    if summary.pooled.iter().any(|p| p.scenario == "underreact") {
        md.push_str("\n## Stress robustness under proxy underreaction\n\n");
        md.push_str(
            "| Baseline | Method | Clean stress exceed. | Underreact stress exceed. | Clean stressed cap. | Underreact stressed cap. |\n",
        );
        md.push_str("|---|---|---|---|---|---|\n");
        for (b, m) in both {
            if let (Some(c), Some(u)) = (find(b, m, "clean"), find(b, m, "underreact")) {
                let fmt = |p: Option<f64>| p.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
                md.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    b,
                    m,
                    fmt(metric_f64(&c.metrics, "stress_exceedance")),
                    fmt(metric_f64(&u.metrics, "stress_exceedance")),
                    fmt(metric_f64(&c.metrics, "stressed_avg_capital")),
                    fmt(metric_f64(&u.metrics, "stressed_avg_capital")),
                ));
            }
        }
    }
    md
}

fn report_theory(
    run_dir: &Path,
    manifest: &super::manifest::Manifest,
    writer: &mut RunWriter,
) -> Result<(), CliError> {
    if !manifest.files.iter().any(|f| f.path == "curves.json") {
        return Err(CliError::MissingRun("curves.json not in manifest".into()));
    }
    let text = std::fs::read_to_string(run_dir.join("curves.json"))
        .map_err(|_| CliError::MissingRun("curves.json unreadable".into()))?;
    let curves: Vec<DistortionCurve> = serde_json::from_str(&text)
        .map_err(|e| CliError::MissingRun(format!("curves.json: {e}")))?;
    let mut body = String::from("law,a_t,kappa,rho,delta,se\n");
    for c in &curves {
        let law = match c.law {
            TailLaw::Gaussian => "gaussian".to_string(),
            TailLaw::StudentT { nu } => format!("student_t_{nu}"),
        };
        for i in 0..c.rho_grid.len() {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                law, c.a_t, c.kappa, c.rho_grid[i], c.delta[i], c.se[i]
            ));
        }
    }
    writer.write("distortion_curves.csv", body.as_bytes())?;
    Ok(())
}
