use std::fmt::Write as _;

use super::metrics::{aggregate_runs, Metrics};
use super::runner::{ExperimentKind, ExperimentResults, RunRow};
use crate::corpus::CorpusId;
use crate::error::{Error, Result};

const AGG_TOL: f64 = 1e-9;

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn join(c: &[CorpusId]) -> String {
    c.iter().map(CorpusId::display_name).collect::<Vec<_>>().join(" + ")
}

fn spread(row: &RunRow) -> (String, String) {
    let f = |s: &super::metrics::Stat| {
        if s.is_singleton() {
            format!("{} (single run)", pct(s.mean))
        } else {
            format!("{} ± {}", pct(s.mean), pct(s.std))
        }
    };
    (f(&row.accuracy), f(&row.macro_f1))
}

/// Re-derives every row from the per-run records and checks each confusion
/// matrix against its reported scores.
pub fn check_consistency(results: &ExperimentResults) -> Result<()> {
    for run in &results.runs {
        if !run.metrics.is_consistent() {
            return Err(Error::Verification(format!(
                "run {} seed {} has metrics that disagree with its confusion matrix",
                run.split_file, run.seed
            )));
        }
    }
    for row in &results.table.rows {
        let metrics: Vec<Metrics> = results
            .runs
            .iter()
            .filter(|r| r.model == row.model && r.sources == row.sources && r.target == row.target)
            .map(|r| r.metrics.clone())
            .collect();
        let agg = aggregate_runs(&metrics)?;
        let same = |a: &super::metrics::Stat, b: &super::metrics::Stat| {
            a.n == b.n && (a.mean - b.mean).abs() <= AGG_TOL && (a.std - b.std).abs() <= AGG_TOL
        };
        if !same(&agg.accuracy, &row.accuracy) || !same(&agg.macro_f1, &row.macro_f1) {
            return Err(Error::Verification(format!(
                "row {} {} -> {} does not match its runs",
                row.model,
                join(&row.sources),
                row.target.display_name()
            )));
        }
    }
    Ok(())
}

/// Markdown tables in the layout of the corresponding experiment.
pub fn render_markdown(results: &ExperimentResults) -> String {
    let t = &results.table;
    let mut out = String::new();
    let _ = writeln!(out, "## {}\n", results.kind.title());
    match results.kind {
        ExperimentKind::Mono | ExperimentKind::Sent => {
            let targets: Vec<CorpusId> = t.groups().into_iter().map(|g| g.1).collect();
            for (label, pick) in [("Accuracy (%)", 0usize), ("Macro F1-score (%)", 1)] {
                let _ = writeln!(out, "{label}\n");
                let _ = write!(out, "| Model |");
                for c in &targets {
                    let _ = write!(out, " {} |", c.display_name());
                }
                let _ = writeln!(out, "\n|---|{}", "---|".repeat(targets.len()));
                for &m in &t.models {
                    let _ = write!(out, "| {m} |");
                    for c in &targets {
                        let r = t.get(m, std::slice::from_ref(c), c).expect("row present");
                        let v = if pick == 0 { r.accuracy.mean } else { r.macro_f1.mean };
                        let _ = write!(out, " {} |", pct(v));
                    }
                    let _ = writeln!(out);
                }
                let _ = write!(out, "| Average |");
                for c in &targets {
                    let (a, f) = t.group_average(std::slice::from_ref(c), c);
                    let _ = write!(out, " {} |", pct(if pick == 0 { a } else { f }));
                }
                let _ = writeln!(out, "\n");
            }
        }
        ExperimentKind::Cross | ExperimentKind::Multi => {
            let _ = writeln!(out, "| Model | Training | Testing | Accuracy | F1-score |");
            let _ = writeln!(out, "|---|---|---|---|---|");
            for &m in &t.models {
                for (i, r) in t.rows_for(m).enumerate() {
                    let name = if i == 0 { m.to_string() } else { String::new() };
                    let _ = writeln!(
                        out,
                        "| {name} | {} | {} | {} | {} |",
                        join(&r.sources),
                        r.target.display_name(),
                        pct(r.accuracy.mean),
                        pct(r.macro_f1.mean)
                    );
                }
                let (a, f) = t.model_average(m);
                let _ = writeln!(out, "| | Average | | {}% | {}% |", pct(a), pct(f));
            }
            let _ = writeln!(out);
            if results.kind == ExperimentKind::Multi {
                for (label, pick) in [("Average accuracy", 0usize), ("Average F1-score", 1)] {
                    let _ = write!(out, "| Training | Testing |");
                    for m in &t.models {
                        let _ = write!(out, " {m} |");
                    }
                    let _ = writeln!(out, " {label} |");
                    let _ = writeln!(out, "|---|---|{}---|", "---|".repeat(t.models.len()));
                    for (src, tgt) in t.groups() {
                        let _ = write!(out, "| {} | {} |", join(&src), tgt.display_name());
                        for &m in &t.models {
                            let r = t.get(m, &src, &tgt).expect("row present");
                            let v = if pick == 0 { r.accuracy.mean } else { r.macro_f1.mean };
                            let _ = write!(out, " {} |", pct(v));
                        }
                        let (a, f) = t.group_average(&src, &tgt);
                        let _ = writeln!(out, " {} |", pct(if pick == 0 { a } else { f }));
                    }
                    let _ = writeln!(out);
                }
            }
        }
    }
    let _ = writeln!(out, "Per-row spread over seeds (mean ± sample std)\n");
    let _ = writeln!(out, "| Model | Training | Testing | Accuracy | F1-score | Runs |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for r in &t.rows {
        let (a, f) = spread(r);
        let _ = writeln!(
            out,
            "| {} | {} | {} | {a} | {f} | {} |",
            r.model,
            join(&r.sources),
            r.target.display_name(),
            r.accuracy.n
        );
    }
    out
}

/// CSV files as (file name, contents).
pub fn render_csv(results: &ExperimentResults) -> Vec<(String, String)> {
    let t = &results.table;
    let kind = results.kind;
    let mut files = Vec::new();
    match kind {
        ExperimentKind::Mono | ExperimentKind::Sent => {
            let targets: Vec<CorpusId> = t.groups().into_iter().map(|g| g.1).collect();
            for (suffix, pick) in [("accuracy", 0usize), ("f1", 1)] {
                let mut s = String::from("model");
                for c in &targets {
                    let _ = write!(s, ",{}", c.display_name());
                }
                s.push('\n');
                for &m in &t.models {
                    s.push_str(&m.to_string());
                    for c in &targets {
                        let r = t.get(m, std::slice::from_ref(c), c).expect("row present");
                        let v = if pick == 0 { r.accuracy.mean } else { r.macro_f1.mean };
                        let _ = write!(s, ",{}", pct(v));
                    }
                    s.push('\n');
                }
                s.push_str("Average");
                for c in &targets {
                    let (a, f) = t.group_average(std::slice::from_ref(c), c);
                    let _ = write!(s, ",{}", pct(if pick == 0 { a } else { f }));
                }
                s.push('\n');
                files.push((format!("{kind}_{suffix}.csv"), s));
            }
        }
        ExperimentKind::Cross | ExperimentKind::Multi => {
            let mut s = String::from("model,training,testing,accuracy,f1\n");
            for &m in &t.models {
                for r in t.rows_for(m) {
                    let _ = writeln!(
                        s,
                        "{m},{},{},{},{}",
                        join(&r.sources),
                        r.target.display_name(),
                        pct(r.accuracy.mean),
                        pct(r.macro_f1.mean)
                    );
                }
                let (a, f) = t.model_average(m);
                let _ = writeln!(s, "{m},Average,,{},{}", pct(a), pct(f));
            }
            files.push((format!("{kind}.csv"), s));
            if kind == ExperimentKind::Multi {
                for (suffix, pick) in [("accuracy", 0usize), ("f1", 1)] {
                    let mut s = String::from("training,testing");
                    for m in &t.models {
                        let _ = write!(s, ",{m}");
                    }
                    let _ = writeln!(s, ",average");
                    for (src, tgt) in t.groups() {
                        let _ = write!(s, "{},{}", join(&src), tgt.display_name());
                        for &m in &t.models {
                            let r = t.get(m, &src, &tgt).expect("row present");
                            let v = if pick == 0 { r.accuracy.mean } else { r.macro_f1.mean };
                            let _ = write!(s, ",{}", pct(v));
                        }
                        let (a, f) = t.group_average(&src, &tgt);
                        let _ = writeln!(s, ",{}", pct(if pick == 0 { a } else { f }));
                    }
                    files.push((format!("multi_average_{suffix}.csv"), s));
                }
            }
        }
    }
    let mut s = String::from("model,training,testing,seed,accuracy,f1,split\n");
    for r in &results.runs {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6},{}",
            r.model,
            join(&r.sources),
            r.target.display_name(),
            r.seed,
            r.metrics.accuracy,
            r.metrics.macro_f1,
            r.split_file
        );
    }
    files.push((format!("{kind}_runs.csv"), s));
    files
}
