//! Textual run outputs: JSONL training history, CSV summaries, β-curve,
//! sweep, and search-trace CSVs. Column orders are fixed; external
//! plotting relies on them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use scn_core::diag::{BetaCurve, ContinuityReport};
use scn_core::search::SearchResult;
use scn_core::train::{AccuracyTable, TrainHistory};
use scn_core::transforms::AlphaParam;
use serde_json::json;

use crate::error::Result;

/// One JSON object per epoch.
pub fn write_history_jsonl(h: &TrainHistory, path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in &h.epochs {
        let rec = json!({
            "epoch": e.epoch,
            "loss": e.loss,
            "reg": e.reg,
            "train_acc": e.train_acc,
            "test_acc": e.test_acc,
            "lr": e.lr,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_history_csv(h: &TrainHistory, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,loss,reg,train_acc,test_acc,lr\n");
    for e in &h.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.epoch, e.loss, e.reg, e.train_acc, e.test_acc, e.lr
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

fn alpha_cols(alpha: &AlphaParam) -> String {
    alpha
        .raw
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Columns: native α components, encoded components, β₁…β_D.
pub fn write_beta_csv(curve: &BetaCurve, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let (Some(a0), Some(e0)) = (curve.alphas.first(), curve.encodings.first()) {
        let mut head = Vec::new();
        for i in 0..a0.raw.len() {
            head.push(format!("alpha{}", i + 1));
        }
        for i in 0..e0.len() {
            head.push(format!("enc{}", i + 1));
        }
        for i in 0..curve.dims() {
            head.push(format!("beta{}", i + 1));
        }
        out.push_str(&head.join(","));
        out.push('\n');
    }
    for ((a, e), b) in curve.alphas.iter().zip(&curve.encodings).zip(&curve.betas) {
        let cols: Vec<String> = a
            .raw
            .iter()
            .chain(e.iter())
            .chain(b.iter())
            .map(f64::to_string)
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Columns: α components, accuracy.
pub fn write_sweep_csv(table: &AccuracyTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some((a0, _)) = table.rows.first() {
        let mut head: Vec<String> =
            (0..a0.raw.len()).map(|i| format!("alpha{}", i + 1)).collect();
        head.push("accuracy".into());
        out.push_str(&head.join(","));
        out.push('\n');
    }
    for (a, acc) in &table.rows {
        writeln!(out, "{},{acc}", alpha_cols(a)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Columns: trace index, candidate α components, entropy.
pub fn write_search_csv(res: &SearchResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some((a0, _)) = res.trace.first() {
        let mut head = vec!["restart".to_string()];
        head.extend((0..a0.raw.len()).map(|i| format!("alpha{}", i + 1)));
        head.push("entropy".into());
        out.push_str(&head.join(","));
        out.push('\n');
    }
    for (i, (a, h)) in res.trace.iter().enumerate() {
        writeln!(out, "{i},{},{h}", alpha_cols(a)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_report_json(report: &ContinuityReport, degeneracy: f64, path: &Path) -> Result<()> {
    let rec = json!({
        "max_step_inf": report.max_step_inf,
        "mean_step_inf": report.mean_step_inf,
        "lipschitz": report.lipschitz,
        "degeneracy_index": degeneracy,
    });
    fs::write(path, serde_json::to_string_pretty(&rec)?)?;
    Ok(())
}
