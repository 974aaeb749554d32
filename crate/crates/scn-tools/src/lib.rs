pub mod accept;
pub mod checkpoint;
pub mod cloudtxt;
pub mod config;
pub mod container;
pub mod error;
pub mod gradcheck;
pub mod history;
pub mod idx;
pub mod manifest;

use scn_core::train::{evaluate, AccuracyTable, EvalModel, TrainData};
use scn_core::transforms::AlphaParam;

use crate::error::Result;

/// Worker cap from SCN_THREADS; 0 (or unset parse failure) means strict
/// deterministic single-threaded execution.
pub fn thread_limit() -> usize {
    std::env::var("SCN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0)
}

/// Accuracy sweep over a grid, parallel across grid points when
/// SCN_THREADS allows. Results are position-stable, so the table is
/// identical either way.
pub fn sweep(
    model: &EvalModel<f32>,
    data: &TrainData,
    grid: &[AlphaParam],
    batch: usize,
) -> Result<AccuracyTable> {
    let threads = thread_limit();
    if threads <= 1 {
        return Ok(evaluate(model, data, grid, batch)?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| error::ToolError::Config(e.to_string()))?;
    let rows: Vec<(AlphaParam, f64)> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|a| {
                let t = evaluate(model, data, core::slice::from_ref(a), batch)?;
                Ok((a.clone(), t.rows[0].1))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let accs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let min = accs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(AccuracyTable { rows, mean, min, max })
}
