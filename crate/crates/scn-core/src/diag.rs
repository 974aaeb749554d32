//! Probes of the configuration subspace: β-curves, continuity estimates,
//! degeneracy detection, and accuracy sweeps/profiles.

use crate::error::{Result, ScnError};
use crate::scalar::Scalar;
use crate::scn::SCNModel;
use crate::train::{accuracy_at, evaluate, AccuracyTable, EvalModel, TrainData};
use crate::transforms::{encode_alpha, AlphaParam, TransformFamily};
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaCurve {
    pub alphas: Vec<AlphaParam>,
    pub encodings: Vec<Vec<f64>>,
    /// One simplex row per grid point.
    pub betas: Vec<Vec<f64>>,
}

impl BetaCurve {
    pub fn dims(&self) -> usize {
        self.betas.first().map(Vec::len).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub max_step_inf: f64,
    pub mean_step_inf: f64,
    /// max ‖Δβ‖₂ / ‖Δenc‖₂ over consecutive grid points.
    pub lipschitz: f64,
}

/// The default rotation grid: one point per degree.
pub fn rotation_grid_deg(step_deg: f64) -> Vec<AlphaParam> {
    let mut grid = Vec::new();
    let mut d = 0.0;
    while d < 360.0 {
        grid.push(AlphaParam::rotation(d * PI / 180.0));
        d += step_deg;
    }
    grid
}

/// Scaling grid with the given factor step.
pub fn scaling_grid(step: f64) -> Vec<AlphaParam> {
    let mut grid = Vec::new();
    let mut f: f64 = 0.2;
    while f <= 2.0 + 1e-9 {
        grid.push(AlphaParam::factor(TransformFamily::Scaling, f.min(2.0)));
        f += step;
    }
    grid
}

/// Integer translation lattice over [−8, 8]².
pub fn translation_grid() -> Vec<AlphaParam> {
    let mut grid = Vec::with_capacity(17 * 17);
    for y in -8..=8 {
        for x in -8..=8 {
            grid.push(AlphaParam::translation(x as f64, y as f64));
        }
    }
    grid
}

/// 3D grid, 15° per free angle, φ₂ fixed for 2D slicing when `fix_phi2`.
pub fn euler_grid(fix_phi2: Option<f64>) -> Vec<AlphaParam> {
    let steps: Vec<f64> = (0..24).map(|k| -PI + (k as f64 + 0.5) * PI / 12.0).collect();
    let mut grid = Vec::new();
    for &a in &steps {
        match fix_phi2 {
            Some(p2) => {
                for &c in &steps {
                    grid.push(AlphaParam::euler(a, p2, c));
                }
            }
            None => {
                for &b in &steps {
                    for &c in &steps {
                        grid.push(AlphaParam::euler(a, b, c));
                    }
                }
            }
        }
    }
    grid
}

/// β(α) over a grid.
pub fn export_beta_curve<T: Scalar>(scn: &SCNModel<T>, grid: &[AlphaParam]) -> Result<BetaCurve> {
    let mut encodings = Vec::with_capacity(grid.len());
    let mut betas = Vec::with_capacity(grid.len());
    for alpha in grid {
        encodings.push(encode_alpha(alpha)?);
        betas.push(scn.beta(alpha)?.iter().map(|v| v.to_f64()).collect());
    }
    Ok(BetaCurve {
        alphas: grid.to_vec(),
        encodings,
        betas,
    })
}

/// Finite-difference steps of β along an ordered grid.
pub fn continuity_probe(curve: &BetaCurve) -> Result<ContinuityReport> {
    if curve.betas.len() < 2 {
        return Err(ScnError::Invalid("continuity probe needs >= 2 grid points".into()));
    }
    let mut max_step = 0.0f64;
    let mut sum_step = 0.0f64;
    let mut lipschitz = 0.0f64;
    let n = curve.betas.len();
    for k in 0..n - 1 {
        let (a, b) = (&curve.betas[k], &curve.betas[k + 1]);
        let step_inf = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        max_step = max_step.max(step_inf);
        sum_step += step_inf;
        let db: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let de: f64 = curve.encodings[k]
            .iter()
            .zip(curve.encodings[k + 1].iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        if de > 1e-12 {
            lipschitz = lipschitz.max(db / de);
        }
    }
    Ok(ContinuityReport {
        max_step_inf: max_step,
        mean_step_inf: sum_step / (n - 1) as f64,
        lipschitz,
    })
}

/// maxᵢ meanₐ βᵢ(α); near 1 means one base model dominates everywhere.
pub fn degeneracy_index(curve: &BetaCurve) -> Result<f64> {
    if curve.betas.is_empty() {
        return Err(ScnError::Invalid("empty beta curve".into()));
    }
    let d = curve.dims();
    let n = curve.betas.len() as f64;
    let mut best = 0.0f64;
    for i in 0..d {
        let mean = curve.betas.iter().map(|row| row[i]).sum::<f64>() / n;
        best = best.max(mean);
    }
    Ok(best)
}

/// Number of contiguous argmax arcs along a closed (wrap-around) grid.
/// A clean responsibility structure on rotation gives exactly D arcs.
pub fn argmax_arcs(curve: &BetaCurve) -> usize {
    let arg: Vec<usize> = curve
        .betas
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let n = arg.len();
    if n == 0 {
        return 0;
    }
    let mut changes = 0;
    for k in 0..n {
        if arg[k] != arg[(k + 1) % n] {
            changes += 1;
        }
    }
    changes.max(1)
}

/// evaluate() over the grid (polar-plot data for rotation).
pub fn accuracy_sweep<T: Scalar>(
    model: &EvalModel<T>,
    data: &TrainData,
    grid: &[AlphaParam],
    batch: usize,
) -> Result<AccuracyTable> {
    evaluate(model, data, grid, batch)
}

/// Freeze θ = f(h(α*)) and sweep that single composed network over the
/// whole grid.
pub fn specialization_profile<T: Scalar>(
    scn: &SCNModel<T>,
    alpha_star: &AlphaParam,
    data: &TrainData,
    grid: &[AlphaParam],
    batch: usize,
) -> Result<AccuracyTable> {
    let theta = scn.theta_at(alpha_star)?;
    let mut rows = Vec::with_capacity(grid.len());
    for alpha in grid {
        rows.push((
            alpha.clone(),
            accuracy_at(&scn.arch, &theta, data, alpha, batch)?,
        ));
    }
    let mean = rows.iter().map(|(_, a)| a).sum::<f64>() / rows.len() as f64;
    let min = rows.iter().map(|(_, a)| *a).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|(_, a)| *a).fold(f64::NEG_INFINITY, f64::max);
    Ok(AccuracyTable {
        rows,
        mean,
        min,
        max,
    })
}
