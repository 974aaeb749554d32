//! Invariant inference: estimate α from a batch by minimizing the output
//! entropy over the transformation domain, basin-hopping style.

use crate::error::{Result, ScnError};
use crate::rng::{SeedRng, Stream};
use crate::scalar::Scalar;
use crate::scn::SCNModel;
use crate::tensor::Tensor;
use crate::transforms::{AlphaParam, TransformFamily};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub temperature: f64,
    /// Iterations of derivative-free local refinement per restart.
    pub refine_iters: usize,
    /// Perturbation scale as a fraction of each coordinate's span.
    pub perturb: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 100,
            temperature: 0.1,
            refine_iters: 24,
            perturb: 0.25,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 || self.temperature <= 0.0 {
            return Err(ScnError::Invalid(
                "search needs restarts >= 1 and T > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub alpha: AlphaParam,
    pub entropy: f64,
    pub best_restart: usize,
    pub trace: Vec<(AlphaParam, f64)>,
}

/// Box/periodic search domain for one family, in the native parameters.
/// Angles search the scalar z ∈ [−1, 1] mapped to (1+z)·π and wrapped.
struct Domain {
    family: TransformFamily,
    lo: Vec<f64>,
    hi: Vec<f64>,
    wrap: Vec<bool>,
}

impl Domain {
    fn of(family: TransformFamily) -> Domain {
        match family {
            TransformFamily::Rotation2D => Domain {
                family,
                lo: vec![-1.0],
                hi: vec![1.0],
                wrap: vec![true],
            },
            TransformFamily::Translation => Domain {
                family,
                lo: vec![-8.0, -8.0],
                hi: vec![8.0, 8.0],
                wrap: vec![false, false],
            },
            TransformFamily::Rotation3DProject => Domain {
                family,
                lo: vec![-1.0; 3],
                hi: vec![1.0; 3],
                wrap: vec![true; 3],
            },
            _ => Domain {
                family,
                lo: vec![0.2],
                hi: vec![2.0],
                wrap: vec![false],
            },
        }
    }

    fn dims(&self) -> usize {
        self.lo.len()
    }

    fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            if self.wrap[i] {
                let span = self.hi[i] - self.lo[i];
                let mut v = (x[i] - self.lo[i]) % span;
                if v < 0.0 {
                    v += span;
                }
                x[i] = self.lo[i] + v;
            } else {
                x[i] = x[i].clamp(self.lo[i], self.hi[i]);
            }
        }
    }

    fn to_alpha(&self, x: &[f64]) -> AlphaParam {
        match self.family {
            TransformFamily::Rotation2D => AlphaParam::rotation((1.0 + x[0]) * PI),
            TransformFamily::Rotation3DProject => AlphaParam::euler(
                (1.0 + x[0]) * PI,
                (1.0 + x[1]) * PI,
                (1.0 + x[2]) * PI,
            ),
            TransformFamily::Translation => AlphaParam::translation(x[0], x[1]),
            f => AlphaParam::factor(f, x[0]),
        }
    }

    fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(l, h)| (l + h) / 2.0)
            .collect()
    }
}

/// Summed per-row entropy of the SCN output at α on an already-transformed
/// batch; the objective of the search.
pub fn batch_entropy<T: Scalar>(
    scn: &SCNModel<T>,
    alpha: &AlphaParam,
    batch: &Tensor<T>,
) -> Result<f64> {
    let logits = scn.forward(alpha, batch.clone())?;
    Ok(entropy_of(&logits))
}

fn entropy_of<T: Scalar>(logits: &Tensor<T>) -> f64 {
    let c = logits.shape[1];
    let mut total = 0.0f64;
    for row in logits.data.chunks_exact(c) {
        let max = row
            .iter()
            .map(|v| v.to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row {
            z += libm::exp(v.to_f64() - max);
        }
        let lz = libm::log(z);
        for v in row {
            let lp = v.to_f64() - max - lz;
            total -= libm::exp(lp) * lp;
        }
    }
    total
}

/// Basin-hopping-style minimization of an arbitrary objective over the
/// family domain; exposed so tests can probe stub objectives.
pub fn minimize(
    family: TransformFamily,
    cfg: &SearchConfig,
    mut f: impl FnMut(&AlphaParam) -> Result<f64>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let dom = Domain::of(family);
    let mut rng = SeedRng::stream(cfg.seed, Stream::Search);

    let mut x = dom.center();
    let mut fx = f(&dom.to_alpha(&x))?;
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut best_restart = 0usize;
    let mut trace = Vec::with_capacity(cfg.restarts + 1);
    trace.push((dom.to_alpha(&x), fx));

    for r in 0..cfg.restarts {
        let mut cand = x.clone();
        for i in 0..dom.dims() {
            let span = dom.hi[i] - dom.lo[i];
            cand[i] += rng.uniform(-1.0, 1.0) * cfg.perturb * span;
        }
        dom.clamp(&mut cand);
        let mut fc = if dom.dims() == 1 {
            golden_refine(&dom, &mut f, &mut cand, cfg)?
        } else {
            simplex_refine(&dom, &mut f, &mut cand, cfg, &mut rng)?
        };
        if !fc.is_finite() {
            fc = f64::INFINITY;
        }
        trace.push((dom.to_alpha(&cand), fc));
        if fc < best_f {
            best_f = fc;
            best_x = cand.clone();
            best_restart = r + 1;
        }
        // Metropolis acceptance of the new incumbent
        let accept = fc < fx || {
            let u = rng.uniform(0.0, 1.0);
            u < libm::exp(-(fc - fx) / cfg.temperature)
        };
        if accept {
            x = cand;
            fx = fc;
        }
    }

    Ok(SearchResult {
        alpha: dom.to_alpha(&best_x),
        entropy: best_f,
        best_restart,
        trace,
    })
}

/// Golden-section refinement of a 1-D coordinate in a bracket around x.
fn golden_refine(
    dom: &Domain,
    f: &mut impl FnMut(&AlphaParam) -> Result<f64>,
    x: &mut Vec<f64>,
    cfg: &SearchConfig,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let span = (dom.hi[0] - dom.lo[0]) * cfg.perturb;
    let mut a = x[0] - span;
    let mut b = x[0] + span;
    if !dom.wrap[0] {
        a = a.max(dom.lo[0]);
        b = b.min(dom.hi[0]);
    }
    let eval = |f: &mut dyn FnMut(&AlphaParam) -> Result<f64>, t: f64| -> Result<f64> {
        let mut v = vec![t];
        dom.clamp(&mut v);
        f(&dom.to_alpha(&v))
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(f, c)?;
    let mut fd = eval(f, d)?;
    for _ in 0..cfg.refine_iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(f, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(f, d)?;
        }
    }
    let t = if fc < fd { c } else { d };
    let ft = if fc < fd { fc } else { fd };
    x[0] = t;
    dom.clamp(x);
    Ok(ft)
}

/// Small Nelder–Mead-style simplex refinement for vector domains.
fn simplex_refine(
    dom: &Domain,
    f: &mut impl FnMut(&AlphaParam) -> Result<f64>,
    x: &mut Vec<f64>,
    cfg: &SearchConfig,
    rng: &mut SeedRng,
) -> Result<f64> {
    let n = dom.dims();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    let step = cfg.perturb * 0.5;
    pts.push(x.clone());
    for i in 0..n {
        let mut p = x.clone();
        p[i] += (dom.hi[i] - dom.lo[i]) * step * if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        dom.clamp(&mut p);
        pts.push(p);
    }
    for p in &pts {
        vals.push(f(&dom.to_alpha(p))?);
    }

    for _ in 0..cfg.refine_iters {
        // order: best first
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(core::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for &i in &order[..n] {
            for k in 0..n {
                cen[k] += pts[i][k] / n as f64;
            }
        }
        // reflect
        let mut refl = vec![0.0; n];
        for k in 0..n {
            refl[k] = cen[k] + (cen[k] - pts[worst][k]);
        }
        dom.clamp(&mut refl);
        let fr = f(&dom.to_alpha(&refl))?;
        if fr < vals[best] {
            // expand
            let mut exp = vec![0.0; n];
            for k in 0..n {
                exp[k] = cen[k] + 2.0 * (cen[k] - pts[worst][k]);
            }
            dom.clamp(&mut exp);
            let fe = f(&dom.to_alpha(&exp))?;
            if fe < fr {
                pts[worst] = exp;
                vals[worst] = fe;
            } else {
                pts[worst] = refl;
                vals[worst] = fr;
            }
        } else if fr < vals[worst] {
            pts[worst] = refl;
            vals[worst] = fr;
        } else {
            // contract toward the best point
            let bp = pts[best].clone();
            let mut contracted = vec![0.0; n];
            for k in 0..n {
                contracted[k] = (pts[worst][k] + bp[k]) / 2.0;
            }
            dom.clamp(&mut contracted);
            let fcn = f(&dom.to_alpha(&contracted))?;
            if fcn < vals[worst] {
                pts[worst] = contracted;
                vals[worst] = fcn;
            } else {
                // shrink everything toward best
                for i in 0..pts.len() {
                    if i == best {
                        continue;
                    }
                    for k in 0..n {
                        pts[i][k] = (pts[i][k] + bp[k]) / 2.0;
                    }
                    dom.clamp(&mut pts[i]);
                    vals[i] = f(&dom.to_alpha(&pts[i]))?;
                }
            }
        }
    }
    let mut besti = 0;
    for i in 1..vals.len() {
        if vals[i] < vals[besti] {
            besti = i;
        }
    }
    *x = pts[besti].clone();
    Ok(vals[besti])
}

/// Estimate α of an already-transformed batch by entropy minimization.
pub fn search_alpha<T: Scalar>(
    scn: &SCNModel<T>,
    batch: &Tensor<T>,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if batch.shape.first().copied().unwrap_or(0) == 0 {
        return Err(ScnError::Invalid("empty search batch".into()));
    }
    minimize(scn.family, cfg, |alpha| batch_entropy(scn, alpha, batch))
}

/// Classify a transformed batch at the searched α̂.
pub fn invariant_predict<T: Scalar>(
    scn: &SCNModel<T>,
    batch: &Tensor<T>,
    cfg: &SearchConfig,
) -> Result<(Vec<usize>, SearchResult)> {
    let res = search_alpha(scn, batch, cfg)?;
    let logits = scn.forward(&res.alpha, batch.clone())?;
    let c = logits.shape[1];
    let labels = logits
        .data
        .chunks_exact(c)
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
    Ok((labels, res))
}
