//! Deterministic data supply: synthetic 2D shape images and 3D point
//! clouds, plus label-stratified splitting. File loading lives in the tools
//! crate; this module only produces in-memory sets.

use crate::error::{Result, ScnError};
use crate::rng::{SeedRng, Stream};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub const CLOUD_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub p: usize,
    pub channels: usize,
    /// `count * channels * p * p` floats in [0, 1].
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub classes: usize,
    pub split: String,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.p * self.p
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.len() * self.image_len() {
            return Err(ScnError::ShapeMismatch(format!(
                "{} images vs {} labels",
                self.images.len() / self.image_len().max(1),
                self.len()
            )));
        }
        for &l in &self.labels {
            if l as usize >= self.classes {
                return Err(ScnError::LabelOutOfRange {
                    label: l as usize,
                    classes: self.classes,
                });
            }
        }
        if !self.images.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(ScnError::Invalid("pixel outside [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloudSet {
    /// Points per cloud.
    pub n_points: usize,
    /// `count * n_points * 3` floats, per-cloud max norm ≤ 1 + 1e-6.
    pub clouds: Vec<f32>,
    pub labels: Vec<u8>,
    pub classes: usize,
}

impl LabeledCloudSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cloud(&self, i: usize) -> &[f32] {
        let n = self.n_points * 3;
        &self.clouds[i * n..(i + 1) * n]
    }
}

const TAU: f64 = 2.0 * PI;

/// Signed-distance render: value = intensity * clamp(0.5 - d, 0, 1), with d
/// the signed distance in pixels, so edges get one soft pixel.
fn render_sdf(p: usize, intensity: f64, sdf: impl Fn(f64, f64) -> f64) -> Vec<f32> {
    let c = (p as f64 - 1.0) / 2.0;
    let mut img = vec![0.0f32; p * p];
    for i in 0..p {
        for j in 0..p {
            let d = sdf(j as f64 - c, i as f64 - c);
            let cov = (0.5 - d).clamp(0.0, 1.0);
            img[i * p + j] = (intensity * cov) as f32;
        }
    }
    img
}

fn bar(x: f64, y: f64, hw: f64, hh: f64) -> f64 {
    let dx = x.abs() - hw;
    let dy = y.abs() - hh;
    dx.max(dy)
}

/// 32×32 grayscale shapes, 10 classes, jittered position/size/intensity.
pub fn gen_shapes2d(n: usize, seed: u64) -> Result<LabeledImageSet> {
    if n < 10 {
        return Err(ScnError::Invalid(format!("need n >= 10, got {n}")));
    }
    let p = 32usize;
    let mut rng = SeedRng::stream(seed, Stream::DataGen);
    let mut images = Vec::with_capacity(n * p * p);
    let mut labels = Vec::with_capacity(n);
    for idx in 0..n {
        let class = (idx % 10) as u8;
        let ox = rng.uniform(-3.0, 3.0);
        let oy = rng.uniform(-3.0, 3.0);
        let s = rng.uniform(0.8, 1.2);
        let intensity = rng.uniform(0.6, 1.0);
        let img = render_sdf(p, intensity, |x, y| {
            let (x, y) = ((x - ox) / s, (y - oy) / s);
            shape_sdf(class, x, y)
        });
        images.extend_from_slice(&img);
        labels.push(class);
    }
    Ok(LabeledImageSet {
        p,
        channels: 1,
        images,
        labels,
        classes: 10,
        split: "all".into(),
    })
}

fn shape_sdf(class: u8, x: f64, y: f64) -> f64 {
    let r = libm::sqrt(x * x + y * y);
    match class {
        // disk
        0 => r - 8.0,
        // ring
        1 => (r - 8.0).abs() - 2.2,
        // square
        2 => x.abs().max(y.abs()) - 7.0,
        // triangle (upward, asymmetric in y so rotations are informative)
        3 => {
            let e1 = -y - 7.0; // below the top vertex region
            let e2 = 0.6 * x + 0.8 * y - 5.6;
            let e3 = -0.6 * x + 0.8 * y - 5.6;
            e1.max(e2).max(e3)
        }
        // cross
        4 => bar(x, y, 9.0, 2.4).min(bar(x, y, 2.4, 9.0)),
        // bar-h
        5 => bar(x, y, 9.5, 2.6),
        // bar-v
        6 => bar(x, y, 2.6, 9.5),
        // L
        7 => bar(x + 4.0, y, 2.2, 8.0).min(bar(x, y - 5.8, 6.2, 2.2)),
        // checker: 2x2 blocks inside a square
        8 => {
            let sq = x.abs().max(y.abs()) - 8.0;
            let cell_on = ((x + 8.0) / 8.0) as i64 % 2 == ((y + 8.0) / 8.0) as i64 % 2;
            if cell_on {
                sq
            } else {
                1.0
            }
        }
        // dot-pair, deliberately unequal radii
        9 => {
            let d1 = libm::sqrt((x + 4.5) * (x + 4.5) + (y + 4.5) * (y + 4.5)) - 4.2;
            let d2 = libm::sqrt((x - 4.5) * (x - 4.5) + (y - 4.5) * (y - 4.5)) - 2.2;
            d1.min(d2)
        }
        _ => unreachable!(),
    }
}

/// 10 procedural solid classes, 4096 surface points per cloud, unit
/// normalized.
pub fn gen_clouds3d(n: usize, seed: u64) -> Result<LabeledCloudSet> {
    if n < 10 {
        return Err(ScnError::Invalid(format!("need n >= 10, got {n}")));
    }
    let mut rng = SeedRng::stream(seed, Stream::DataGen);
    let mut clouds = Vec::with_capacity(n * CLOUD_POINTS * 3);
    let mut labels = Vec::with_capacity(n);
    for idx in 0..n {
        let class = (idx % 10) as u8;
        // per-axis stretch jitter; spheres stay exact so their norm
        // signature survives
        let jitter = if class == 1 {
            [1.0, 1.0, 1.0]
        } else {
            [
                rng.uniform(0.8, 1.2),
                rng.uniform(0.8, 1.2),
                rng.uniform(0.8, 1.2),
            ]
        };
        let mut pts = vec![0.0f64; CLOUD_POINTS * 3];
        for k in 0..CLOUD_POINTS {
            let q = surface_point(class, &mut rng);
            pts[k * 3] = q[0] * jitter[0];
            pts[k * 3 + 1] = q[1] * jitter[1];
            pts[k * 3 + 2] = q[2] * jitter[2];
        }
        let max_norm = pts
            .chunks_exact(3)
            .map(|v| libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            .fold(0.0f64, f64::max)
            .max(1e-12);
        for v in &pts {
            clouds.push((v / max_norm) as f32);
        }
        labels.push(class);
    }
    Ok(LabeledCloudSet {
        n_points: CLOUD_POINTS,
        clouds,
        labels,
        classes: 10,
    })
}

fn surface_point(class: u8, rng: &mut SeedRng) -> [f64; 3] {
    match class {
        // cube surface
        0 => cuboid_surface(rng, 0.7, 0.7, 0.7),
        // sphere surface
        1 => {
            let z = rng.uniform(-1.0, 1.0);
            let t = rng.uniform(0.0, TAU);
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            [r * libm::cos(t), r * libm::sin(t), z]
        }
        // cylinder: side + caps, area-weighted
        2 => {
            let (r, h) = (0.5, 0.8);
            let side = TAU * r * 2.0 * h;
            let caps = 2.0 * PI * r * r;
            let t = rng.uniform(0.0, TAU);
            if rng.uniform(0.0, side + caps) < side {
                [r * libm::cos(t), r * libm::sin(t), rng.uniform(-h, h)]
            } else {
                let rr = r * libm::sqrt(rng.uniform(0.0, 1.0));
                let z = if rng.uniform(0.0, 1.0) < 0.5 { h } else { -h };
                [rr * libm::cos(t), rr * libm::sin(t), z]
            }
        }
        // cone: lateral + base
        3 => {
            let (r, h) = (0.6, 1.2);
            let t = rng.uniform(0.0, TAU);
            if rng.uniform(0.0, 1.0) < 0.7 {
                let u = libm::sqrt(rng.uniform(0.0, 1.0));
                let rr = r * u;
                [rr * libm::cos(t), rr * libm::sin(t), h * (1.0 - u) - h / 2.0]
            } else {
                let rr = r * libm::sqrt(rng.uniform(0.0, 1.0));
                [rr * libm::cos(t), rr * libm::sin(t), -h / 2.0]
            }
        }
        // torus
        4 => {
            let (big, small) = (0.6, 0.22);
            let u = rng.uniform(0.0, TAU);
            let v = rng.uniform(0.0, TAU);
            let w = big + small * libm::cos(v);
            [w * libm::cos(u), w * libm::sin(u), small * libm::sin(v)]
        }
        // pyramid: 4 lateral triangles + square base
        5 => {
            let apex = [0.0, 0.0, 0.9];
            let b = 0.7;
            let base = [
                [-b, -b, -0.45],
                [b, -b, -0.45],
                [b, b, -0.45],
                [-b, b, -0.45],
            ];
            if rng.uniform(0.0, 1.0) < 0.65 {
                let f = rng.below(4) as usize;
                triangle_point(rng, base[f], base[(f + 1) % 4], apex)
            } else {
                [rng.uniform(-b, b), rng.uniform(-b, b), -0.45]
            }
        }
        // box-frame: points along the 12 edges of a cube
        6 => {
            let e = rng.below(12) as usize;
            let t = rng.uniform(-0.7, 0.7);
            let s = 0.7;
            let signs = [(-s, -s), (-s, s), (s, -s), (s, s)];
            let (a, b) = signs[e % 4];
            match e / 4 {
                0 => [t, a, b],
                1 => [a, t, b],
                _ => [a, b, t],
            }
        }
        // two spheres of different radii along x
        7 => {
            let (r, cx) = if rng.uniform(0.0, 1.0) < 0.5 {
                (0.42, -0.5)
            } else {
                (0.28, 0.55)
            };
            let z = rng.uniform(-1.0, 1.0);
            let t = rng.uniform(0.0, TAU);
            let rr = libm::sqrt((1.0 - z * z).max(0.0));
            [cx + r * rr * libm::cos(t), r * rr * libm::sin(t), r * z]
        }
        // thin disk in the xy plane
        8 => {
            let rr = 0.9 * libm::sqrt(rng.uniform(0.0, 1.0));
            let t = rng.uniform(0.0, TAU);
            [rr * libm::cos(t), rr * libm::sin(t), rng.uniform(-0.03, 0.03)]
        }
        // three orthogonal beams
        9 => {
            let axis = rng.below(3) as usize;
            let q = cuboid_surface(rng, 0.9, 0.18, 0.18);
            match axis {
                0 => q,
                1 => [q[1], q[0], q[2]],
                _ => [q[2], q[1], q[0]],
            }
        }
        _ => unreachable!(),
    }
}

fn cuboid_surface(rng: &mut SeedRng, hx: f64, hy: f64, hz: f64) -> [f64; 3] {
    // face picked by area
    let areas = [hy * hz, hx * hz, hx * hy];
    let total: f64 = areas.iter().sum::<f64>() * 2.0;
    let mut pick = rng.uniform(0.0, total);
    let mut face = 0usize;
    for (i, &a) in areas.iter().enumerate() {
        if pick < 2.0 * a {
            face = i;
            break;
        }
        pick -= 2.0 * a;
    }
    let sign = if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
    let u = rng.uniform(-1.0, 1.0);
    let v = rng.uniform(-1.0, 1.0);
    match face {
        0 => [sign * hx, u * hy, v * hz],
        1 => [u * hx, sign * hy, v * hz],
        _ => [u * hx, v * hy, sign * hz],
    }
}

fn triangle_point(rng: &mut SeedRng, a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let mut u = rng.uniform(0.0, 1.0);
    let mut v = rng.uniform(0.0, 1.0);
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    [
        a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
        a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
        a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2]),
    ]
}

/// Label-stratified two-way split with a seeded shuffle.
pub fn split(
    set: &LabeledImageSet,
    train_frac: f64,
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(ScnError::Invalid(format!("bad fraction {train_frac}")));
    }
    let mut rng = SeedRng::stream(seed, Stream::DataShuffle);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); set.classes];
    for (i, &l) in set.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for idxs in &mut by_class {
        rng.shuffle(idxs);
        let k = libm::round(train_frac * idxs.len() as f64) as usize;
        train_idx.extend_from_slice(&idxs[..k]);
        test_idx.extend_from_slice(&idxs[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(ScnError::Invalid("split produced an empty side".into()));
    }
    Ok((
        subset(set, &train_idx, "train"),
        subset(set, &test_idx, "test"),
    ))
}

fn subset(set: &LabeledImageSet, idx: &[usize], tag: &str) -> LabeledImageSet {
    let n = set.image_len();
    let mut images = Vec::with_capacity(idx.len() * n);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        images.extend_from_slice(set.image(i));
        labels.push(set.labels[i]);
    }
    LabeledImageSet {
        p: set.p,
        channels: set.channels,
        images,
        labels,
        classes: set.classes,
        split: tag.into(),
    }
}

/// Stratified split for cloud sets.
pub fn split_clouds(
    set: &LabeledCloudSet,
    train_frac: f64,
    seed: u64,
) -> Result<(LabeledCloudSet, LabeledCloudSet)> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(ScnError::Invalid(format!("bad fraction {train_frac}")));
    }
    let mut rng = SeedRng::stream(seed, Stream::DataShuffle);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); set.classes];
    for (i, &l) in set.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for idxs in &mut by_class {
        rng.shuffle(idxs);
        let k = libm::round(train_frac * idxs.len() as f64) as usize;
        train_idx.extend_from_slice(&idxs[..k]);
        test_idx.extend_from_slice(&idxs[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(ScnError::Invalid("split produced an empty side".into()));
    }
    let take = |idx: &[usize]| {
        let n = set.n_points * 3;
        let mut clouds = Vec::with_capacity(idx.len() * n);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            clouds.extend_from_slice(set.cloud(i));
            labels.push(set.labels[i]);
        }
        LabeledCloudSet {
            n_points: set.n_points,
            clouds,
            labels,
            classes: set.classes,
        }
    };
    Ok((take(&train_idx), take(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_deterministic_and_balanced() {
        let a = gen_shapes2d(1000, 3).unwrap();
        let b = gen_shapes2d(1000, 3).unwrap();
        assert_eq!(a, b);
        let c = gen_shapes2d(1000, 4).unwrap();
        assert_ne!(a.images, c.images);
        a.validate().unwrap();

        let mut counts = [0usize; 10];
        for &l in &a.labels {
            counts[l as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 100), "{counts:?}");
    }

    #[test]
    fn shapes_rejects_tiny_n() {
        assert!(gen_shapes2d(5, 1).is_err());
    }

    #[test]
    fn shape_classes_are_visually_distinct() {
        // mean pairwise L2 distance between per-class mean images stays
        // well above zero
        let set = gen_shapes2d(500, 9).unwrap();
        let n = set.image_len();
        let mut means = vec![vec![0.0f64; n]; 10];
        let mut counts = [0usize; 10];
        for i in 0..set.len() {
            let l = set.labels[i] as usize;
            counts[l] += 1;
            for (m, &v) in means[l].iter_mut().zip(set.image(i)) {
                *m += v as f64;
            }
        }
        for (m, &c) in means.iter_mut().zip(counts.iter()) {
            for v in m.iter_mut() {
                *v /= c as f64;
            }
        }
        for a in 0..10 {
            for b in a + 1..10 {
                let d: f64 = means[a]
                    .iter()
                    .zip(means[b].iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(d > 1.0, "classes {a} and {b} nearly identical (d={d})");
            }
        }
    }

    #[test]
    fn clouds_deterministic_and_normalized() {
        let a = gen_clouds3d(20, 5).unwrap();
        let b = gen_clouds3d(20, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for i in 0..a.len() {
            for pt in a.cloud(i).chunks_exact(3) {
                let norm = (pt[0] as f64).hypot(pt[1] as f64).hypot(pt[2] as f64);
                assert!(norm <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn sphere_class_points_lie_on_surface() {
        let set = gen_clouds3d(20, 6).unwrap();
        for i in 0..set.len() {
            if set.labels[i] != 1 {
                continue;
            }
            let norms: Vec<f64> = set
                .cloud(i)
                .chunks_exact(3)
                .map(|pt| (pt[0] as f64).hypot(pt[1] as f64).hypot(pt[2] as f64))
                .collect();
            let mean = norms.iter().sum::<f64>() / norms.len() as f64;
            let var = norms.iter().map(|n| (n - mean) * (n - mean)).sum::<f64>() / norms.len() as f64;
            assert!(var.sqrt() < 0.01, "sphere norm stddev {}", var.sqrt());
        }
    }

    #[test]
    fn split_is_stratified_disjoint_and_seeded() {
        let set = gen_shapes2d(1000, 7).unwrap();
        let (tr, te) = split(&set, 0.8, 11).unwrap();
        assert_eq!(tr.len() + te.len(), set.len());
        let mut tr_counts = [0usize; 10];
        let mut te_counts = [0usize; 10];
        for &l in &tr.labels {
            tr_counts[l as usize] += 1;
        }
        for &l in &te.labels {
            te_counts[l as usize] += 1;
        }
        for c in 0..10 {
            assert!((tr_counts[c] as i64 - 80).abs() <= 1, "{tr_counts:?}");
            assert!((te_counts[c] as i64 - 20).abs() <= 1, "{te_counts:?}");
        }
        let (tr2, te2) = split(&set, 0.8, 11).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        let (tr3, _) = split(&set, 0.8, 12).unwrap();
        assert_ne!(tr.images, tr3.images);
    }

    #[test]
    fn split_rejects_empty_side() {
        let set = gen_shapes2d(100, 8).unwrap();
        assert!(split(&set, 1.0, 1).is_err());
    }
}
