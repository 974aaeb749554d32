//! Parameterized, label-preserving input transformations T(α, x), their
//! encodings for the configuration network, uniform sampling, and inverses
//! where they exist.
//!
//! Images are flat `[C, P, P]` slices of f32 in `[0, 1]`; coordinate math is
//! done in f64 so that quarter turns and integer shifts stay bit-exact.

use crate::error::{Result, ScnError};
use crate::rng::SeedRng;
use crate::scalar::Scalar;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

const TAU: f64 = 2.0 * PI;
/// Source coordinates closer than this to a grid point are snapped, so
/// quarter turns and integer shifts are exact permutations.
const GRID_SNAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformFamily {
    Rotation2D,
    Scaling,
    Translation,
    Brightness,
    Contrast,
    Saturation,
    Sharpness,
    Rotation3DProject,
}

impl TransformFamily {
    /// Number of native parameters.
    pub fn arity(self) -> usize {
        match self {
            TransformFamily::Translation => 2,
            TransformFamily::Rotation3DProject => 3,
            _ => 1,
        }
    }

    /// Encoding size S' fed to the configuration network.
    pub fn encoding_size(self) -> usize {
        match self {
            TransformFamily::Rotation2D => 2,
            TransformFamily::Translation => 2,
            TransformFamily::Rotation3DProject => 6,
            _ => 1,
        }
    }

    pub fn is_factor(self) -> bool {
        matches!(
            self,
            TransformFamily::Scaling
                | TransformFamily::Brightness
                | TransformFamily::Contrast
                | TransformFamily::Saturation
                | TransformFamily::Sharpness
        )
    }

    /// True when the family acts on point clouds instead of images.
    pub fn needs_cloud(self) -> bool {
        self == TransformFamily::Rotation3DProject
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformFamily::Rotation2D => "rotation2d",
            TransformFamily::Scaling => "scaling",
            TransformFamily::Translation => "translation",
            TransformFamily::Brightness => "brightness",
            TransformFamily::Contrast => "contrast",
            TransformFamily::Saturation => "saturation",
            TransformFamily::Sharpness => "sharpness",
            TransformFamily::Rotation3DProject => "rotation3d",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "rotation2d" => TransformFamily::Rotation2D,
            "scaling" => TransformFamily::Scaling,
            "translation" => TransformFamily::Translation,
            "brightness" => TransformFamily::Brightness,
            "contrast" => TransformFamily::Contrast,
            "saturation" => TransformFamily::Saturation,
            "sharpness" => TransformFamily::Sharpness,
            "rotation3d" => TransformFamily::Rotation3DProject,
            _ => return None,
        })
    }
}

/// Native transformation parameters for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaParam {
    pub family: TransformFamily,
    pub raw: Vec<f64>,
}

fn wrap_tau(phi: f64) -> f64 {
    let r = phi % TAU;
    if r < 0.0 {
        r + TAU
    } else {
        r
    }
}

/// Wrap into (−π, π].
fn wrap_pi(phi: f64) -> f64 {
    let r = wrap_tau(phi);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

impl AlphaParam {
    pub fn rotation(phi: f64) -> Self {
        AlphaParam {
            family: TransformFamily::Rotation2D,
            raw: vec![wrap_tau(phi)],
        }
    }

    pub fn factor(family: TransformFamily, f: f64) -> Self {
        debug_assert!(family.is_factor());
        AlphaParam {
            family,
            raw: vec![f],
        }
    }

    pub fn translation(ax: f64, ay: f64) -> Self {
        AlphaParam {
            family: TransformFamily::Translation,
            raw: vec![ax, ay],
        }
    }

    pub fn euler(phi1: f64, phi2: f64, phi3: f64) -> Self {
        AlphaParam {
            family: TransformFamily::Rotation3DProject,
            raw: vec![wrap_pi(phi1), wrap_pi(phi2), wrap_pi(phi3)],
        }
    }

    /// The do-nothing parameter of each family.
    pub fn identity(family: TransformFamily) -> Self {
        match family {
            TransformFamily::Rotation2D => AlphaParam::rotation(0.0),
            TransformFamily::Translation => AlphaParam::translation(0.0, 0.0),
            TransformFamily::Rotation3DProject => AlphaParam::euler(0.0, 0.0, 0.0),
            f => AlphaParam::factor(f, 1.0),
        }
    }

    pub fn in_domain(&self) -> bool {
        if self.raw.len() != self.family.arity() || self.raw.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.family {
            TransformFamily::Rotation2D => (0.0..TAU).contains(&self.raw[0]),
            TransformFamily::Translation => self.raw.iter().all(|v| (-8.0..=8.0).contains(v)),
            TransformFamily::Rotation3DProject => {
                self.raw.iter().all(|v| *v > -PI - 1e-12 && *v <= PI + 1e-12)
            }
            _ => (0.2..=2.0).contains(&self.raw[0]),
        }
    }
}

/// Encode native parameters for the configuration network.
///
/// Rotation angles become (cos, sin) pairs so the encoding is periodic;
/// shifts and scalar factors are min-max scaled to [−1, 1].
pub fn encode_alpha(alpha: &AlphaParam) -> Result<Vec<f64>> {
    if !alpha.in_domain() {
        return Err(ScnError::DomainViolation(format!(
            "{:?} out of {} domain",
            alpha.raw,
            alpha.family.name()
        )));
    }
    Ok(match alpha.family {
        TransformFamily::Rotation2D => {
            vec![libm::cos(alpha.raw[0]), libm::sin(alpha.raw[0])]
        }
        TransformFamily::Rotation3DProject => {
            let mut enc = Vec::with_capacity(6);
            for &phi in &alpha.raw {
                enc.push(libm::cos(phi));
                enc.push(libm::sin(phi));
            }
            enc
        }
        TransformFamily::Translation => vec![alpha.raw[0] / 8.0, alpha.raw[1] / 8.0],
        _ => vec![2.0 * (alpha.raw[0] - 0.2) / 1.8 - 1.0],
    })
}

/// Uniform draw over the family domain.
pub fn sample_alpha(family: TransformFamily, rng: &mut SeedRng) -> AlphaParam {
    match family {
        TransformFamily::Rotation2D => AlphaParam::rotation(rng.uniform(0.0, TAU)),
        TransformFamily::Translation => {
            let ax = rng.uniform(-8.0, 8.0);
            let ay = rng.uniform(-8.0, 8.0);
            AlphaParam::translation(ax, ay)
        }
        TransformFamily::Rotation3DProject => {
            let a = rng.uniform(-PI, PI);
            let b = rng.uniform(-PI, PI);
            let c = rng.uniform(-PI, PI);
            AlphaParam::euler(a, b, c)
        }
        f => AlphaParam::factor(f, rng.uniform(0.2, 2.0)),
    }
}

/// Parameter-level inverse; `None` where the transform destroys information
/// beyond recovery (sharpness convolution, 3D projection).
pub fn inverse(alpha: &AlphaParam) -> Option<AlphaParam> {
    match alpha.family {
        TransformFamily::Rotation2D => Some(AlphaParam::rotation(-alpha.raw[0])),
        TransformFamily::Translation => {
            Some(AlphaParam::translation(-alpha.raw[0], -alpha.raw[1]))
        }
        TransformFamily::Scaling
        | TransformFamily::Brightness
        | TransformFamily::Contrast
        | TransformFamily::Saturation => {
            let inv = (1.0 / alpha.raw[0]).clamp(0.2, 2.0);
            Some(AlphaParam::factor(alpha.family, inv))
        }
        TransformFamily::Sharpness | TransformFamily::Rotation3DProject => None,
    }
}

/// Bilinear lookup at (sy, sx) in one channel plane; zero outside, snapped
/// to the grid when within `GRID_SNAP` of a lattice point.
fn sample_bilinear(plane: &[f32], p: usize, sy: f64, sx: f64) -> f32 {
    let at = |y: i64, x: i64| -> f64 {
        if y < 0 || x < 0 || y >= p as i64 || x >= p as i64 {
            0.0
        } else {
            plane[y as usize * p + x as usize] as f64
        }
    };
    let (ry, rx) = (libm::round(sy), libm::round(sx));
    if (sy - ry).abs() < GRID_SNAP && (sx - rx).abs() < GRID_SNAP {
        let (y, x) = (ry as i64, rx as i64);
        if y < 0 || x < 0 || y >= p as i64 || x >= p as i64 {
            return 0.0;
        }
        return plane[y as usize * p + x as usize];
    }
    let y0 = libm::floor(sy);
    let x0 = libm::floor(sx);
    let fy = sy - y0;
    let fx = sx - x0;
    let (y0, x0) = (y0 as i64, x0 as i64);
    let v = at(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + at(y0, x0 + 1) * (1.0 - fy) * fx
        + at(y0 + 1, x0) * fy * (1.0 - fx)
        + at(y0 + 1, x0 + 1) * fy * fx;
    v as f32
}

/// Inverse-map every output pixel through `src(dy, dx) -> (sy, sx)`.
fn warp(
    img: &[f32],
    channels: usize,
    p: usize,
    src: impl Fn(f64, f64) -> (f64, f64),
) -> Vec<f32> {
    let c = (p as f64 - 1.0) / 2.0;
    let mut out = vec![0.0f32; channels * p * p];
    for ch in 0..channels {
        let plane = &img[ch * p * p..(ch + 1) * p * p];
        let oplane = &mut out[ch * p * p..(ch + 1) * p * p];
        for i in 0..p {
            let dy = i as f64 - c;
            for j in 0..p {
                let dx = j as f64 - c;
                let (sy, sx) = src(dy, dx);
                oplane[i * p + j] = sample_bilinear(plane, p, c + sy, c + sx);
            }
        }
    }
    out
}

/// Counter-clockwise rotation about the image center, bilinear, zero fill.
pub fn rotate2d(img: &[f32], channels: usize, p: usize, phi: f64) -> Vec<f32> {
    let (cphi, sphi) = (libm::cos(phi), libm::sin(phi));
    warp(img, channels, p, |dy, dx| {
        (sphi * dx + cphi * dy, cphi * dx - sphi * dy)
    })
}

/// Center-anchored scaling: f > 1 magnifies (crops), f < 1 shrinks (zero pad).
pub fn scale2d(img: &[f32], channels: usize, p: usize, f: f64) -> Vec<f32> {
    warp(img, channels, p, |dy, dx| (dy / f, dx / f))
}

/// Shift content by (αx right, αy down), bilinear, zero fill.
pub fn translate2d(img: &[f32], channels: usize, p: usize, ax: f64, ay: f64) -> Vec<f32> {
    warp(img, channels, p, |dy, dx| (dy - ay, dx - ax))
}

fn clamp01(v: f64) -> f32 {
    v.clamp(0.0, 1.0) as f32
}

fn gray_at(img: &[f32], channels: usize, pix: usize, plane: usize) -> f64 {
    if channels >= 3 {
        0.299 * img[pix] as f64 + 0.587 * img[plane + pix] as f64 + 0.114 * img[2 * plane + pix] as f64
    } else {
        img[pix] as f64
    }
}

pub fn brightness(img: &[f32], f: f64) -> Vec<f32> {
    img.iter().map(|&x| clamp01(f * x as f64)).collect()
}

/// Blend against the global grayscale mean; written as x + (f−1)(x−μ) so
/// f = 1 is a bit-level identity.
pub fn contrast(img: &[f32], channels: usize, p: usize, f: f64) -> Vec<f32> {
    let plane = p * p;
    let mu = (0..plane).map(|pix| gray_at(img, channels, pix, plane)).sum::<f64>() / plane as f64;
    img.iter()
        .map(|&x| {
            let x = x as f64;
            clamp01(x + (f - 1.0) * (x - mu))
        })
        .collect()
}

/// Blend each pixel against its own gray value; identity on 1-channel input.
pub fn saturation(img: &[f32], channels: usize, p: usize, f: f64) -> Vec<f32> {
    if channels < 3 {
        return img.to_vec();
    }
    let plane = p * p;
    let mut out = img.to_vec();
    for pix in 0..plane {
        let g = gray_at(img, channels, pix, plane);
        for ch in 0..channels {
            let x = img[ch * plane + pix] as f64;
            out[ch * plane + pix] = clamp01(x + (f - 1.0) * (x - g));
        }
    }
    out
}

/// Blend between a 3×3-smoothed interior and the original:
/// (1−f)·smooth(x) + f·x, borders untouched.
pub fn sharpness(img: &[f32], channels: usize, p: usize, f: f64) -> Vec<f32> {
    const K: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]];
    let plane = p * p;
    let mut out = img.to_vec();
    for ch in 0..channels {
        let src = &img[ch * plane..(ch + 1) * plane];
        for i in 1..p - 1 {
            for j in 1..p - 1 {
                let mut s = 0.0;
                for (di, row) in K.iter().enumerate() {
                    for (dj, k) in row.iter().enumerate() {
                        s += k * src[(i + di - 1) * p + (j + dj - 1)] as f64;
                    }
                }
                let smooth = s / 13.0;
                out[ch * plane + i * p + j] = clamp01((1.0 - f) * smooth + f * src[i * p + j] as f64);
            }
        }
    }
    out
}

fn rot3_matrix(phi1: f64, phi2: f64, phi3: f64) -> [[f64; 3]; 3] {
    // YZ-plane (about x), then XZ (about y), then XY (about z), extrinsic
    let (c1, s1) = (libm::cos(phi1), libm::sin(phi1));
    let (c2, s2) = (libm::cos(phi2), libm::sin(phi2));
    let (c3, s3) = (libm::cos(phi3), libm::sin(phi3));
    let rx = [[1.0, 0.0, 0.0], [0.0, c1, -s1], [0.0, s1, c1]];
    let ry = [[c2, 0.0, s2], [0.0, 1.0, 0.0], [-s2, 0.0, c2]];
    let rz = [[c3, -s3, 0.0], [s3, c3, 0.0], [0.0, 0.0, 1.0]];
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, bk) in b.iter().enumerate() {
                    m[i][j] += a[i][k] * bk[j];
                }
            }
        }
        m
    };
    mul(rz, mul(ry, rx))
}

/// Rotate a unit-normalized cloud, orthographically project onto XY, and
/// rasterize to a P×P density image (cell counts over max count).
pub fn rotate3d_project(cloud: &[f32], angles: &[f64; 3], p: usize) -> Result<Vec<f32>> {
    if cloud.is_empty() || cloud.len() % 3 != 0 {
        return Err(ScnError::Invalid(format!(
            "point cloud of {} floats is not a nonempty Nx3 array",
            cloud.len()
        )));
    }
    let m = rot3_matrix(angles[0], angles[1], angles[2]);
    let mut counts = vec![0u32; p * p];
    for pt in cloud.chunks_exact(3) {
        let v = [pt[0] as f64, pt[1] as f64, pt[2] as f64];
        let x = m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2];
        let y = m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2];
        // y up in space maps to row 0 at the top of the image
        let j = (((x + 1.0) / 2.0 * p as f64) as i64).clamp(0, p as i64 - 1) as usize;
        let i = (((1.0 - y) / 2.0 * p as f64) as i64).clamp(0, p as i64 - 1) as usize;
        counts[i * p + j] += 1;
    }
    let max = *counts.iter().max().unwrap();
    if max == 0 {
        return Ok(vec![0.0; p * p]);
    }
    Ok(counts.iter().map(|&c| c as f32 / max as f32).collect())
}

/// Apply any image-domain α. Errors on the cloud-domain family.
pub fn apply_image(alpha: &AlphaParam, img: &[f32], channels: usize, p: usize) -> Result<Vec<f32>> {
    if !alpha.in_domain() {
        return Err(ScnError::DomainViolation(format!(
            "{:?} out of {} domain",
            alpha.raw,
            alpha.family.name()
        )));
    }
    Ok(match alpha.family {
        TransformFamily::Rotation2D => rotate2d(img, channels, p, alpha.raw[0]),
        TransformFamily::Scaling => scale2d(img, channels, p, alpha.raw[0]),
        TransformFamily::Translation => translate2d(img, channels, p, alpha.raw[0], alpha.raw[1]),
        TransformFamily::Brightness => brightness(img, alpha.raw[0]),
        TransformFamily::Contrast => contrast(img, channels, p, alpha.raw[0]),
        TransformFamily::Saturation => saturation(img, channels, p, alpha.raw[0]),
        TransformFamily::Sharpness => sharpness(img, channels, p, alpha.raw[0]),
        TransformFamily::Rotation3DProject => {
            return Err(ScnError::Unsupported(
                "rotation3d acts on point clouds, not images".into(),
            ))
        }
    })
}

/// Apply the cloud-domain α and rasterize; errors for image-domain families.
pub fn apply_cloud(alpha: &AlphaParam, cloud: &[f32], p: usize) -> Result<Vec<f32>> {
    if alpha.family != TransformFamily::Rotation3DProject {
        return Err(ScnError::Unsupported(format!(
            "{} acts on images, not point clouds",
            alpha.family.name()
        )));
    }
    if !alpha.in_domain() {
        return Err(ScnError::DomainViolation(format!(
            "{:?} out of rotation3d domain",
            alpha.raw
        )));
    }
    rotate3d_project(cloud, &[alpha.raw[0], alpha.raw[1], alpha.raw[2]], p)
}

/// Encode on any Scalar for feeding tapes directly.
pub fn encode_alpha_as<T: Scalar>(alpha: &AlphaParam) -> Result<Vec<T>> {
    Ok(encode_alpha(alpha)?.into_iter().map(T::from_f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn test_image(p: usize, seed: u64) -> Vec<f32> {
        let mut rng = SeedRng::new(seed);
        (0..p * p).map(|_| rng.uniform(0.0, 1.0) as f32).collect()
    }

    #[test]
    fn encode_rotation_examples() {
        let e = encode_alpha(&AlphaParam::rotation(0.0)).unwrap();
        assert_eq!(e, vec![1.0, 0.0]);
        let e = encode_alpha(&AlphaParam::rotation(PI / 2.0)).unwrap();
        assert!(e[0].abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_scaling_midpoint() {
        let e = encode_alpha(&AlphaParam::factor(TransformFamily::Scaling, 1.1)).unwrap();
        assert!(e[0].abs() < 1e-12);
        let lo = encode_alpha(&AlphaParam::factor(TransformFamily::Scaling, 0.2)).unwrap();
        let hi = encode_alpha(&AlphaParam::factor(TransformFamily::Scaling, 2.0)).unwrap();
        assert_eq!((lo[0], hi[0]), (-1.0, 1.0));
    }

    #[test]
    fn encode_periodicity_and_unit_circle() {
        for k in 0..16 {
            let phi = k as f64 * TAU / 16.0;
            let a = encode_alpha(&AlphaParam::rotation(phi)).unwrap();
            let b = encode_alpha(&AlphaParam::rotation(phi + TAU)).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
            assert!((a[0] * a[0] + a[1] * a[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn encode_out_of_domain_rejected() {
        let bad = AlphaParam {
            family: TransformFamily::Scaling,
            raw: vec![3.0],
        };
        assert!(encode_alpha(&bad).is_err());
    }

    #[test]
    fn sample_alpha_symmetric_and_reproducible() {
        let mut rng = SeedRng::stream(1, Stream::AlphaDraw);
        let mut sum = [0.0f64; 2];
        let n = 100_000;
        for _ in 0..n {
            let a = sample_alpha(TransformFamily::Rotation2D, &mut rng);
            assert!(a.in_domain());
            let e = encode_alpha(&a).unwrap();
            sum[0] += e[0];
            sum[1] += e[1];
        }
        assert!(sum[0].abs() / (n as f64) < 0.02);
        assert!(sum[1].abs() / (n as f64) < 0.02);

        let a: Vec<_> = {
            let mut r = SeedRng::stream(7, Stream::AlphaDraw);
            (0..5).map(|_| sample_alpha(TransformFamily::Translation, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = SeedRng::stream(7, Stream::AlphaDraw);
            (0..5).map(|_| sample_alpha(TransformFamily::Translation, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = test_image(17, 3);
        assert_eq!(rotate2d(&img, 1, 17, 0.0), img);
    }

    #[test]
    fn rotate_quarter_turns_are_exact_permutations() {
        let p = 32;
        let img = test_image(p, 4);
        let q = rotate2d(&img, 1, p, PI / 2.0);
        for i in 0..p {
            for j in 0..p {
                assert_eq!(q[i * p + j], img[j * p + (p - 1 - i)], "at ({i},{j})");
            }
        }
        let h = rotate2d(&img, 1, p, PI);
        for i in 0..p {
            for j in 0..p {
                assert_eq!(h[i * p + j], img[(p - 1 - i) * p + (p - 1 - j)]);
            }
        }
        let t = rotate2d(&img, 1, p, 3.0 * PI / 2.0);
        for i in 0..p {
            for j in 0..p {
                assert_eq!(t[i * p + j], img[(p - 1 - j) * p + i]);
            }
        }
    }

    // straightforward per-pixel f64 bilinear oracle, written independently
    // of the warp helper
    fn rotate_oracle(img: &[f32], p: usize, phi: f64) -> Vec<f64> {
        let c = (p as f64 - 1.0) / 2.0;
        let mut out = vec![0.0f64; p * p];
        for i in 0..p {
            for j in 0..p {
                let dx = j as f64 - c;
                let dy = i as f64 - c;
                let sx = c + phi.cos() * dx - phi.sin() * dy;
                let sy = c + phi.sin() * dx + phi.cos() * dy;
                let y0 = sy.floor() as i64;
                let x0 = sx.floor() as i64;
                let fy = sy - y0 as f64;
                let fx = sx - x0 as f64;
                let mut acc = 0.0;
                for (dy2, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                    for (dx2, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                        let (yy, xx) = (y0 + dy2, x0 + dx2);
                        if yy >= 0 && xx >= 0 && (yy as usize) < p && (xx as usize) < p {
                            acc += wy * wx * img[yy as usize * p + xx as usize] as f64;
                        }
                    }
                }
                out[i * p + j] = acc;
            }
        }
        out
    }

    #[test]
    fn rotate_matches_bilinear_oracle() {
        let p = 32;
        let img = test_image(p, 5);
        for phi in [0.3, 1.1, 2.9, 4.4, 5.9] {
            let got = rotate2d(&img, 1, p, phi);
            let want = rotate_oracle(&img, p, phi);
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((*g as f64 - w).abs() <= 1e-5, "phi={phi}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn scale_and_translate_trivials() {
        let p = 16;
        let img = test_image(p, 6);
        assert_eq!(scale2d(&img, 1, p, 1.0), img);
        assert_eq!(translate2d(&img, 1, p, 0.0, 0.0), img);

        // integer shift (3, -2): exact pixel move, zero fill
        let s = translate2d(&img, 1, p, 3.0, -2.0);
        for i in 0..p {
            for j in 0..p {
                let want = if i + 2 < p && j >= 3 {
                    img[(i + 2) * p + (j - 3)]
                } else {
                    0.0
                };
                assert_eq!(s[i * p + j], want, "at ({i},{j})");
            }
        }
    }

    #[test]
    fn scale_down_pads_with_zero_border() {
        let p = 16;
        let img: Vec<f32> = vec![1.0; p * p];
        let s = scale2d(&img, 1, p, 0.5);
        // corner is far outside the shrunken content
        assert_eq!(s[0], 0.0);
        // center pixel keeps full intensity
        assert!((s[(p / 2) * p + p / 2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn color_identity_at_unit_factor_bit_level() {
        let p = 8;
        let mut img = test_image(p, 7);
        img.extend(test_image(p, 8));
        img.extend(test_image(p, 9));
        for family in [
            TransformFamily::Brightness,
            TransformFamily::Contrast,
            TransformFamily::Saturation,
            TransformFamily::Sharpness,
        ] {
            let out = apply_image(&AlphaParam::factor(family, 1.0), &img, 3, p).unwrap();
            assert_eq!(out, img, "{}", family.name());
        }
    }

    #[test]
    fn brightness_halves_constant_image() {
        let img = vec![0.8f32; 64];
        let out = brightness(&img, 0.5);
        for &v in &out {
            assert!((v - 0.4).abs() < 1e-7);
        }
    }

    #[test]
    fn saturation_fixes_replicated_grayscale() {
        let p = 8;
        let g = test_image(p, 10);
        let mut img = g.clone();
        img.extend_from_slice(&g);
        img.extend_from_slice(&g);
        for f in [0.2, 0.7, 1.6, 2.0] {
            let out = saturation(&img, 3, p, f);
            for (a, b) in out.iter().zip(img.iter()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let p = 16;
        let img = test_image(p, 11);
        let mut rng = SeedRng::new(12);
        for family in [
            TransformFamily::Rotation2D,
            TransformFamily::Scaling,
            TransformFamily::Translation,
            TransformFamily::Brightness,
            TransformFamily::Contrast,
            TransformFamily::Saturation,
            TransformFamily::Sharpness,
        ] {
            for _ in 0..5 {
                let a = sample_alpha(family, &mut rng);
                let out = apply_image(&a, &img, 1, p).unwrap();
                assert_eq!(out.len(), img.len());
                for &v in &out {
                    assert!((0.0..=1.0).contains(&v), "{} produced {v}", family.name());
                }
            }
        }
    }

    #[test]
    fn rotate_round_trip_on_inscribed_disk() {
        // smooth test image: bilinear resampling error scales with local
        // curvature, so white noise would be the wrong oracle here
        let p = 32;
        let img: Vec<f32> = (0..p * p)
            .map(|k| {
                let (i, j) = ((k / p) as f64, (k % p) as f64);
                (0.5 + 0.25 * (PI * i / p as f64).sin() + 0.25 * (PI * j / p as f64).cos()) as f32
            })
            .collect();
        let c = (p as f64 - 1.0) / 2.0;
        let r = p as f64 / 2.0 - 2.0;
        for phi in [0.7, 2.0, 4.9] {
            let back = rotate2d(&rotate2d(&img, 1, p, phi), 1, p, -phi);
            let mut err = 0.0f64;
            let mut cnt = 0usize;
            for i in 0..p {
                for j in 0..p {
                    let (dy, dx) = (i as f64 - c, j as f64 - c);
                    if dx * dx + dy * dy <= r * r {
                        err += (back[i * p + j] - img[i * p + j]).abs() as f64;
                        cnt += 1;
                    }
                }
            }
            assert!(err / (cnt as f64) < 0.02, "phi={phi} mean err {}", err / cnt as f64);
        }
    }

    #[test]
    fn translate_round_trip_exact_in_center() {
        let p = 32;
        let img = test_image(p, 14);
        let fwd = AlphaParam::translation(5.0, -3.0);
        let inv = inverse(&fwd).unwrap();
        let back = apply_image(&inv, &apply_image(&fwd, &img, 1, p).unwrap(), 1, p).unwrap();
        for i in 8..p - 8 {
            for j in 8..p - 8 {
                assert_eq!(back[i * p + j], img[i * p + j]);
            }
        }
    }

    #[test]
    fn inverse_table() {
        let inv = inverse(&AlphaParam::rotation(1.0)).unwrap();
        assert!((inv.raw[0] - (TAU - 1.0)).abs() < 1e-12);
        let inv = inverse(&AlphaParam::factor(TransformFamily::Scaling, 0.4)).unwrap();
        assert!((inv.raw[0] - 2.0).abs() < 1e-12); // 1/0.4 clamped to 2.0
        assert!(inverse(&AlphaParam::euler(0.1, 0.2, 0.3)).is_none());
        assert!(inverse(&AlphaParam::factor(TransformFamily::Sharpness, 1.3)).is_none());
    }

    fn cone_cloud(n: usize, seed: u64) -> Vec<f32> {
        // z-axis-symmetric cone, apex up
        let mut rng = SeedRng::new(seed);
        let mut pts = Vec::with_capacity(n * 3);
        for _ in 0..n {
            let u = rng.uniform(0.0, 1.0);
            let t = rng.uniform(0.0, TAU);
            let r = 0.8 * (1.0 - u);
            pts.push((r * libm::cos(t)) as f32);
            pts.push((r * libm::sin(t)) as f32);
            pts.push((u * 1.6 - 0.8) as f32);
        }
        pts
    }

    #[test]
    fn projection_identity_angles_matches_direct_raster() {
        let cloud = cone_cloud(4096, 15);
        let a = rotate3d_project(&cloud, &[0.0, 0.0, 0.0], 32).unwrap();
        // direct rasterization oracle
        let mut counts = vec![0u32; 32 * 32];
        for pt in cloud.chunks_exact(3) {
            let j = ((((pt[0] as f64) + 1.0) / 2.0 * 32.0) as i64).clamp(0, 31) as usize;
            let i = (((1.0 - pt[1] as f64) / 2.0 * 32.0) as i64).clamp(0, 31) as usize;
            counts[i * 32 + j] += 1;
        }
        let max = *counts.iter().max().unwrap() as f32;
        for (got, &c) in a.iter().zip(counts.iter()) {
            assert_eq!(*got, c as f32 / max);
        }
    }

    #[test]
    fn inplane_rotation_preserves_occupancy_mass() {
        let cloud = cone_cloud(4096, 16);
        let base = rotate3d_project(&cloud, &[0.0, 0.0, 0.0], 32).unwrap();
        let rot = rotate3d_project(&cloud, &[0.0, 0.0, 1.1], 32).unwrap();
        let expected = rotate2d(&base, 1, 32, 1.1);
        // class-relevant occupancy: fraction of total density inside the
        // disk the cone projects to; per-image normalization cancels out
        let mass = |im: &[f32]| {
            let total: f64 = im.iter().map(|&v| v as f64).sum();
            let inner: f64 = im
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let (i, j) = ((k / 32) as f64 - 15.5, (k % 32) as f64 - 15.5);
                    i * i + j * j <= 12.0 * 12.0
                })
                .map(|(_, &v)| v as f64)
                .sum();
            inner / total
        };
        let (mr, me) = (mass(&rot), mass(&expected));
        assert!((mr - me).abs() / me < 0.02, "occupancy {mr} vs {me}");
    }

    #[test]
    fn single_point_pitch_lands_near_center() {
        let cloud = vec![1.0f32, 0.0, 0.0];
        let img = rotate3d_project(&cloud, &[0.0, PI / 2.0, 0.0], 32).unwrap();
        // (1,0,0) -> (0,0,-1): projects to the image center cell
        let hot: Vec<usize> = img.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect();
        assert_eq!(hot.len(), 1);
        let (i, j) = (hot[0] / 32, hot[0] % 32);
        assert!((15..=16).contains(&i) && (15..=16).contains(&j), "landed at ({i},{j})");
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(rotate3d_project(&[], &[0.0; 3], 32).is_err());
    }

    #[test]
    fn apply_dispatch_modality_errors() {
        let img = test_image(8, 17);
        assert!(apply_image(&AlphaParam::euler(0.0, 0.0, 0.0), &img, 1, 8).is_err());
        assert!(apply_cloud(&AlphaParam::rotation(1.0), &[0.0, 0.0, 1.0], 32).is_err());
    }
}
