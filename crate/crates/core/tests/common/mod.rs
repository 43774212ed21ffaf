//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use phasecode::{Complex64, ModulationParams};

/// Modulation coefficients for every index 1..=n, index 0 unused.
pub struct CoeffTable {
    pub params: ModulationParams,
    pub g: Vec<[Complex64; 4]>,
}

impl CoeffTable {
    pub fn new(params: ModulationParams) -> Self {
        let n = params.n();
        let mut g = vec![[Complex64::new(0.0, 0.0); 4]; n as usize + 1];
        for l in 1..=n {
            g[l as usize] = params.coeffs(l);
        }
        Self { params, g }
    }

    pub fn sums(&self, balls: &[(u64, Complex64)]) -> [Complex64; 4] {
        let mut s = [Complex64::new(0.0, 0.0); 4];
        for &(l, x) in balls {
            for k in 0..4 {
                s[k] += self.g[l as usize][k] * x;
            }
        }
        s
    }

    pub fn measure(&self, balls: &[(u64, Complex64)]) -> [f64; 4] {
        self.sums(balls).map(|s| s.norm())
    }
}

fn max_residual(y: &[f64; 4], w: &[Complex64; 4]) -> f64 {
    (0..4).map(|k| (w[k].norm() - y[k]).abs()).fold(0.0, f64::max)
}

/// Exhaustive single-ball fit: for every ℓ the least-squares magnitude,
/// keeping the ℓ of smallest worst-case residual.
pub fn singleton_oracle(y: &[f64; 4], t: &CoeffTable, tol: f64) -> Option<(u64, f64)> {
    let scale = y.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut best = (f64::INFINITY, 0u64, 0.0);
    for l in 1..t.g.len() {
        let m = t.g[l].map(|g| g.norm());
        let a = (0..4).map(|k| m[k] * y[k]).sum::<f64>() / m.iter().map(|v| v * v).sum::<f64>();
        let r = (0..4).map(|k| (m[k] * a - y[k]).abs()).fold(0.0, f64::max);
        if r < best.0 {
            best = (r, l as u64, a);
        }
    }
    (best.0 <= tol * scale).then_some((best.1, best.2))
}

/// Intersections of |z - c1| = r1 and |z - c2| = r2, or the closest
/// approach when they miss.
fn circle_points(c1: Complex64, r1: f64, c2: Complex64, r2: f64) -> Vec<Complex64> {
    let dv = c2 - c1;
    let d = dv.norm();
    if d == 0.0 {
        return Vec::new();
    }
    let u = dv / d;
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let base = c1 + u * a;
    let perp = u * Complex64::i();
    vec![base + perp * h, base - perp * h]
}

/// Exhaustive one-unknown fit: for every ℓ outside `known`, the values
/// consistent with the first two magnitudes, scored on all four.
pub fn resolvable_oracle(y: &[f64; 4], known: &[(u64, Complex64)], t: &CoeffTable, tol: f64) -> Option<(u64, Complex64)> {
    let s = t.sums(known);
    let scale = y
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(known.iter().map(|b| b.1.norm()).sum());
    let mut best = (f64::INFINITY, 0u64, Complex64::new(0.0, 0.0));
    for l in 1..t.g.len() {
        if known.iter().any(|b| b.0 == l as u64) {
            continue;
        }
        let g = t.g[l];
        // |s_k + g_k x| = y_k is a circle around -s_k/g_k of radius y_k/|g_k|.
        for x in circle_points(-s[0] / g[0], y[0] / g[0].norm(), -s[1] / g[1], y[1] / g[1].norm()) {
            let w = [0, 1, 2, 3].map(|k| s[k] + g[k] * x);
            let r = max_residual(y, &w);
            if r < best.0 {
                best = (r, l as u64, x);
            }
        }
    }
    (best.0 <= tol * scale && best.2.norm() > tol * scale).then_some((best.1, best.2))
}

/// Rotation e^{iφ} of the blue balls fitting all four magnitudes, by a dense
/// grid over φ refined with golden-section search. Rejects when two
/// distinct rotations fit.
pub fn mergeable_oracle(
    y: &[f64; 4],
    red: &[(u64, Complex64)],
    blue: &[(u64, Complex64)],
    t: &CoeffTable,
    tol: f64,
) -> Option<Complex64> {
    let r = t.sums(red);
    let b = t.sums(blue);
    let scale = y
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(red.iter().chain(blue).map(|v| v.1.norm()).sum());
    let ss = |phi: f64| {
        let e = Complex64::from_polar(1.0, phi);
        (0..4).map(|k| ((r[k] + e * b[k]).norm() - y[k]).powi(2)).sum::<f64>()
    };
    let worst = |phi: f64| {
        let e = Complex64::from_polar(1.0, phi);
        max_residual(y, &[0, 1, 2, 3].map(|k| r[k] + e * b[k]))
    };
    let grid = 7200;
    let step = std::f64::consts::TAU / grid as f64;
    let vals: Vec<f64> = (0..grid).map(|i| ss(i as f64 * step)).collect();
    let mut fits: Vec<f64> = Vec::new();
    for i in 0..grid {
        let (p, q) = (vals[(i + grid - 1) % grid], vals[(i + 1) % grid]);
        if vals[i] > p || vals[i] > q {
            continue;
        }
        let (mut lo, mut hi) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let a = hi - g * (hi - lo);
            let c = lo + g * (hi - lo);
            if ss(a) < ss(c) {
                hi = c;
            } else {
                lo = a;
            }
        }
        let phi = 0.5 * (lo + hi);
        if worst(phi) <= tol * scale
            && !fits.iter().any(|f| (Complex64::from_polar(1.0, *f) - Complex64::from_polar(1.0, phi)).norm() < 1e-4)
        {
            fits.push(phi);
        }
    }
    match fits.as_slice() {
        [phi] => Some(Complex64::from_polar(1.0, *phi)),
        _ => None,
    }
}

/// ‖a e^{iφ} - b‖ / ‖b‖ with the best φ.
pub fn aligned_residual(a: &[Complex64], b: &[Complex64]) -> f64 {
    let acc: Complex64 = a.iter().zip(b).map(|(u, v)| v * u.conj()).sum();
    let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { Complex64::new(1.0, 0.0) };
    let num: f64 = a.iter().zip(b).map(|(u, v)| (u * rot - v).norm_sqr()).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (num / den).sqrt()
}
