//! Guess-and-check bin processors.
//!
//! Each processor assumes a composition for one bin, solves for the unknowns
//! from the four magnitudes, and accepts only if the solution re-synthesizes
//! every measurement within tolerance. Known balls are passed with values in
//! a shared color frame.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::measurement::{ModulationKind, ModulationParams};

/// Default relative tolerance for every equality check.
pub const TAU: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Σ g_k(ℓ) x_ℓ over the given balls, k = 1..4.
pub fn modulated_sums(params: &ModulationParams, balls: &[(u64, Complex64)]) -> [Complex64; 4] {
    let mut s = [ZERO; 4];
    for &(l, x) in balls {
        let g = params.coeffs(l);
        for k in 0..4 {
            s[k] += g[k] * x;
        }
    }
    s
}

/// Scale against which absolute residuals are judged.
pub fn bin_scale(y: &[f64; 4], balls: &[(u64, Complex64)]) -> f64 {
    let ymax = y.iter().copied().fold(0.0, f64::max);
    let mass: f64 = balls.iter().map(|b| b.1.norm()).sum();
    ymax.max(mass)
}

/// Whether the predicted sums reproduce all four magnitudes.
pub fn reproduces(y: &[f64; 4], sums: &[Complex64; 4], tol: f64, scale: f64) -> bool {
    y.iter().zip(sums).all(|(y, s)| (y - s.norm()).abs() <= tol * scale)
}

/// Column index whose modulation angle is `theta`, if any.
fn index_for_angle(params: &ModulationParams, theta: f64) -> Option<u64> {
    let n = params.n();
    let r = (theta / params.omega()).round();
    match params.kind() {
        ModulationKind::Standard => (r >= 1.0 && r <= n as f64).then_some(r as u64),
        ModulationKind::FourierFriendly => {
            let t = theta.rem_euclid(2.0 * PI);
            let r = (t / params.omega()).round() as u64 % n;
            Some(if r == 0 { n } else { r })
        }
    }
}

/// Candidate columns ℓ with |cos(ωℓ)| = `c_abs`.
fn indices_for_abs_cos(params: &ModulationParams, c_abs: f64) -> Vec<u64> {
    let a = c_abs.clamp(0.0, 1.0).acos();
    let mut out = Vec::with_capacity(4);
    let angles: &[f64] = match params.kind() {
        ModulationKind::Standard => &[a],
        ModulationKind::FourierFriendly => &[a, PI - a, PI + a, 2.0 * PI - a],
    };
    for &t in angles {
        if let Some(l) = index_for_angle(params, t) {
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}

/// Lone-ball hypothesis. Returns the ball's index and magnitude.
///
/// `admissible` filters candidate indices (bin membership, not yet colored).
pub fn process_singleton(
    y: &[f64; 4],
    params: &ModulationParams,
    tol: f64,
    admissible: &mut dyn FnMut(u64) -> bool,
) -> Option<(u64, f64)> {
    let [y1, y2, y3, y4] = *y;
    if y1 <= 0.0 {
        return None;
    }
    let scale = bin_scale(y, &[]);
    if (y1 - y2).abs() > tol * scale || (y1 - y4).abs() > tol * scale {
        return None;
    }
    let mut found = None;
    for l in indices_for_abs_cos(params, y3 / (2.0 * y1)) {
        let synth = 2.0 * y1 * params.theta(l).cos().abs();
        if (synth - y3).abs() > tol * scale || !admissible(l) {
            continue;
        }
        if found.replace(l).is_some() {
            return None;
        }
    }
    found.map(|l| (l, y1))
}

/// Two-color hypothesis: the bin holds exactly the discovered balls of
/// colors R and B. Returns the rotation mapping B's frame into R's.
pub fn process_mergeable(
    y: &[f64; 4],
    red: &[(u64, Complex64)],
    blue: &[(u64, Complex64)],
    params: &ModulationParams,
    tol: f64,
) -> Option<Complex64> {
    if red.is_empty() || blue.is_empty() {
        return None;
    }
    let scale = bin_scale(y, red).max(bin_scale(y, blue)).max(
        red.iter().chain(blue).map(|b| b.1.norm()).sum::<f64>(),
    );
    let sr = modulated_sums(params, red);
    let sb = modulated_sums(params, blue);
    let (r, b) = (sr[0], sb[0]);
    let (nr, nb) = (r.norm(), b.norm());
    if nr <= tol * scale || nb <= tol * scale {
        return None;
    }
    // |r + e^{iφ} b| = y1 fixes the angle between r and the rotated b up to sign.
    let cos_a = (y[0] * y[0] - nr * nr - nb * nb) / (2.0 * nr * nb);
    if cos_a.abs() > 1.0 + tol {
        return None;
    }
    let a = cos_a.clamp(-1.0, 1.0).acos();
    let base = r.arg() - b.arg();
    let mut passing: Vec<Complex64> = Vec::with_capacity(2);
    for s in [1.0, -1.0] {
        let rot = Complex64::from_polar(1.0, base + s * a);
        let sums = [0, 1, 2, 3].map(|k| sr[k] + rot * sb[k]);
        if reproduces(y, &sums, tol, scale) {
            passing.push(polish_rotation(y, &sr, &sb, rot));
        }
    }
    match passing.as_slice() {
        [rot] => Some(*rot),
        [p, q] if (p - q).norm() <= tol.sqrt() => Some(*p),
        _ => None,
    }
}

/// Gauss-Newton refinement of the unknown x in |s_k + g_k x| = y_k. The
/// closed forms lose digits to cancellation; a few steps restore them.
fn polish_value(y: &[f64; 4], s: &[Complex64; 4], g: &[Complex64; 4], mut x: Complex64) -> Complex64 {
    let cost = |x: Complex64| -> f64 { (0..4).map(|k| ((s[k] + g[k] * x).norm() - y[k]).powi(2)).sum() };
    let mut best = cost(x);
    for _ in 0..4 {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..4 {
            let w = s[k] + g[k] * x;
            let nw = w.norm();
            if nw <= 1e-300 {
                continue;
            }
            let q = w.conj() * g[k] / nw;
            let (jr, ji) = (q.re, -q.im);
            let r = nw - y[k];
            a11 += jr * jr;
            a12 += jr * ji;
            a22 += ji * ji;
            b1 += jr * r;
            b2 += ji * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() <= 1e-300 {
            break;
        }
        let step = Complex64::new((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
        let cand = x - step;
        let c = cost(cand);
        if !(c < best) {
            break;
        }
        x = cand;
        best = c;
    }
    x
}

/// Same refinement for the unit rotation in |r_k + e^{iφ} b_k| = y_k.
fn polish_rotation(y: &[f64; 4], r: &[Complex64; 4], b: &[Complex64; 4], rot: Complex64) -> Complex64 {
    let cost = |phi: f64| -> f64 {
        let e = Complex64::from_polar(1.0, phi);
        (0..4).map(|k| ((r[k] + e * b[k]).norm() - y[k]).powi(2)).sum()
    };
    let mut phi = rot.arg();
    let mut best = cost(phi);
    for _ in 0..4 {
        let e = Complex64::from_polar(1.0, phi);
        let (mut jj, mut jr) = (0.0, 0.0);
        for k in 0..4 {
            let w = r[k] + e * b[k];
            let nw = w.norm();
            if nw <= 1e-300 {
                continue;
            }
            // d|w|/dφ = Re(conj(w) · i e^{iφ} b) / |w|.
            let j = (w.conj() * Complex64::i() * e * b[k]).re / nw;
            jj += j * j;
            jr += j * (nw - y[k]);
        }
        if jj <= 1e-300 {
            break;
        }
        let cand = phi - jr / jj;
        let c = cost(cand);
        if !(c < best) {
            break;
        }
        phi = cand;
        best = c;
    }
    Complex64::from_polar(1.0, phi)
}

/// Real roots of a2 u² + a1 u + a0 = 0 that lie in [0, 1] up to slack.
fn unit_interval_roots(a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    let big = a2.abs().max(a1.abs()).max(a0.abs());
    if big == 0.0 || !big.is_finite() {
        return Vec::new();
    }
    let (a2, a1, a0) = (a2 / big, a1 / big, a0 / big);
    let mut roots = Vec::with_capacity(2);
    if a2.abs() < 1e-13 {
        if a1.abs() > 1e-13 {
            roots.push(-a0 / a1);
        }
    } else {
        let mut disc = a1 * a1 - 4.0 * a2 * a0;
        if disc < 0.0 {
            if disc < -1e-9 * (a1 * a1 + (4.0 * a2 * a0).abs()) {
                return roots;
            }
            disc = 0.0;
        }
        let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
        if q != 0.0 {
            roots.push(q / a2);
            roots.push(a0 / q);
        } else {
            roots.push(0.0);
        }
    }
    roots
        .into_iter()
        .filter(|u| (-1e-9..=1.0 + 1e-9).contains(u))
        .map(|u| u.clamp(0.0, 1.0))
        .collect()
}

/// One-unknown hypothesis: every ball of the bin but one is discovered and
/// shares one color. Returns the unknown ball's index and value in that
/// color's frame.
pub fn process_resolvable(
    y: &[f64; 4],
    known: &[(u64, Complex64)],
    params: &ModulationParams,
    tol: f64,
    admissible: &mut dyn FnMut(u64) -> bool,
) -> Option<(u64, Complex64)> {
    if known.is_empty() {
        return None;
    }
    let [y1, y2, y3, _] = *y;
    let scale = bin_scale(y, known);
    let s = modulated_sums(params, known);
    let (a, b, c) = (s[0], s[1], s[2]);
    if y1 <= tol * scale || y2 <= tol * scale || c.norm() <= tol * scale {
        return None;
    }
    // a + u and b + v have lengths y1, y2 and sum to c + u + v of length y3.
    let cos_alpha = (y3 * y3 - y1 * y1 - y2 * y2) / (2.0 * y1 * y2);
    if cos_alpha.abs() > 1.0 + tol {
        return None;
    }
    let alpha = cos_alpha.clamp(-1.0, 1.0).acos();
    let k4 = y3 / c.norm();
    let mut hits: Vec<(u64, Complex64)> = Vec::with_capacity(2);
    let signs: &[f64] = if alpha == 0.0 { &[1.0] } else { &[1.0, -1.0] };
    for &sa in signs {
        let z = Complex64::from_polar(y1 / y2, sa * alpha);
        let num = z * b - a;
        let k1 = 1.0 - z + 2.0 * num / c;
        let k2 = 1.0 + z;
        let k3 = 1.0 - z;
        let k5 = k1.norm_sqr() - k4 * k4 * k3.norm_sqr();
        let k6 = k2.norm_sqr() * (1.0 - k4 * k4);
        let k7 = -2.0 * ((k1 * k2.conj()).im - k4 * k4 * (k3 * k2.conj()).im);
        let d = k5 - k6;
        for u in unit_interval_roots(d * d + k7 * k7, 2.0 * k6 * d - k7 * k7, k6 * k6) {
            for l in indices_for_abs_cos(params, u.sqrt()) {
                let g = params.coeffs(l);
                let den = g[0] - z * g[1];
                if den.norm() <= 1e-300 {
                    continue;
                }
                let x = num / den;
                if x.norm() <= tol * scale {
                    continue;
                }
                let sums = [0, 1, 2, 3].map(|k| s[k] + g[k] * x);
                if !reproduces(y, &sums, tol, scale) {
                    continue;
                }
                if hits.iter().any(|h| h.0 == l) {
                    continue;
                }
                if !admissible(l) {
                    continue;
                }
                hits.push((l, polish_value(y, &s, &g, x)));
            }
        }
    }
    match hits.as_slice() {
        [h] => Some(*h),
        _ => None,
    }
}
