//! Dense signals from 3n - 2 magnitudes, and the three-mask Fourier variant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{dft, idft};

/// |x_ℓ|, |x_a + x_ℓ| and |x_a + e^{iψ_ℓ} x_ℓ| around an anchor a.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMeasurements {
    /// 1-based anchor index.
    pub anchor: usize,
    pub omega: f64,
    pub mags: Vec<f64>,
    /// One entry per non-anchor index, in increasing index order.
    pub sums: Vec<f64>,
    pub rotated_sums: Vec<f64>,
}

impl ChainMeasurements {
    pub fn n(&self) -> usize {
        self.mags.len()
    }

    pub fn total(&self) -> usize {
        self.mags.len() + self.sums.len() + self.rotated_sums.len()
    }

    /// ψ for the k-th non-anchor index (k = 1..n-1).
    fn psi(&self, k: usize) -> f64 {
        self.omega * k as f64
    }
}

fn others(n: usize, anchor: usize) -> impl Iterator<Item = usize> {
    (1..=n).filter(move |&l| l != anchor)
}

/// Chain measurements with ω = π/(2n) and the given 1-based anchor.
pub fn chain_measure(x: &[Complex64], anchor: usize) -> Result<ChainMeasurements> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Parameter("chain scheme needs n >= 2".into()));
    }
    if anchor == 0 || anchor > n {
        return Err(Error::Parameter(format!("anchor {anchor} outside [1, {n}]")));
    }
    let omega = PI / (2.0 * n as f64);
    let xa = x[anchor - 1];
    let mut meas = ChainMeasurements {
        anchor,
        omega,
        mags: x.iter().map(|v| v.norm()).collect(),
        sums: Vec::with_capacity(n - 1),
        rotated_sums: Vec::with_capacity(n - 1),
    };
    for (k, l) in others(n, anchor).enumerate() {
        let psi = meas.psi(k + 1);
        meas.sums.push((xa + x[l - 1]).norm());
        meas.rotated_sums.push((xa + Complex64::from_polar(1.0, psi) * x[l - 1]).norm());
    }
    Ok(meas)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|a| a * a).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Recovers x up to a global phase with the anchor set real positive.
pub fn chain_decode(meas: &ChainMeasurements) -> Result<Vec<Complex64>> {
    let n = meas.n();
    let tau = 1e-9 * rms(&meas.mags);
    let a = meas.mags[meas.anchor - 1];
    if a <= tau {
        return Err(Error::UnrecoverableAnchor);
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[meas.anchor - 1] = Complex64::new(a, 0.0);
    for (k, l) in others(n, meas.anchor).enumerate() {
        let m = meas.mags[l - 1];
        if m <= tau {
            continue;
        }
        let (s, s4) = (meas.sums[k], meas.rotated_sums[k]);
        let c = ((s * s - a * a - m * m) / (2.0 * a * m)).clamp(-1.0, 1.0);
        let c4 = ((s4 * s4 - a * a - m * m) / (2.0 * a * m)).clamp(-1.0, 1.0);
        // cos(φ + ψ) = c4 pins the sine of φ.
        let (sp, cp) = meas.psi(k + 1).sin_cos();
        let sn = (c * cp - c4) / sp;
        let phi = sn.atan2(c);
        x[l - 1] = Complex64::from_polar(m, phi);
    }
    Ok(x)
}

/// Whether both sign choices for the relative phase of index ℓ satisfy the
/// rotated-sum check to `tol`. Diagnostics for degeneracy scans.
pub fn chain_sign_ambiguous(meas: &ChainMeasurements, l: usize, tol: f64) -> bool {
    if l == meas.anchor || l == 0 || l > meas.n() {
        return false;
    }
    let k = if l < meas.anchor { l } else { l - 1 };
    let a = meas.mags[meas.anchor - 1];
    let m = meas.mags[l - 1];
    let s = meas.sums[k - 1];
    let c = ((s * s - a * a - m * m) / (2.0 * a * m)).clamp(-1.0, 1.0);
    let phi = c.acos();
    let psi = meas.psi(k);
    let target = meas.rotated_sums[k - 1];
    [phi, -phi]
        .iter()
        .all(|p| ((Complex64::new(a, 0.0) + Complex64::from_polar(m, p + psi)).norm() - target).abs() <= tol * (a + m))
}

/// |F M_k x| for M_1 = I, M_2 = diag(2, 1, ..), M_3 = diag(1 + i, 1, ..),
/// unnormalized DFT.
#[derive(Clone, Debug, PartialEq)]
pub struct FfNonsparseMeasurements {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub y3: Vec<f64>,
}

impl FfNonsparseMeasurements {
    pub fn total(&self) -> usize {
        self.y1.len() + self.y2.len() + self.y3.len()
    }
}

pub fn ff_nonsparse_measure(x: &[Complex64]) -> Result<FfNonsparseMeasurements> {
    if x.len() < 2 {
        return Err(Error::Parameter("Fourier scheme needs n >= 2".into()));
    }
    let masked = |w: Complex64| {
        let mut v = x.to_vec();
        v[0] *= w;
        dft(&v).into_iter().map(|z| z.norm()).collect::<Vec<f64>>()
    };
    Ok(FfNonsparseMeasurements {
        y1: masked(Complex64::new(1.0, 0.0)),
        y2: masked(Complex64::new(2.0, 0.0)),
        y3: masked(Complex64::new(1.0, 1.0)),
    })
}

/// Candidates t = |x_1|² consistent with one frequency bin:
/// (y2² - y1² - t)² + (y3² - y1² - t)² = 4 y1² t.
pub fn solve_anchor_magnitude(y1: f64, y2: f64, y3: f64) -> Result<Vec<f64>> {
    if y1 <= 0.0 {
        return Err(Error::Parameter("y1 must be positive".into()));
    }
    let a = y2 * y2 - y1 * y1;
    let b = y3 * y3 - y1 * y1;
    let s = a + b + 2.0 * y1 * y1;
    let p = 0.5 * (a * a + b * b);
    let mut disc = s * s - 4.0 * p;
    if disc < 0.0 {
        if disc < -1e-12 * s * s {
            return Err(Error::InconsistentMeasurement);
        }
        disc = 0.0;
    }
    let q = 0.5 * (s + s.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    for t in [q, if q != 0.0 { p / q } else { 0.0 }] {
        if t >= -1e-12 * s.abs() && !roots.iter().any(|r: &f64| (r - t).abs() <= 1e-14 * s.abs()) {
            roots.push(t.max(0.0));
        }
    }
    if roots.is_empty() {
        return Err(Error::InconsistentMeasurement);
    }
    Ok(roots)
}

/// Recovers x from the three masked spectra, anchor x_1 real positive.
pub fn ff_nonsparse_decode(meas: &FfNonsparseMeasurements) -> Result<Vec<Complex64>> {
    let n = meas.y1.len();
    let tau = 1e-9 * rms(&meas.y1);
    let bad: Vec<usize> = (0..n).filter(|&k| meas.y1[k] <= tau).map(|k| k + 1).collect();
    if !bad.is_empty() {
        return Err(Error::UnresolvableBins(bad));
    }
    let cands: Vec<Vec<f64>> = (0..n)
        .map(|k| solve_anchor_magnitude(meas.y1[k], meas.y2[k], meas.y3[k]))
        .collect::<Result<_>>()?;
    let agrees = |t: f64, u: f64| (t - u).abs() <= 1e-8 * t.abs().max(u.abs()).max(f64::MIN_POSITIVE);
    let mut best = (0usize, 0.0f64);
    for list in &cands {
        for &t in list {
            let votes = cands.iter().filter(|l| l.iter().any(|&u| agrees(t, u))).count();
            if votes > best.0 {
                best = (votes, t);
            }
        }
    }
    // Average the agreeing candidates to shed single-bin rounding.
    let picked: Vec<f64> = cands
        .iter()
        .filter_map(|l| l.iter().copied().find(|&u| agrees(best.1, u)))
        .collect();
    let t = picked.iter().sum::<f64>() / picked.len() as f64;
    if t.sqrt() <= 1e-9 * rms(&meas.y1) / (n as f64).sqrt() {
        return Err(Error::UnrecoverableAnchor);
    }
    let spectrum: Vec<Complex64> = (0..n)
        .map(|k| {
            let y1 = meas.y1[k];
            let a = meas.y2[k].powi(2) - y1 * y1 - t;
            let b = meas.y3[k].powi(2) - y1 * y1 - t;
            // cos and sin of the phase relative to x_1 are a and b over 2 y1 |x_1|.
            Complex64::from_polar(y1, b.atan2(a))
        })
        .collect();
    Ok(idft(&spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cosine_law_spot_check() {
        let x = [c(1.5, 0.0), c(0.7, 0.0), c(2.0, 0.0)];
        let m = chain_measure(&x, 1).unwrap();
        let w = m.omega;
        let want = (1.5f64.powi(2) + 0.49 + 2.0 * 1.5 * 0.7 * w.cos()).sqrt();
        assert!((m.rotated_sums[0] - want).abs() < 1e-15);
    }

    #[test]
    fn impulse_gives_flat_sums() {
        let mut x = vec![c(0.0, 0.0); 8];
        x[0] = c(0.3, -0.4);
        let m = chain_measure(&x, 1).unwrap();
        assert!(m.sums.iter().all(|s| (s - 0.5).abs() < 1e-15));
        assert_eq!(m.total(), 3 * 8 - 2);
    }

    #[test]
    fn zero_anchor_rejected() {
        let x = [c(0.0, 0.0), c(1.0, 0.0)];
        let m = chain_measure(&x, 1).unwrap();
        assert!(matches!(chain_decode(&m), Err(Error::UnrecoverableAnchor)));
    }

    #[test]
    fn impulse_spectrum_doubles() {
        let mut x = vec![c(0.0, 0.0); 6];
        x[0] = c(0.0, 1.0);
        let m = ff_nonsparse_measure(&x).unwrap();
        for k in 0..6 {
            assert!((m.y1[k] - 1.0).abs() < 1e-15);
            assert!((m.y2[k] - 2.0).abs() < 1e-15);
        }
        assert_eq!(m.total(), 18);
    }

    #[test]
    fn two_point_closed_form() {
        // X = [x1 + x2, x1 - x2].
        let x = [c(2.0, 0.0), c(0.5, 1.0)];
        let m = ff_nonsparse_measure(&x).unwrap();
        let got = ff_nonsparse_decode(&m).unwrap();
        let rot = x[0] / got[0];
        for (g, t) in got.iter().zip(&x) {
            assert!((g * rot - t).norm() < 1e-12);
        }
    }

    #[test]
    fn anchor_roots_contain_truth() {
        let (x1, xk) = (c(0.8, -0.3), c(-1.1, 2.0));
        let y1 = xk.norm();
        let y2 = (xk + x1).norm();
        let y3 = (xk + c(0.0, 1.0) * x1).norm();
        let r = solve_anchor_magnitude(y1, y2, y3).unwrap();
        assert!(r.iter().any(|t| (t - x1.norm_sqr()).abs() < 1e-10));
        assert!(r.len() <= 2);
        assert!(solve_anchor_magnitude(0.0, 1.0, 1.0).is_err());
    }
}
