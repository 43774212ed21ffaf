//! Trigonometric modulation and the implicit encoder y = |(G ⊗ H) x|.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::ensemble::CodeEnsemble;
use crate::error::{param, Error, Result};
use crate::signal::{RngSeed, SparseSignal};

/// Frequency of the first two modulation rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModulationKind {
    /// ω = π/(2n): ωℓ stays in (0, π/2], so the cosine row locates a ball uniquely.
    Standard,
    /// ω = 2π/n: realizable by integer circular shifts.
    FourierFriendly,
}

/// The four-row modulation G: e^{iωℓ}, e^{-iωℓ}, 2cos(ωℓ), e^{iω'ℓ}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationParams {
    n: u64,
    kind: ModulationKind,
    check_shift: u64,
}

impl ModulationParams {
    /// `check_shift` is L in ω' = 2πL/n and must lie in [1, n-1] (0 allowed only when n = 1).
    pub fn new(n: u64, kind: ModulationKind, check_shift: u64) -> Result<Self> {
        if n == 0 {
            return param("n must be positive");
        }
        if check_shift >= n || (check_shift == 0 && n > 1) {
            return param(format!("check shift L = {check_shift} outside [1, {}]", n - 1));
        }
        Ok(Self { n, kind, check_shift })
    }

    /// Draws L uniformly from {0..n-1}, redrawing zero.
    pub fn draw(n: u64, kind: ModulationKind, seed: RngSeed) -> Result<Self> {
        if n == 0 {
            return param("n must be positive");
        }
        let mut rng = seed.rng();
        let mut l = 0;
        while n > 1 && l == 0 {
            l = rng.random_range(0..n);
        }
        Self::new(n, kind, l)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn check_shift(&self) -> u64 {
        self.check_shift
    }

    pub fn omega(&self) -> f64 {
        match self.kind {
            ModulationKind::Standard => PI / (2.0 * self.n as f64),
            ModulationKind::FourierFriendly => 2.0 * PI / self.n as f64,
        }
    }

    pub fn omega_prime(&self) -> f64 {
        2.0 * PI * self.check_shift as f64 / self.n as f64
    }

    /// ωℓ, reduced modulo 2π in exact integer arithmetic where the period allows it.
    pub fn theta(&self, l: u64) -> f64 {
        match self.kind {
            ModulationKind::Standard => l as f64 * self.omega(),
            ModulationKind::FourierFriendly => 2.0 * PI * ((l % self.n) as f64 / self.n as f64),
        }
    }

    /// ω'ℓ modulo 2π.
    pub fn check_phase(&self, l: u64) -> f64 {
        let r = (self.check_shift as u128 * l as u128 % self.n as u128) as f64;
        2.0 * PI * (r / self.n as f64)
    }

    /// (g1, g2, g3, g4) for column ℓ.
    pub fn coeffs(&self, l: u64) -> [Complex64; 4] {
        let t = self.theta(l);
        let (s, c) = t.sin_cos();
        [
            Complex64::new(c, s),
            Complex64::new(c, -s),
            Complex64::new(2.0 * c, 0.0),
            Complex64::from_polar(1.0, self.check_phase(l)),
        ]
    }

    /// Dense 4 x n modulation matrix for small n.
    pub fn matrix(&self) -> Result<Vec<Vec<Complex64>>> {
        if self.n > 100_000 {
            return Err(Error::Unsupported(format!("dense G for n = {}", self.n)));
        }
        let mut g: Vec<Vec<Complex64>> = (0..4).map(|_| Vec::with_capacity(self.n as usize)).collect();
        for l in 1..=self.n {
            for (row, c) in g.iter_mut().zip(self.coeffs(l)) {
                row.push(c);
            }
        }
        Ok(g)
    }
}

/// Four magnitudes per bin plus the modulation that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub params: ModulationParams,
    pub bins: Vec<[f64; 4]>,
}

impl MeasurementSet {
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Scalar measurement count, 4M.
    pub fn total(&self) -> usize {
        4 * self.bins.len()
    }
}

/// Complex per-bin sums Σ g_k(ℓ) x_ℓ before taking magnitudes.
pub fn encode_complex(
    signal: &SparseSignal,
    ensemble: &CodeEnsemble,
    params: &ModulationParams,
) -> Result<Vec<[Complex64; 4]>> {
    if signal.n() != ensemble.n() || signal.n() != params.n() {
        return Err(Error::Dimension(format!(
            "signal n = {}, ensemble n = {}, modulation n = {}",
            signal.n(),
            ensemble.n(),
            params.n()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = vec![[zero; 4]; ensemble.m()];
    let mut slots = Vec::with_capacity(ensemble.d());
    for &(l, x) in signal.support() {
        let g = params.coeffs(l);
        ensemble.slots_into(l, &mut slots);
        for &s in &slots {
            for k in 0..4 {
                acc[s][k] += g[k] * x;
            }
        }
    }
    Ok(acc)
}

/// y_{i,k} = |Σ_{ℓ in bin i} g_k(ℓ) x_ℓ| in O(Kd) time and O(M) memory.
pub fn encode(
    signal: &SparseSignal,
    ensemble: &CodeEnsemble,
    params: &ModulationParams,
) -> Result<MeasurementSet> {
    let bins = encode_complex(signal, ensemble, params)?
        .into_iter()
        .map(|s| s.map(|v| v.norm()))
        .collect();
    Ok(MeasurementSet { params: *params, bins })
}

/// Row tensor product: block i holds G with its columns masked by row i of H.
///
/// ```
/// use phasecode::measurement::row_tensor_product;
/// use phasecode::Complex64;
///
/// // Three-row illustrative modulation with ω = π/10 and exponents starting at 0.
/// let w = std::f64::consts::PI / 10.0;
/// let g: Vec<Vec<Complex64>> = vec![
///     (0..5).map(|_| Complex64::new(1.0, 0.0)).collect(),
///     (0..5).map(|k| Complex64::from_polar(1.0, w * k as f64)).collect(),
///     (0..5).map(|k| Complex64::new((w * k as f64).cos(), 0.0)).collect(),
/// ];
/// let h = vec![
///     vec![1.0, 0.0, 1.0, 0.0, 0.0],
///     vec![0.0, 1.0, 0.0, 1.0, 0.0],
///     vec![1.0, 1.0, 0.0, 0.0, 1.0],
/// ];
/// let a = row_tensor_product(&g, &h).unwrap();
/// assert_eq!(a.len(), 9);
/// let x = [Complex64::new(1.0, 0.0), Complex64::new(0.0, -2.0)];
/// let y: Vec<f64> = a.iter().map(|r| (r[0] * x[0] + r[1] * x[1]).norm()).collect();
/// assert!((y[2] / y[0] - 1.0).abs() < 1e-15);
/// assert!((y[5] / y[3] - w.cos()).abs() < 1e-15);
/// ```
pub fn row_tensor_product(g: &[Vec<Complex64>], h: &[Vec<f64>]) -> Result<Vec<Vec<Complex64>>> {
    let n = g.first().map(Vec::len).unwrap_or(0);
    if g.iter().any(|r| r.len() != n) || h.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("G and H rows must all have n columns".into()));
    }
    Ok(h
        .iter()
        .flat_map(|hr| g.iter().map(move |gr| gr.iter().zip(hr).map(|(a, b)| a * b).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_signal, ValueModel};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn tensor_product_small_example() {
        let h = vec![vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let g = vec![vec![c(0.1), c(0.2), c(0.3)], vec![c(0.4), c(0.5), c(0.6)]];
        let a = row_tensor_product(&g, &h).unwrap();
        let expect = [
            [0.0, 0.2, 0.0],
            [0.0, 0.5, 0.0],
            [0.1, 0.2, 0.0],
            [0.4, 0.5, 0.0],
            [0.0, 0.0, 0.3],
            [0.0, 0.0, 0.6],
        ];
        for (row, e) in a.iter().zip(expect) {
            for (v, e) in row.iter().zip(e) {
                assert_eq!(*v, c(e));
            }
        }
    }

    #[test]
    fn tensor_product_identity_row() {
        let g = vec![vec![c(1.0), c(2.0)], vec![c(3.0), c(4.0)]];
        let a = row_tensor_product(&g, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(a, g);
        assert!(row_tensor_product(&g, &[vec![1.0]]).is_err());
    }

    #[test]
    fn coefficient_identities() {
        for kind in [ModulationKind::Standard, ModulationKind::FourierFriendly] {
            let p = ModulationParams::new(97, kind, 13).unwrap();
            for l in 1..=97 {
                let [g1, g2, g3, g4] = p.coeffs(l);
                assert!((g1 + g2 - g3).norm() < 1e-15);
                assert!((g1.norm() - 1.0).abs() < 1e-15);
                assert!((g2.norm() - 1.0).abs() < 1e-15);
                assert!((g4.norm() - 1.0).abs() < 1e-15);
                assert_eq!(g3.im, 0.0);
                if kind == ModulationKind::Standard {
                    assert!(g3.re >= 0.0);
                }
                let e = Complex64::from_polar(1.0, 2.0 * p.theta(l));
                assert!((g1 * g2.conj() - e).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn check_phase_is_exact_for_huge_n() {
        let n = 10_000_000_000u64;
        let p = ModulationParams::new(n, ModulationKind::Standard, n - 1).unwrap();
        let ph = p.check_phase(n - 1);
        assert!((ph - 2.0 * PI / n as f64).abs() < 1e-20);
    }

    #[test]
    fn draw_never_returns_zero_shift() {
        for s in 0..200 {
            let p = ModulationParams::draw(2, ModulationKind::Standard, RngSeed(s)).unwrap();
            assert_eq!(p.check_shift(), 1);
        }
        assert!(ModulationParams::new(10, ModulationKind::Standard, 0).is_err());
    }

    #[test]
    fn single_ball_signature() {
        let e = CodeEnsemble::balls_and_bins(300, 40, 3, RngSeed(3)).unwrap();
        let p = ModulationParams::draw(300, ModulationKind::Standard, RngSeed(4)).unwrap();
        let v = Complex64::new(0.3, -1.2);
        let s = SparseSignal::new(300, vec![(123, v)]).unwrap();
        let y = encode(&s, &e, &p).unwrap();
        let bins = e.bins_of(123).unwrap();
        for (i, b) in y.bins.iter().enumerate() {
            if bins.contains(&(i as u64 + 1)) {
                let m = v.norm();
                let expect = [m, m, 2.0 * m * p.theta(123).cos(), m];
                for k in 0..4 {
                    assert!((b[k] - expect[k]).abs() < 1e-14);
                }
            } else {
                assert_eq!(*b, [0.0; 4]);
            }
        }
        assert_eq!(y.total(), 160);
    }

    #[test]
    fn zero_signal_zero_measurements() {
        let e = CodeEnsemble::balls_and_bins(30, 8, 2, RngSeed(1)).unwrap();
        let p = ModulationParams::draw(30, ModulationKind::Standard, RngSeed(1)).unwrap();
        let s = SparseSignal::new(30, vec![]).unwrap();
        assert!(encode(&s, &e, &p).unwrap().bins.iter().all(|b| *b == [0.0; 4]));
    }

    #[test]
    fn implicit_matches_dense_tensor_product() {
        let n = 512;
        let e = CodeEnsemble::balls_and_bins(n, 24, 3, RngSeed(8)).unwrap();
        let p = ModulationParams::draw(n, ModulationKind::Standard, RngSeed(9)).unwrap();
        let s = generate_signal(n, 8, RngSeed(10), ValueModel::ComplexGaussian).unwrap();
        let h: Vec<Vec<f64>> = e
            .to_dense()
            .unwrap()
            .into_iter()
            .map(|r| r.into_iter().map(f64::from).collect())
            .collect();
        let a = row_tensor_product(&p.matrix().unwrap(), &h).unwrap();
        let x = s.to_dense().unwrap();
        let dense: Vec<f64> = a
            .iter()
            .map(|r| r.iter().zip(&x).map(|(a, x)| a * x).sum::<Complex64>().norm())
            .collect();
        let y = encode(&s, &e, &p).unwrap();
        let flat: Vec<f64> = y.bins.iter().flatten().copied().collect();
        assert_eq!(flat.len(), dense.len());
        for (u, v) in flat.iter().zip(&dense) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let e = CodeEnsemble::balls_and_bins(30, 8, 2, RngSeed(1)).unwrap();
        let p = ModulationParams::draw(31, ModulationKind::Standard, RngSeed(1)).unwrap();
        let s = SparseSignal::new(30, vec![]).unwrap();
        assert!(matches!(encode(&s, &e, &p), Err(Error::Dimension(_))));
    }
}
