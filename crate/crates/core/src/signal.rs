//! Sparse signals, deterministic seeding and global-phase alignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{param, Error, Result};

/// 64-bit finalizer from the splitmix64 generator.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed for every randomized construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent child seed for a numbered stream.
    pub fn derive(self, stream: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(stream ^ 0xA076_1D64_78BD_642F)))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(s: u64) -> Self {
        RngSeed(s)
    }
}

/// Distribution of the nonzero values of a generated signal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValueModel {
    UnitCircle,
    #[default]
    ComplexGaussian,
}

/// Exactly K-sparse complex vector of length n, stored as its sorted support.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignal {
    n: u64,
    support: Vec<(u64, Complex64)>,
}

impl SparseSignal {
    /// Builds a signal, sorting the entries. Rejects duplicates, zeros and
    /// out-of-range indices.
    pub fn new(n: u64, mut support: Vec<(u64, Complex64)>) -> Result<Self> {
        if n == 0 {
            return param("signal length must be positive");
        }
        support.sort_by_key(|e| e.0);
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return param(format!("duplicate index {}", w[0].0));
            }
        }
        for &(i, v) in &support {
            if i == 0 || i > n {
                return param(format!("index {i} outside [1, {n}]"));
            }
            if v.norm() == 0.0 {
                return param(format!("zero value stored at index {i}"));
            }
        }
        Ok(Self { n, support })
    }

    /// Sparse view of a dense vector; exact zeros are dropped.
    pub fn from_dense(x: &[Complex64]) -> Result<Self> {
        let support = x
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() != 0.0)
            .map(|(i, &v)| (i as u64 + 1, v))
            .collect();
        Self::new(x.len() as u64, support)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[(u64, Complex64)] {
        &self.support
    }

    pub fn indices(&self) -> Vec<u64> {
        self.support.iter().map(|e| e.0).collect()
    }

    pub fn value(&self, index: u64) -> Option<Complex64> {
        self.support
            .binary_search_by_key(&index, |e| e.0)
            .ok()
            .map(|p| self.support[p].1)
    }

    /// Root mean square over the nonzero values.
    pub fn rms(&self) -> f64 {
        if self.support.is_empty() {
            return 0.0;
        }
        let s: f64 = self.support.iter().map(|e| e.1.norm_sqr()).sum();
        (s / self.support.len() as f64).sqrt()
    }

    /// The same signal multiplied by `e^{i phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Complex64::from_polar(1.0, phi);
        Self {
            n: self.n,
            support: self.support.iter().map(|&(i, v)| (i, v * r)).collect(),
        }
    }

    pub fn to_dense(&self) -> Result<Vec<Complex64>> {
        let len = usize::try_from(self.n)
            .ok()
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| Error::Parameter(format!("n = {} too large to densify", self.n)))?;
        let mut x = vec![Complex64::new(0.0, 0.0); len];
        for &(i, v) in &self.support {
            x[(i - 1) as usize] = v;
        }
        Ok(x)
    }
}

/// Draws a K-sparse signal with a uniformly random support.
pub fn generate_signal(n: u64, k: usize, seed: RngSeed, model: ValueModel) -> Result<SparseSignal> {
    if n == 0 {
        return param("signal length must be positive");
    }
    if k as u64 > n {
        return param(format!("sparsity K = {k} exceeds n = {n}"));
    }
    let len = usize::try_from(n).map_err(|_| Error::Parameter("n exceeds usize".into()))?;
    let mut rng = seed.rng();
    let mut idx: Vec<u64> = rand::seq::index::sample(&mut rng, len, k)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    idx.sort_unstable();
    let normal = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
    let floor = 1e-3;
    let support = idx
        .into_iter()
        .map(|i| {
            let v = match model {
                ValueModel::UnitCircle => Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI),
                ValueModel::ComplexGaussian => {
                    let v = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    let r = v.norm();
                    if r == 0.0 {
                        Complex64::new(floor, 0.0)
                    } else if r < floor {
                        v * (floor / r)
                    } else {
                        v
                    }
                }
            };
            (i, v)
        })
        .collect();
    SparseSignal::new(n, support)
}

/// Worst relative component error of `estimate` against `truth` after one
/// global rotation, taken from the first index the two share.
pub fn align_global_phase(estimate: &[(u64, Complex64)], truth: &SparseSignal) -> Result<f64> {
    let mut rot = None;
    let mut worst: f64 = 0.0;
    let mut matched = Vec::with_capacity(estimate.len());
    for &(i, v) in estimate {
        let t = truth
            .value(i)
            .ok_or_else(|| Error::Parameter(format!("estimated index {i} is not in the support")))?;
        matched.push((v, t));
    }
    for &(v, t) in &matched {
        let r = *rot.get_or_insert_with(|| {
            if v.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                let q = t / v;
                q / q.norm()
            }
        });
        worst = worst.max((v * r - t).norm() / t.norm());
    }
    if rot.is_none() {
        return Err(Error::UndefinedAlignment);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sparsity_gives_empty_support() {
        let s = generate_signal(6, 0, RngSeed(3), ValueModel::ComplexGaussian).unwrap();
        assert_eq!(s.k(), 0);
    }

    #[test]
    fn full_sparsity_covers_every_index() {
        let s = generate_signal(6, 6, RngSeed(9), ValueModel::UnitCircle).unwrap();
        assert_eq!(s.indices(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn same_seed_same_signal() {
        let a = generate_signal(2048, 5, RngSeed(77), ValueModel::ComplexGaussian).unwrap();
        let b = generate_signal(2048, 5, RngSeed(77), ValueModel::ComplexGaussian).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversparse_is_rejected() {
        assert!(generate_signal(4, 5, RngSeed(0), ValueModel::UnitCircle).is_err());
    }

    #[test]
    fn gaussian_values_respect_floor() {
        let s = generate_signal(100_000, 20_000, RngSeed(1), ValueModel::ComplexGaussian).unwrap();
        assert!(s.support().iter().all(|e| e.1.norm() >= 1e-3 * (1.0 - 1e-12)));
    }

    #[test]
    fn huge_ambient_dimension() {
        let s = generate_signal(10_000_000_000, 50, RngSeed(2), ValueModel::UnitCircle).unwrap();
        assert_eq!(s.k(), 50);
        assert!(s.indices().iter().all(|&i| (1..=10_000_000_000).contains(&i)));
    }

    #[test]
    fn alignment_is_phase_blind() {
        let s = generate_signal(50, 7, RngSeed(4), ValueModel::ComplexGaussian).unwrap();
        let rot = s.rotated(PI / 3.0);
        assert!(align_global_phase(rot.support(), &s).unwrap() < 1e-15);
        assert!(align_global_phase(s.support(), &s).unwrap() == 0.0);
    }

    #[test]
    fn alignment_reports_perturbation() {
        let s = generate_signal(50, 7, RngSeed(5), ValueModel::ComplexGaussian).unwrap();
        let mut est = s.rotated(1.1).support().to_vec();
        est[3].1 *= 1.0 + 1e-3;
        let r = align_global_phase(&est, &s).unwrap();
        assert!((r - 1e-3).abs() < 1e-12, "{r}");
    }

    #[test]
    fn alignment_errors() {
        let s = generate_signal(50, 3, RngSeed(6), ValueModel::ComplexGaussian).unwrap();
        assert!(matches!(align_global_phase(&[], &s), Err(Error::UndefinedAlignment)));
        let missing = (1..=50).find(|i| s.value(*i).is_none()).unwrap();
        assert!(align_global_phase(&[(missing, Complex64::new(1.0, 0.0))], &s).is_err());
    }

    #[test]
    fn constructor_rejects_bad_supports() {
        let one = Complex64::new(1.0, 0.0);
        assert!(SparseSignal::new(5, vec![(2, one), (2, one)]).is_err());
        assert!(SparseSignal::new(5, vec![(6, one)]).is_err());
        assert!(SparseSignal::new(5, vec![(0, one)]).is_err());
        assert!(SparseSignal::new(5, vec![(1, Complex64::new(0.0, 0.0))]).is_err());
        let s = SparseSignal::new(5, vec![(4, one), (1, one)]).unwrap();
        assert_eq!(s.indices(), vec![1, 4]);
    }
}
