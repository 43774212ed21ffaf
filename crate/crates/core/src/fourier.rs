//! Fourier-friendly acquisition: diagonal masks and lenses (DFTs).
//!
//! A CRT stage of height f aliases the spectrum X = Fx into f bins,
//! (CX)_r = Σ_{j ≡ r mod f} X_j, where C is the circulant built on the
//! period-f impulse train. Since C = F M F^{-1} with M = (n/f)·B and B a
//! binary mask, |CX| = (n/f)|F B x|: one mask and one lens. The length-n
//! output is f-periodic, so a detector reads f values.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::decoder::{decode, Algorithm, DecodeResult, DecoderOptions};
use crate::ensemble::{CodeEnsemble, EnsembleKind};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementSet, ModulationKind, ModulationParams};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(&mut buf);
    buf
}

/// Unnormalized forward DFT, X_k = Σ_t x_t e^{-2πi kt/n}.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    transform(x, false)
}

/// Inverse of [`dft`], including the 1/n factor.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let s = 1.0 / x.len().max(1) as f64;
    transform(x, true).into_iter().map(|v| v * s).collect()
}

/// Eigenvalues μ_j = Σ_m c_m e^{+2πi jm/n} of the circulant with first
/// column c, so that C = F diag(μ) F^{-1}.
pub fn circulant_eigenvalues(c: &[Complex64]) -> Vec<Complex64> {
    transform(c, true)
}

/// (Cv)_r = Σ_m c_m v_{r-m}, evaluated directly over the nonzeros of c.
pub fn circulant_apply(c: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let n = c.len();
    let nz: Vec<(usize, Complex64)> = c.iter().copied().enumerate().filter(|e| e.1.norm() != 0.0).collect();
    (0..n)
        .map(|r| nz.iter().map(|&(m, cm)| cm * v[(r + n - m) % n]).sum())
        .collect()
}

/// |F (mask ∘ x)|.
pub fn mask_lens_measure(x: &[Complex64], mask: &[Complex64]) -> Result<Vec<f64>> {
    if mask.len() != x.len() {
        return Err(Error::Dimension(format!("mask length {} vs signal length {}", mask.len(), x.len())));
    }
    let m: Vec<Complex64> = x.iter().zip(mask).map(|(a, b)| a * b).collect();
    Ok(dft(&m).into_iter().map(|v| v.norm()).collect())
}

/// Which modulation a physical acquisition realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// |CX|.
    Plain,
    /// x_{t+1}: e^{iωℓ} modulation.
    ShiftFwd,
    /// x_{t-1}: e^{-iωℓ} modulation.
    ShiftBwd,
    /// Cosine mask between two lenses: 2cos(ωℓ) modulation.
    Cosine,
    /// x_{t+L}: e^{iω'ℓ} modulation.
    Check,
}

/// Physical element counts of one acquisition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpticalOps {
    pub masks: usize,
    pub lenses: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageAcquisition {
    /// The f unique magnitudes, in bin order.
    pub values: Vec<f64>,
    pub ops: OpticalOps,
}

#[derive(Clone, Debug, PartialEq)]
struct Stage {
    height: usize,
    offset: usize,
    mask: Vec<f64>,
}

/// Masks for every CRT stage plus the cosine and shift settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskLensPlan {
    n: usize,
    params: ModulationParams,
    stages: Vec<Stage>,
    cosine: Vec<f64>,
}

const REPLICA_TOL: f64 = 1e-9;

impl MaskLensPlan {
    pub fn new(ensemble: &CodeEnsemble, params: &ModulationParams) -> Result<Self> {
        if ensemble.kind() != EnsembleKind::Crt {
            return Err(Error::Unsupported("mask/lens acquisition needs a CRT ensemble".into()));
        }
        if params.kind() != ModulationKind::FourierFriendly {
            return Err(Error::Unsupported("mask/lens acquisition needs ω = 2π/n".into()));
        }
        if params.n() != ensemble.n() {
            return Err(Error::Dimension(format!("modulation n = {} vs ensemble n = {}", params.n(), ensemble.n())));
        }
        if ensemble.n() > 1 << 24 {
            return Err(Error::Unsupported(format!("physical simulation at n = {}", ensemble.n())));
        }
        let n = ensemble.n() as usize;
        let heights = ensemble.stage_heights().expect("crt");
        let offsets = ensemble.stage_offsets().expect("crt");
        let mut stages = Vec::with_capacity(heights.len());
        for (&f, &o) in heights.iter().zip(offsets) {
            let f = f as usize;
            let train = impulse_train(n, f);
            let gain = (n / f) as f64;
            let mu = circulant_eigenvalues(&train);
            let mut mask = Vec::with_capacity(n);
            for v in mu {
                let b = v / gain;
                let bit = b.re.round();
                if (b - bit).norm() > 1e-10 || !(bit == 0.0 || bit == 1.0) {
                    return Err(Error::Parameter(format!("stage {f}: derived mask is not binary")));
                }
                mask.push(bit);
            }
            stages.push(Stage { height: f, offset: o as usize, mask });
        }
        let cosine = (0..n).map(|k| (2.0 * PI * ((k + 1) % n) as f64 / n as f64).cos()).collect();
        Ok(Self { n, params: *params, stages, cosine })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_height(&self, stage: usize) -> usize {
        self.stages[stage].height
    }

    /// Binary mask B of a stage.
    pub fn stage_mask(&self, stage: usize) -> &[f64] {
        &self.stages[stage].mask
    }

    /// First column of the stage circulant.
    pub fn stage_circulant(&self, stage: usize) -> Vec<Complex64> {
        impulse_train(self.n, self.stages[stage].height)
    }

    /// Real cosine mask D̃_k = cos(ω(k+1)).
    pub fn cosine_mask(&self) -> &[f64] {
        &self.cosine
    }

    fn shift_of(&self, v: Variant) -> usize {
        match v {
            Variant::Plain | Variant::Cosine => 0,
            Variant::ShiftFwd => 1 % self.n,
            Variant::ShiftBwd => self.n - 1,
            Variant::Check => self.params.check_shift() as usize,
        }
    }

    /// Full length-n detector image of one acquisition, before subsampling,
    /// already rescaled and reordered so entry r reads bin r mod f.
    pub fn detector_image(&self, x: &[Complex64], stage: usize, variant: Variant) -> Result<(Vec<Complex64>, OpticalOps)> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("signal length {} vs plan n = {}", x.len(), self.n)));
        }
        let st = self.stages.get(stage).ok_or_else(|| Error::Parameter(format!("no stage {stage}")))?;
        let n = self.n;
        let mut ops = OpticalOps::default();
        let mut mask = |v: &mut [Complex64], m: &[f64]| {
            ops.masks += 1;
            v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
        };
        let out = match variant {
            Variant::Cosine => {
                let mut y = dft(x);
                mask(&mut y, &self.cosine);
                let mut z = dft(&y);
                mask(&mut z, &st.mask);
                let w = dft(&z);
                ops.lenses += 3;
                // F B F D̃ F x = f · R C D̃ X with R the index reversal.
                let scale = 2.0 / st.height as f64;
                (0..n).map(|r| w[(n - r) % n] * scale).collect()
            }
            _ => {
                let s = self.shift_of(variant);
                let mut shifted: Vec<Complex64> = (0..n).map(|t| x[(t + s) % n]).collect();
                mask(&mut shifted, &st.mask);
                ops.lenses += 1;
                let gain = (n / st.height) as f64;
                dft(&shifted).into_iter().map(|v| v * gain).collect()
            }
        };
        Ok((out, ops))
    }

    /// Acquires one stage and returns its f unique magnitudes after
    /// verifying the replica property.
    pub fn acquire_stage(&self, x: &[Complex64], stage: usize, variant: Variant) -> Result<StageAcquisition> {
        let (img, ops) = self.detector_image(x, stage, variant)?;
        let f = self.stages[stage].height;
        let peak = img.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let dev = img
            .iter()
            .enumerate()
            .map(|(k, v)| (v.norm() - img[k % f].norm()).abs())
            .fold(0.0, f64::max);
        if dev > REPLICA_TOL * peak.max(f64::MIN_POSITIVE) {
            return Err(Error::Replica { stage, deviation: dev / peak });
        }
        Ok(StageAcquisition { values: img[..f].iter().map(|v| v.norm()).collect(), ops })
    }
}

fn impulse_train(n: usize, f: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| if m % f == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
        .collect()
}

/// Measurements of the spectrum X = Fx through d stages of four physical
/// acquisitions each.
pub fn ff_sparse_acquire(x: &[Complex64], ensemble: &CodeEnsemble, params: &ModulationParams) -> Result<MeasurementSet> {
    let plan = MaskLensPlan::new(ensemble, params)?;
    let mut bins = vec![[0.0; 4]; ensemble.m()];
    for s in 0..plan.num_stages() {
        let off = plan.stages[s].offset;
        for (k, v) in [Variant::ShiftFwd, Variant::ShiftBwd, Variant::Cosine, Variant::Check].into_iter().enumerate() {
            let acq = plan.acquire_stage(x, s, v)?;
            for (r, y) in acq.values.into_iter().enumerate() {
                bins[off + r][k] = y;
            }
        }
    }
    Ok(MeasurementSet { params: *params, bins })
}

/// Decodes the spectrum support from Fourier-friendly measurements.
/// Index ℓ of the result is frequency ℓ - 1.
pub fn ff_sparse_decode(
    meas: &MeasurementSet,
    ensemble: &CodeEnsemble,
    algorithm: Algorithm,
    k_hint: Option<usize>,
) -> Result<DecodeResult> {
    if ensemble.kind() != EnsembleKind::Crt {
        return Err(Error::Unsupported("Fourier-friendly decoding needs a CRT ensemble".into()));
    }
    if meas.params.kind() != ModulationKind::FourierFriendly {
        return Err(Error::Unsupported("measurements were not taken with ω = 2π/n".into()));
    }
    decode(meas, ensemble, algorithm, k_hint, &DecoderOptions::default())
}

/// Worst relative residuals of the operator identities over random inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityReport {
    pub n: usize,
    pub trials: usize,
    /// |F M x| against the aliasing circulant applied to Fx.
    pub circulant: f64,
    /// Deviation of each detector image from its f-periodic tiling.
    pub replica: f64,
    /// F²x against n times the index reversal of x.
    pub involution: f64,
    /// Every optical acquisition against the implicit encoder on Fx.
    pub cascade: f64,
}

impl IdentityReport {
    pub fn worst(&self) -> f64 {
        self.circulant.max(self.replica).max(self.involution).max(self.cascade)
    }
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let peak = b.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / peak
}

/// Checks the mask/lens identities for the CRT code on `coprimes` with
/// `trials` random signals.
pub fn verify_identities(coprimes: &[u64], alpha: usize, trials: usize, seed: crate::signal::RngSeed) -> Result<IdentityReport> {
    use rand::Rng;
    let ens = CodeEnsemble::crt(coprimes, alpha)?;
    let n = usize::try_from(ens.n()).ok().filter(|&n| n <= 1 << 24).ok_or_else(|| {
        Error::Parameter(format!("n = {} too large for dense verification", ens.n()))
    })?;
    let mut rep = IdentityReport { n, trials, ..IdentityReport::default() };
    for t in 0..trials {
        let ts = seed.derive(t as u64);
        let params = ModulationParams::draw(n as u64, ModulationKind::FourierFriendly, ts.derive(0))?;
        let plan = MaskLensPlan::new(&ens, &params)?;
        let mut rng = ts.derive(1).rng();
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let big = dft(&x);
        for s in 0..plan.num_stages() {
            let gain = (n / plan.stage_height(s)) as f64;
            let mask: Vec<Complex64> = plan.stage_mask(s).iter().map(|&b| Complex64::new(b * gain, 0.0)).collect();
            let optical = mask_lens_measure(&x, &mask)?;
            let direct: Vec<f64> = circulant_apply(&plan.stage_circulant(s), &big).iter().map(|v| v.norm()).collect();
            rep.circulant = rep.circulant.max(rel_dev(&optical, &direct));
            let f = plan.stage_height(s);
            for v in [Variant::Plain, Variant::ShiftFwd, Variant::ShiftBwd, Variant::Cosine, Variant::Check] {
                let (img, _) = plan.detector_image(&x, s, v)?;
                let mags: Vec<f64> = img.iter().map(|z| z.norm()).collect();
                let tiled: Vec<f64> = (0..n).map(|k| mags[k % f]).collect();
                rep.replica = rep.replica.max(rel_dev(&mags, &tiled));
            }
        }
        let twice = dft(&big);
        let rev: Vec<f64> = (0..n).map(|k| x[(n - k) % n].norm()).collect();
        let got: Vec<f64> = (0..n).map(|k| (twice[k] / n as f64 - x[(n - k) % n]).norm()).collect();
        rep.involution = rep.involution.max(got.iter().copied().fold(0.0, f64::max) / rev.iter().copied().fold(f64::MIN_POSITIVE, f64::max));
        let spectrum = crate::signal::SparseSignal::from_dense(&big)?;
        let want = crate::measurement::encode(&spectrum, &ens, &params)?;
        let got = ff_sparse_acquire(&x, &ens, &params)?;
        let a: Vec<f64> = got.bins.iter().flatten().copied().collect();
        let b: Vec<f64> = want.bins.iter().flatten().copied().collect();
        rep.cascade = rep.cascade.max(rel_dev(&a, &b));
    }
    Ok(rep)
}
