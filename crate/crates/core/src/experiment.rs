//! Monte Carlo harness: configuration, per-trial scoring, aggregates, CSV.
//!
//! Ground truth is used only after decoding, to score the output.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::error_floor;
use crate::decoder::{decode, Algorithm, DecodeResult, DecodeStatus, DecoderOptions};
use crate::ensemble::CodeEnsemble;
use crate::error::{param, Error, Result};
use crate::fourier::{ff_sparse_acquire, ff_sparse_decode, idft};
use crate::measurement::{encode, ModulationKind, ModulationParams};
use crate::signal::{generate_signal, RngSeed, SparseSignal, ValueModel};

/// Relative error under which a recovered value counts as correct.
pub const VALUE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Design,
    Bench,
    Decode,
    Nonsparse,
    FfVerify,
    FfSim,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Design => "design",
            Mode::Bench => "bench",
            Mode::Decode => "decode",
            Mode::Nonsparse => "nonsparse",
            Mode::FfVerify => "ff-verify",
            Mode::FfSim => "ff-sim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Mode::Simulate,
            "design" => Mode::Design,
            "bench" => Mode::Bench,
            "decode" => Mode::Decode,
            "nonsparse" => Mode::Nonsparse,
            "ff-verify" => Mode::FfVerify,
            "ff-sim" => Mode::FfSim,
            _ => return param(format!("unknown mode {s:?}")),
        })
    }
}

/// How the code is drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleSpec {
    /// Fresh balls-and-bins code per trial.
    BallsAndBins,
    Crt { coprimes: Vec<u64>, alpha: usize },
}

/// Either a load factor or an explicit bin count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Load {
    C(f64),
    Bins(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: u64,
    pub k: usize,
    pub d: usize,
    pub load: Load,
    pub ensemble: EnsembleSpec,
    pub algorithm: Algorithm,
    pub modulation: ModulationKind,
    pub values: ValueModel,
    pub trials: usize,
    pub seed: u64,
    /// Fraction of K that must be verified; defaults to 1 - p*(d, M/K).
    pub success_threshold: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            n: 10_000_000_000,
            k: 1000,
            d: 7,
            load: Load::C(3.32),
            ensemble: EnsembleSpec::BallsAndBins,
            algorithm: Algorithm::Unicolor,
            modulation: ModulationKind::Standard,
            values: ValueModel::ComplexGaussian,
            trials: 100,
            seed: 1,
            success_threshold: None,
        }
    }
}

fn algorithm_str(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Unicolor => "unicolor",
        Algorithm::Multicolor => "multicolor",
    }
}

pub fn parse_algorithm(s: &str) -> Result<Algorithm> {
    match s {
        "unicolor" => Ok(Algorithm::Unicolor),
        "multicolor" => Ok(Algorithm::Multicolor),
        _ => param(format!("unknown algorithm {s:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parameter(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_coprimes(s: &str) -> Result<Vec<u64>> {
    s.split(',').map(|t| parse_num("coprimes", t.trim())).collect()
}

impl ExperimentConfig {
    /// Bin count: ceil(cK) for a load factor, the stage total for CRT.
    pub fn bins(&self) -> Result<usize> {
        if let EnsembleSpec::Crt { coprimes, alpha } = &self.ensemble {
            return Ok(CodeEnsemble::crt(coprimes, *alpha)?.m());
        }
        match self.load {
            Load::Bins(m) => Ok(m),
            Load::C(c) => Ok((c * self.k as f64 - 1e-9).ceil().max(0.0) as usize),
        }
    }

    /// Ambient dimension; fixed by the moduli for CRT codes.
    pub fn ambient(&self) -> Result<u64> {
        match &self.ensemble {
            EnsembleSpec::Crt { coprimes, alpha } => Ok(CodeEnsemble::crt(coprimes, *alpha)?.n()),
            EnsembleSpec::BallsAndBins => Ok(self.n),
        }
    }

    pub fn left_degree(&self) -> Result<usize> {
        match &self.ensemble {
            EnsembleSpec::Crt { coprimes, alpha } => Ok(CodeEnsemble::crt(coprimes, *alpha)?.d()),
            EnsembleSpec::BallsAndBins => Ok(self.d),
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        if let Some(t) = self.success_threshold {
            return Ok(t);
        }
        if self.k == 0 {
            return Ok(1.0);
        }
        let c = self.bins()? as f64 / self.k as f64;
        Ok(1.0 - error_floor(self.left_degree()? as f64 / c, self.left_degree()?))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.bins()?;
        let n = self.ambient()?;
        let d = self.left_degree()?;
        if self.k as u64 > n {
            return param(format!("K = {} exceeds n = {n}", self.k));
        }
        if m == 0 || d == 0 || d > m {
            return param(format!("need 1 <= d <= M, got d = {d}, M = {m}"));
        }
        if let Load::C(c) = self.load {
            if !(c > 0.0) {
                return param("c must be positive");
            }
        }
        if let Some(t) = self.success_threshold {
            if !(0.0..=1.0).contains(&t) {
                return param("success threshold must lie in [0, 1]");
            }
        }
        if self.modulation == ModulationKind::FourierFriendly && !matches!(self.ensemble, EnsembleSpec::Crt { .. }) {
            return param("Fourier-friendly modulation requires a CRT ensemble");
        }
        Ok(())
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode={}", self.mode.as_str());
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "d={}", self.d);
        match self.load {
            Load::C(c) => {
                let _ = writeln!(s, "c={c}");
            }
            Load::Bins(m) => {
                let _ = writeln!(s, "bins={m}");
            }
        }
        match &self.ensemble {
            EnsembleSpec::BallsAndBins => {
                let _ = writeln!(s, "ensemble=balls");
            }
            EnsembleSpec::Crt { coprimes, alpha } => {
                let list: Vec<String> = coprimes.iter().map(u64::to_string).collect();
                let _ = writeln!(s, "ensemble=crt\ncoprimes={}\nalpha={alpha}", list.join(","));
            }
        }
        let _ = writeln!(s, "algorithm={}", algorithm_str(self.algorithm));
        let _ = writeln!(
            s,
            "modulation={}",
            match self.modulation {
                ModulationKind::Standard => "standard",
                ModulationKind::FourierFriendly => "fourier",
            }
        );
        let _ = writeln!(
            s,
            "values={}",
            match self.values {
                ValueModel::ComplexGaussian => "gaussian",
                ValueModel::UnitCircle => "unit",
            }
        );
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "seed={}", self.seed);
        if let Some(t) = self.success_threshold {
            let _ = writeln!(s, "threshold={t}");
        }
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped, so an echoed header parses back.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut coprimes = None;
        let mut alpha = 1usize;
        let mut crt = false;
        for (i, raw) in text.lines().enumerate() {
            // Commented key=value lines are read so echoed CSV headers round trip.
            let commented = raw.trim_start().starts_with('#');
            let line = raw.trim().trim_start_matches('#').trim();
            if line.is_empty() || (commented && !line.contains('=')) {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or(Error::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "mode" => cfg.mode = Mode::parse(v)?,
                "n" => cfg.n = parse_num(key, v)?,
                "k" | "K" => cfg.k = parse_num(key, v)?,
                "d" => cfg.d = parse_num(key, v)?,
                "c" => cfg.load = Load::C(parse_num(key, v)?),
                "bins" | "M" => cfg.load = Load::Bins(parse_num(key, v)?),
                "ensemble" => {
                    crt = match v {
                        "balls" => false,
                        "crt" => true,
                        _ => return param(format!("unknown ensemble {v:?}")),
                    }
                }
                "coprimes" => coprimes = Some(parse_coprimes(v)?),
                "alpha" => alpha = parse_num(key, v)?,
                "algorithm" => cfg.algorithm = parse_algorithm(v)?,
                "modulation" => {
                    cfg.modulation = match v {
                        "standard" => ModulationKind::Standard,
                        "fourier" => ModulationKind::FourierFriendly,
                        _ => return param(format!("unknown modulation {v:?}")),
                    }
                }
                "values" => {
                    cfg.values = match v {
                        "gaussian" => ValueModel::ComplexGaussian,
                        "unit" => ValueModel::UnitCircle,
                        _ => return param(format!("unknown value model {v:?}")),
                    }
                }
                "trials" => cfg.trials = parse_num(key, v)?,
                "seed" => cfg.seed = parse_num(key, v)?,
                "threshold" => cfg.success_threshold = Some(parse_num(key, v)?),
                _ => return Err(Error::Parse { line: i + 1, msg: format!("unknown key {key:?}") }),
            }
        }
        if crt {
            let coprimes = coprimes.ok_or_else(|| Error::Parameter("crt ensemble needs coprimes".into()))?;
            cfg.ensemble = EnsembleSpec::Crt { coprimes, alpha };
        }
        Ok(cfg)
    }

    /// The configuration as `# key=value` comment lines.
    pub fn header(&self) -> String {
        self.to_kv().lines().map(|l| format!("# {l}\n")).collect()
    }

    fn build_ensemble(&self, seed: RngSeed) -> Result<CodeEnsemble> {
        match &self.ensemble {
            EnsembleSpec::BallsAndBins => CodeEnsemble::balls_and_bins(self.n, self.bins()?, self.d, seed),
            EnsembleSpec::Crt { coprimes, alpha } => CodeEnsemble::crt(coprimes, *alpha),
        }
    }
}

/// Post-hoc comparison of a decoder output with the truth.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Score {
    /// Recovered entries matching the truth after one global rotation.
    pub correct: usize,
    /// Recovered entries off the support or with a wrong value.
    pub wrong: usize,
    /// correct / K (1 when K = 0).
    pub verified_fraction: f64,
}

/// Scores `recovered` against `truth` using the least-squares global rotation
/// over the entries that land on the support.
pub fn score(recovered: &[(u64, Complex64)], truth: &SparseSignal) -> Score {
    let matched: Vec<(Complex64, Complex64)> =
        recovered.iter().filter_map(|&(i, v)| truth.value(i).map(|t| (v, t))).collect();
    let off_support = recovered.len() - matched.len();
    let acc: Complex64 = matched.iter().map(|(v, t)| t * v.conj()).sum();
    let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { Complex64::new(1.0, 0.0) };
    let correct = matched.iter().filter(|(v, t)| (v * rot - t).norm() <= VALUE_TOLERANCE * t.norm()).count();
    let k = truth.k();
    Score {
        correct,
        wrong: off_support + matched.len() - correct,
        verified_fraction: if k == 0 { 1.0 } else { correct as f64 / k as f64 },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub status: DecodeStatus,
    /// Verified fraction of the true support.
    pub fraction_recovered: f64,
    pub wrong: usize,
    pub sweeps: usize,
    pub wall_time_ms: f64,
    pub success: bool,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub trials: usize,
    pub failures: usize,
    pub error_probability: f64,
    pub mean_fraction: f64,
    /// Wilson interval for the error probability.
    pub ci: (f64, f64),
}

impl Aggregate {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let trials = records.len();
        let failures = records.iter().filter(|r| !r.success).count();
        let (lo, hi) = wilson_interval(failures, trials);
        Self {
            trials,
            failures,
            error_probability: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
            mean_fraction: if trials == 0 {
                0.0
            } else {
                records.iter().map(|r| r.fraction_recovered).sum::<f64>() / trials as f64
            },
            ci: (lo, hi),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub aggregate: Aggregate,
    pub records: Vec<TrialRecord>,
}

/// Seeds used by one trial.
#[derive(Clone, Copy, Debug)]
pub struct TrialSeeds {
    pub trial: RngSeed,
    pub signal: RngSeed,
    pub code: RngSeed,
    pub modulation: RngSeed,
}

impl TrialSeeds {
    pub fn new(master: u64, trial: usize) -> Self {
        let t = RngSeed(master).derive(trial as u64);
        Self { trial: t, signal: t.derive(0), code: t.derive(1), modulation: t.derive(2) }
    }
}

/// One trial: signal, code and modulation from derived seeds, then decode
/// and score. Also returns the raw decoder output.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, opts: &DecoderOptions) -> Result<(TrialRecord, DecodeResult)> {
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let n = cfg.ambient()?;
    let signal = generate_signal(n, cfg.k, seeds.signal, cfg.values)?;
    let ens = cfg.build_ensemble(seeds.code)?;
    let params = ModulationParams::draw(n, cfg.modulation, seeds.modulation)?;
    let (res, ms) = match cfg.modulation {
        ModulationKind::Standard => {
            let meas = encode(&signal, &ens, &params)?;
            let t0 = Instant::now();
            let res = decode(&meas, &ens, cfg.algorithm, Some(cfg.k), opts)?;
            (res, t0.elapsed().as_secs_f64() * 1e3)
        }
        ModulationKind::FourierFriendly => {
            let x = time_domain(&signal)?;
            let meas = ff_sparse_acquire(&x, &ens, &params)?;
            let t0 = Instant::now();
            let res = ff_sparse_decode(&meas, &ens, cfg.algorithm, Some(cfg.k))?;
            (res, t0.elapsed().as_secs_f64() * 1e3)
        }
    };
    let sc = score(&res.recovered, &signal);
    let record = TrialRecord {
        trial,
        seed: seeds.trial.0,
        status: res.status,
        fraction_recovered: sc.verified_fraction,
        wrong: sc.wrong,
        sweeps: res.iterations,
        wall_time_ms: ms,
        success: sc.wrong == 0 && sc.verified_fraction >= cfg.threshold()?,
    };
    Ok((record, res))
}

/// x = F⁻¹X for a spectrum whose index ℓ is frequency ℓ - 1.
pub fn time_domain(spectrum: &SparseSignal) -> Result<Vec<Complex64>> {
    Ok(idft(&spectrum.to_dense()?))
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Independent trials in parallel, merged by trial index.
pub fn run_simulation(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SimulationOutcome> {
    cfg.validate()?;
    let opts = DecoderOptions::default();
    let records: Vec<TrialRecord> = with_threads(threads, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t, &opts).map(|(r, _)| r))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SimulationOutcome { aggregate: Aggregate::from_records(&records), records })
}

/// Per-trial CSV with the config echoed as a comment header. Timing is
/// optional because it breaks byte-for-byte reproducibility.
pub fn write_trials_csv(mut w: impl Write, cfg: &ExperimentConfig, records: &[TrialRecord], with_time: bool) -> Result<()> {
    w.write_all(cfg.header().as_bytes())?;
    write!(w, "trial,seed,status,fraction_recovered,wrong,sweeps,success")?;
    writeln!(w, "{}", if with_time { ",wall_time_ms" } else { "" })?;
    for r in records {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.status.as_str(),
            r.fraction_recovered,
            r.wrong,
            r.sweeps,
            u8::from(r.success)
        )?;
        if with_time {
            write!(w, ",{:.3}", r.wall_time_ms)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_aggregate_csv(mut w: impl Write, cfg: &ExperimentConfig, agg: &Aggregate) -> Result<()> {
    w.write_all(cfg.header().as_bytes())?;
    writeln!(w, "trials,failures,error_probability,mean_fraction,ci_low,ci_high")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        agg.trials, agg.failures, agg.error_probability, agg.mean_fraction, agg.ci.0, agg.ci.1
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub peak_resident: usize,
    pub mean_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares fit of median_ms against K; the median shrugs off
    /// preempted repetitions.
    pub slope_ms_per_k: f64,
    pub intercept_ms: f64,
    pub r_squared: f64,
}

/// Ordinary least squares y = a + b x, returning (a, b, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 && sxx > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - b * mx, b, r2)
}

/// Decode time and resident state against K at fixed n, `cfg.trials`
/// repetitions per K, run sequentially so timings do not contend.
/// Repetitions cycle through every K in turn, so slow stretches of the
/// machine spread over all rows instead of skewing a few.
pub fn run_bench(n: u64, ks: &[usize], cfg: &ExperimentConfig) -> Result<BenchReport> {
    if cfg.ensemble != EnsembleSpec::BallsAndBins || cfg.modulation != ModulationKind::Standard {
        return Err(Error::Unsupported("benchmarks run on the implicit balls-and-bins code only".into()));
    }
    let reps = cfg.trials.max(1);
    let opts = DecoderOptions::default();
    let configs: Vec<ExperimentConfig> = ks.iter().map(|&k| ExperimentConfig { n, k, trials: reps, ..cfg.clone() }).collect();
    for c in &configs {
        c.validate()?;
        // Untimed warm-up so the first K does not pay for cold caches.
        run_trial(c, reps, &opts)?;
    }
    let mut times = vec![Vec::with_capacity(reps); ks.len()];
    let mut peak = vec![0usize; ks.len()];
    let mut frac = vec![0.0; ks.len()];
    for t in 0..reps {
        for (i, c) in configs.iter().enumerate() {
            let (r, res) = run_trial(c, t, &opts)?;
            times[i].push(r.wall_time_ms);
            frac[i] += r.fraction_recovered;
            peak[i] = peak[i].max(res.resources.resident());
        }
    }
    let rows: Vec<BenchRow> = ks
        .iter()
        .zip(times)
        .zip(peak.iter().zip(&frac))
        .map(|((&k, mut ts), (&peak_resident, &f))| {
            let mean_ms = ts.iter().sum::<f64>() / reps as f64;
            ts.sort_by(f64::total_cmp);
            let median_ms = if reps % 2 == 1 { ts[reps / 2] } else { 0.5 * (ts[reps / 2 - 1] + ts[reps / 2]) };
            BenchRow { k, mean_ms, median_ms, peak_resident, mean_fraction: f / reps as f64 }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_ms).collect();
    let (a, b, r2) = linear_fit(&xs, &ys);
    Ok(BenchReport { rows, slope_ms_per_k: b, intercept_ms: a, r_squared: r2 })
}

pub fn write_bench_csv(mut w: impl Write, cfg: &ExperimentConfig, rep: &BenchReport) -> Result<()> {
    w.write_all(cfg.header().as_bytes())?;
    writeln!(w, "# slope_ms_per_k={} intercept_ms={} r_squared={}", rep.slope_ms_per_k, rep.intercept_ms, rep.r_squared)?;
    writeln!(w, "k,mean_ms,median_ms,peak_resident,mean_fraction")?;
    for r in &rep.rows {
        writeln!(w, "{},{:.3},{:.3},{},{}", r.k, r.mean_ms, r.median_ms, r.peak_resident, r.mean_fraction)?;
    }
    Ok(())
}

/// Full-recovery rates of both ensembles and both decoders on shared signals.
#[derive(Clone, Debug, PartialEq)]
pub struct CrtRow {
    pub k: usize,
    pub trials: usize,
    pub bb_unicolor: f64,
    pub crt_unicolor: f64,
    pub bb_multicolor: f64,
    pub crt_multicolor: f64,
}

fn full(res: &DecodeResult, truth: &SparseSignal) -> bool {
    let s = score(&res.recovered, truth);
    s.wrong == 0 && s.correct == truth.k()
}

/// Paired comparison: every trial draws one signal over n = Πf and decodes it
/// from a CRT code and from a fresh balls-and-bins code with the same M and d.
pub fn run_crt_comparison(
    coprimes: &[u64],
    alpha: usize,
    ks: &[usize],
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<CrtRow>> {
    let crt = CodeEnsemble::crt(coprimes, alpha)?;
    let (n, m, d) = (crt.n(), crt.m(), crt.d());
    let opts = DecoderOptions::default();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let wins: Vec<[bool; 4]> = with_threads(threads, || {
            (0..trials)
                .into_par_iter()
                .map(|t| -> Result<[bool; 4]> {
                    let s = TrialSeeds::new(seed ^ (k as u64).wrapping_mul(0x9e37_79b9), t);
                    let signal = generate_signal(n, k, s.signal, ValueModel::ComplexGaussian)?;
                    let bb = CodeEnsemble::balls_and_bins(n, m, d, s.code)?;
                    let params = ModulationParams::draw(n, ModulationKind::Standard, s.modulation)?;
                    let mut out = [false; 4];
                    for (j, ens) in [&bb, &crt].into_iter().enumerate() {
                        let meas = encode(&signal, ens, &params)?;
                        for (a, alg) in [Algorithm::Unicolor, Algorithm::Multicolor].into_iter().enumerate() {
                            out[2 * a + j] = full(&decode(&meas, ens, alg, Some(k), &opts)?, &signal);
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let rate = |i: usize| {
            if trials == 0 {
                0.0
            } else {
                wins.iter().filter(|w| w[i]).count() as f64 / trials as f64
            }
        };
        rows.push(CrtRow { k, trials, bb_unicolor: rate(0), crt_unicolor: rate(1), bb_multicolor: rate(2), crt_multicolor: rate(3) });
    }
    Ok(rows)
}

pub fn write_crt_csv(mut w: impl Write, coprimes: &[u64], alpha: usize, seed: u64, rows: &[CrtRow]) -> Result<()> {
    let list: Vec<String> = coprimes.iter().map(u64::to_string).collect();
    writeln!(w, "# coprimes={}\n# alpha={alpha}\n# seed={seed}", list.join(","))?;
    writeln!(w, "k,trials,bb_unicolor,crt_unicolor,bb_multicolor,crt_multicolor")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.k, r.trials, r.bb_unicolor, r.crt_unicolor, r.bb_multicolor, r.crt_multicolor)?;
    }
    Ok(())
}

/// Paired Fourier-friendly versus unconstrained recovery on one spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct FfSimRow {
    pub trials: usize,
    pub ff_full: f64,
    pub general_full: f64,
}

/// Each trial draws a K-sparse spectrum, acquires it through masks and
/// lenses on the CRT code, and separately encodes it with a balls-and-bins
/// code of the same size under the standard modulation.
pub fn run_ff_simulation(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<FfSimRow> {
    let EnsembleSpec::Crt { coprimes, alpha } = &cfg.ensemble else {
        return Err(Error::Unsupported("ff-sim needs a CRT ensemble".into()));
    };
    let crt = CodeEnsemble::crt(coprimes, *alpha)?;
    let (n, m, d, k) = (crt.n(), crt.m(), crt.d(), cfg.k);
    let opts = DecoderOptions::default();
    let wins: Vec<[bool; 2]> = with_threads(threads, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<[bool; 2]> {
                let s = TrialSeeds::new(cfg.seed, t);
                let spectrum = generate_signal(n, k, s.signal, cfg.values)?;
                let ff_params = ModulationParams::draw(n, ModulationKind::FourierFriendly, s.modulation)?;
                let ff = ff_sparse_acquire(&time_domain(&spectrum)?, &crt, &ff_params)?;
                let a = full(&ff_sparse_decode(&ff, &crt, cfg.algorithm, Some(k))?, &spectrum);
                let bb = CodeEnsemble::balls_and_bins(n, m, d, s.code)?;
                let params = ModulationParams::draw(n, ModulationKind::Standard, s.modulation)?;
                let meas = encode(&spectrum, &bb, &params)?;
                let b = full(&decode(&meas, &bb, cfg.algorithm, Some(k), &opts)?, &spectrum);
                Ok([a, b])
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let trials = wins.len();
    let rate = |i: usize| if trials == 0 { 0.0 } else { wins.iter().filter(|w| w[i]).count() as f64 / trials as f64 };
    Ok(FfSimRow { trials, ff_full: rate(0), general_full: rate(1) })
}

/// Uncolored fractions 1 - |largest color|/K after each sweep, padded to
/// `sweeps` entries, for one Unicolor trial.
pub fn uncolored_trajectory(cfg: &ExperimentConfig, trial: usize, sweeps: usize) -> Result<Vec<f64>> {
    let opts = DecoderOptions { min_sweeps: sweeps, max_sweeps: Some(sweeps), ..DecoderOptions::default() };
    let c = ExperimentConfig { algorithm: Algorithm::Unicolor, ..cfg.clone() };
    let (_, res) = run_trial(&c, trial, &opts)?;
    let k = cfg.k.max(1) as f64;
    let mut out: Vec<f64> = res.trajectory.iter().map(|&s| 1.0 - s as f64 / k).collect();
    let last = out.last().copied().unwrap_or(1.0);
    out.resize(sweeps, last);
    Ok(out)
}
