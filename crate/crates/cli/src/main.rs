use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecode::analysis::design_table;
use phasecode::experiment::{
    parse_coprimes, run_bench, run_crt_comparison, run_ff_simulation, run_simulation, score, with_threads,
    write_aggregate_csv, write_bench_csv, write_crt_csv, write_trials_csv, EnsembleSpec, ExperimentConfig, Load, Mode,
};
use phasecode::fourier::verify_identities;
use phasecode::io::{read_measurements, read_signal, write_measurements, write_signal};
use phasecode::nonsparse::{chain_decode, chain_measure, ff_nonsparse_decode, ff_nonsparse_measure};
use phasecode::{
    decode, encode, generate_signal, Algorithm, CodeEnsemble, Complex64, DecoderOptions, Error, ModulationKind,
    ModulationParams, RngSeed, SparseSignal, ValueModel,
};
use serde_json::json;

/// Compressive phase retrieval experiments.
#[derive(Parser)]
#[command(name = "phasecode", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Code design table: smallest load c per left degree and its error floor.
    Design(DesignArgs),
    /// Monte Carlo error probability at one operating point.
    Simulate(SimArgs),
    /// Decode time and resident state against K.
    Bench(BenchArgs),
    /// Decode a measurement file.
    Decode(DecodeArgs),
    /// Dense-signal schemes with 3n - 2 or 3n magnitudes.
    Nonsparse(NonsparseArgs),
    /// Check the mask/lens operator identities.
    FfVerify(FfVerifyArgs),
    /// Sparse spectrum recovery through masks and lenses.
    FfSim(FfSimArgs),
    /// Paired CRT versus balls-and-bins success rates.
    CrtCompare(CrtArgs),
    /// Write a random sparse signal file.
    GenSignal(GenArgs),
    /// Measure a signal file and write a measurement file.
    Encode(EncodeArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Unicolor,
    Multicolor,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Unicolor => Algorithm::Unicolor,
            AlgArg::Multicolor => Algorithm::Multicolor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum EnsArg {
    Balls,
    Crt,
}

#[derive(Args, Clone)]
struct CodeArgs {
    #[arg(long, value_enum, default_value = "balls")]
    ensemble: EnsArg,
    #[arg(long, default_value_t = 7)]
    d: usize,
    /// Bin count M; overrides --c.
    #[arg(long)]
    bins: Option<usize>,
    /// Load factor, M = ceil(cK).
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated pairwise coprime moduli for --ensemble crt.
    #[arg(long)]
    coprimes: Option<String>,
    #[arg(long, default_value_t = 1)]
    alpha: usize,
}

impl CodeArgs {
    fn spec(&self) -> phasecode::Result<EnsembleSpec> {
        match self.ensemble {
            EnsArg::Balls => Ok(EnsembleSpec::BallsAndBins),
            EnsArg::Crt => {
                let s = self.coprimes.as_deref().ok_or_else(|| Error::Parameter("--coprimes is required for crt".into()))?;
                Ok(EnsembleSpec::Crt { coprimes: parse_coprimes(s)?, alpha: self.alpha })
            }
        }
    }

    fn load(&self) -> Load {
        match (self.bins, self.c) {
            (Some(m), _) => Load::Bins(m),
            (None, Some(c)) => Load::C(c),
            (None, None) => Load::C(3.32),
        }
    }

    fn ensemble(&self, n: u64, k: usize, seed: RngSeed) -> phasecode::Result<CodeEnsemble> {
        match self.spec()? {
            EnsembleSpec::BallsAndBins => {
                let m = match self.load() {
                    Load::Bins(m) => m,
                    Load::C(c) => (c * k as f64 - 1e-9).ceil() as usize,
                };
                CodeEnsemble::balls_and_bins(n, m, self.d, seed)
            }
            EnsembleSpec::Crt { coprimes, alpha } => CodeEnsemble::crt(&coprimes, alpha),
        }
    }
}

#[derive(Args)]
struct DesignArgs {
    /// Degrees as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "4..10")]
    d: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    code: CodeArgs,
    /// key=value configuration file. Code and signal flags are ignored when
    /// it is given; --trials, --seed and --threshold still override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000_000_000)]
    n: u64,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, value_enum, default_value = "unicolor")]
    algorithm: AlgArg,
    /// Monte Carlo trials [default: 100].
    #[arg(long)]
    trials: Option<usize>,
    /// Fraction of K that must be recovered; defaults to 1 - p*.
    #[arg(long)]
    threshold: Option<f64>,
    /// Add per-trial wall time to the CSV (breaks byte-identical reruns).
    #[arg(long)]
    with_time: bool,
    /// Also write the aggregate row here.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000_000_000)]
    n: u64,
    /// Comma-separated sparsities.
    #[arg(long, default_value = "1000,2000,4000,10000")]
    ks: String,
    #[arg(long, default_value_t = 7)]
    d: usize,
    #[arg(long, default_value_t = 3.32)]
    c: f64,
    /// Repetitions per K.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, value_enum, default_value = "unicolor")]
    algorithm: AlgArg,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Measurement file.
    #[arg(long)]
    measurements: PathBuf,
    /// Ground-truth signal file, used for K and scoring only.
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Sparsity hint when no signal file is given.
    #[arg(long)]
    k: Option<usize>,
    /// Seed of the balls-and-bins code.
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    #[arg(long, value_enum, default_value = "multicolor")]
    algorithm: AlgArg,
    #[arg(long)]
    fourier: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum NsMode {
    General,
    Fourier,
}

#[derive(Args)]
struct NonsparseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "general")]
    mode: NsMode,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Signal file to measure instead of a random dense signal.
    #[arg(long)]
    signal: Option<PathBuf>,
    /// 1-based anchor for the general scheme.
    #[arg(long, default_value_t = 1)]
    anchor: usize,
    /// Number of random round trips to run.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Fail with exit code 3 when any round trip exceeds this residual.
    #[arg(long)]
    self_test: Option<f64>,
    /// Write the measurements of the first signal here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct FfVerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Moduli sets separated by `;`.
    #[arg(long, default_value = "3,4,5;5,8,9;2,3,5,7,11")]
    sets: String,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Args)]
struct FfSimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "7,8,9,11,13")]
    coprimes: String,
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, default_value = "multicolor")]
    algorithm: AlgArg,
}

#[derive(Args)]
struct CrtArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "47,49,50,53,57,59,61")]
    coprimes: String,
    #[arg(long, default_value_t = 1)]
    alpha: usize,
    #[arg(long, default_value = "107,114,121,128,135,142,149,156,163,170")]
    ks: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    unit: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    /// Seed for the check shift L.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    fourier: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Fail {
    Config(String),
    Check(String),
    Runtime(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Parse { .. } | Error::Unsupported(_) | Error::Dimension(_) => {
                Fail::Config(e.to_string())
            }
            _ => Fail::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Runtime(e.to_string())
    }
}

type Res<T = ()> = Result<T, Fail>;

fn output(path: &Option<PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
}

fn parse_list(s: &str) -> Res<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Fail::Config(format!("bad list entry {t:?}"))))
        .collect()
}

fn parse_degrees(s: &str) -> Res<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| Fail::Config(format!("bad range {s:?}")))?;
        let b: usize = b.trim().parse().map_err(|_| Fail::Config(format!("bad range {s:?}")))?;
        if a > b {
            return Err(Fail::Config(format!("empty range {s:?}")));
        }
        return Ok((a..=b).collect());
    }
    parse_list(s)
}

fn cmd_design(a: DesignArgs) -> Res {
    let ds = parse_degrees(&a.d)?;
    let mut w = output(&a.out)?;
    writeln!(w, "d,c_min,c_max,lambda_min,lambda_max,p_star,m_per_K")?;
    for r in design_table(&ds) {
        writeln!(w, "{},{:.4},{:.4},{:.6},{:.6},{:.4e},{:.4}", r.d, r.c, r.c_max_giant, r.lambda_min, r.lambda_max, r.p_star, r.m_per_k)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: SimArgs) -> Res {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_kv(&std::fs::read_to_string(p).map_err(|e| Fail::Config(format!("{}: {e}", p.display())))?)?,
        None => ExperimentConfig {
            mode: Mode::Simulate,
            n: a.n,
            k: a.k,
            d: a.code.d,
            load: a.code.load(),
            ensemble: a.code.spec()?,
            algorithm: a.algorithm.into(),
            modulation: ModulationKind::Standard,
            values: ValueModel::ComplexGaussian,
            trials: 100,
            seed: 1,
            success_threshold: None,
        },
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if a.threshold.is_some() {
        cfg.success_threshold = a.threshold;
    }
    cfg.validate()?;
    let out = run_simulation(&cfg, a.common.threads)?;
    let mut w = output(&a.common.out)?;
    write_trials_csv(&mut w, &cfg, &out.records, a.with_time)?;
    w.flush()?;
    if let Some(p) = &a.aggregate {
        write_aggregate_csv(BufWriter::new(File::create(p)?), &cfg, &out.aggregate)?;
    }
    let g = &out.aggregate;
    eprintln!(
        "trials {} failures {} error_probability {:.4} (95% CI {:.4}..{:.4}) mean_fraction {:.6}",
        g.trials, g.failures, g.error_probability, g.ci.0, g.ci.1, g.mean_fraction
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Res {
    let ks = parse_list(&a.ks)?;
    let cfg = ExperimentConfig {
        mode: Mode::Bench,
        n: a.n,
        k: ks.iter().copied().max().unwrap_or(0),
        d: a.d,
        load: Load::C(a.c),
        algorithm: a.algorithm.into(),
        trials: a.trials,
        seed: a.common.seed(),
        ..ExperimentConfig::default()
    };
    let rep = with_threads(a.common.threads, || run_bench(a.n, &ks, &cfg))??;
    let mut w = output(&a.common.out)?;
    write_bench_csv(&mut w, &cfg, &rep)?;
    w.flush()?;
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> Res {
    let kind = if a.fourier { ModulationKind::FourierFriendly } else { ModulationKind::Standard };
    let meas = read_measurements(open(&a.measurements)?, kind)?;
    let truth = a.signal.as_deref().map(|p| read_signal(open(p)?).map_err(Fail::from)).transpose()?;
    let k = a.k.or(truth.as_ref().map(SparseSignal::k));
    let n = meas.params.n();
    let ens = a.code.ensemble(n, k.unwrap_or(1), RngSeed(a.code_seed))?;
    if ens.m() != meas.num_bins() {
        return Err(Fail::Config(format!("code has {} bins, file has {}", ens.m(), meas.num_bins())));
    }
    let t0 = Instant::now();
    let res = decode(&meas, &ens, a.algorithm.into(), k, &DecoderOptions::default())?;
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    let fraction = match &truth {
        Some(t) => score(&res.recovered, t).verified_fraction,
        None => res.fraction_recovered,
    };
    let mut w = output(&a.out)?;
    for (i, v) in &res.recovered {
        writeln!(w, "{} {} {}", i, v.re, v.im)?;
    }
    writeln!(
        w,
        "{}",
        json!({
            "status": res.status.as_str(),
            "iterations": res.iterations,
            "recovered": res.recovered.len(),
            "fraction_recovered": fraction,
            "wall_time_ms": ms,
        })
    )?;
    w.flush()?;
    Ok(())
}

fn aligned_residual(a: &[Complex64], b: &[Complex64]) -> f64 {
    let acc: Complex64 = a.iter().zip(b).map(|(u, v)| v * u.conj()).sum();
    let rot = if acc.norm() > 0.0 { acc / acc.norm() } else { Complex64::new(1.0, 0.0) };
    let num: f64 = a.iter().zip(b).map(|(u, v)| (u * rot - v).norm_sqr()).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    (num / den).sqrt()
}

fn cmd_nonsparse(a: NonsparseArgs) -> Res {
    let mut worst: f64 = 0.0;
    let trials = if a.signal.is_some() { 1 } else { a.trials.max(1) };
    for t in 0..trials {
        let x = match &a.signal {
            Some(p) => read_signal(open(p)?)?.to_dense()?,
            None => generate_signal(a.n as u64, a.n, RngSeed(a.common.seed()).derive(t as u64), ValueModel::ComplexGaussian)?
                .to_dense()?,
        };
        let (est, count) = match a.mode {
            NsMode::General => {
                let m = chain_measure(&x, a.anchor)?;
                if t == 0 {
                    if let Some(p) = &a.dump {
                        let mut w = BufWriter::new(File::create(p)?);
                        writeln!(w, "{} {}", x.len(), a.anchor)?;
                        let mut k = 0;
                        for l in 1..=x.len() {
                            if l == a.anchor {
                                writeln!(w, "{} - -", m.mags[l - 1])?;
                            } else {
                                writeln!(w, "{} {} {}", m.mags[l - 1], m.sums[k], m.rotated_sums[k])?;
                                k += 1;
                            }
                        }
                    }
                }
                (chain_decode(&m)?, m.total())
            }
            NsMode::Fourier => {
                let m = ff_nonsparse_measure(&x)?;
                if t == 0 {
                    if let Some(p) = &a.dump {
                        let mut w = BufWriter::new(File::create(p)?);
                        writeln!(w, "{}", x.len())?;
                        for k in 0..x.len() {
                            writeln!(w, "{} {} {}", m.y1[k], m.y2[k], m.y3[k])?;
                        }
                    }
                }
                (ff_nonsparse_decode(&m)?, m.total())
            }
        };
        let r = aligned_residual(&est, &x);
        worst = worst.max(r);
        println!("trial {t} n {} measurements {count} residual {r:.3e}", x.len());
    }
    if let Some(tol) = a.self_test {
        if !(worst <= tol) {
            return Err(Fail::Check(format!("worst residual {worst:.3e} exceeds {tol:.1e}")));
        }
        println!("self-test PASS (worst residual {worst:.3e})");
    }
    Ok(())
}

fn cmd_ff_verify(a: FfVerifyArgs) -> Res {
    let mut ok = true;
    for set in a.sets.split(';') {
        let f = parse_coprimes(set.trim())?;
        let rep = verify_identities(&f, 1, a.trials, RngSeed(a.seed))?;
        for (name, v) in [
            ("circulant", rep.circulant),
            ("replica", rep.replica),
            ("involution", rep.involution),
            ("cascade", rep.cascade),
        ] {
            let pass = v <= a.tolerance;
            ok &= pass;
            println!("n={} {name}: {} (max residual {v:.2e})", rep.n, if pass { "PASS" } else { "FAIL" });
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Fail::Check("operator identity check failed".into()))
    }
}

fn cmd_ff_sim(a: FfSimArgs) -> Res {
    let coprimes = parse_coprimes(&a.coprimes)?;
    let n = CodeEnsemble::crt(&coprimes, a.alpha)?.n();
    let cfg = ExperimentConfig {
        mode: Mode::FfSim,
        n,
        k: a.k,
        ensemble: EnsembleSpec::Crt { coprimes, alpha: a.alpha },
        algorithm: a.algorithm.into(),
        modulation: ModulationKind::FourierFriendly,
        trials: a.trials,
        seed: a.common.seed(),
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let row = run_ff_simulation(&cfg, a.common.threads)?;
    let mut w = output(&a.common.out)?;
    w.write_all(cfg.header().as_bytes())?;
    writeln!(w, "trials,ff_full,general_full")?;
    writeln!(w, "{},{},{}", row.trials, row.ff_full, row.general_full)?;
    w.flush()?;
    Ok(())
}

fn cmd_crt(a: CrtArgs) -> Res {
    let f = parse_coprimes(&a.coprimes)?;
    let ks = parse_list(&a.ks)?;
    let rows = run_crt_comparison(&f, a.alpha, &ks, a.trials, a.common.seed(), a.common.threads)?;
    let mut w = output(&a.common.out)?;
    write_crt_csv(&mut w, &f, a.alpha, a.common.seed(), &rows)?;
    w.flush()?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Res {
    let model = if a.unit { ValueModel::UnitCircle } else { ValueModel::ComplexGaussian };
    let x = generate_signal(a.n, a.k, RngSeed(a.seed), model)?;
    let mut w = output(&a.out)?;
    write_signal(&mut w, &x)?;
    w.flush()?;
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Res {
    let x = read_signal(open(&a.signal)?)?;
    let ens = a.code.ensemble(x.n(), x.k(), RngSeed(a.code_seed))?;
    let kind = if a.fourier { ModulationKind::FourierFriendly } else { ModulationKind::Standard };
    let params = ModulationParams::draw(x.n(), kind, RngSeed(a.seed))?;
    let meas = encode(&x, &ens, &params)?;
    let mut w = output(&a.out)?;
    write_measurements(&mut w, &meas)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Design(a) => cmd_design(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Decode(a) => cmd_decode(a),
        Cmd::Nonsparse(a) => cmd_nonsparse(a),
        Cmd::FfVerify(a) => cmd_ff_verify(a),
        Cmd::FfSim(a) => cmd_ff_sim(a),
        Cmd::CrtCompare(a) => cmd_crt(a),
        Cmd::GenSignal(a) => cmd_gen(a),
        Cmd::Encode(a) => cmd_encode(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
        Err(Fail::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
