use phasecode::experiment::score;
use phasecode::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn toy(n: u64, bins: &[Vec<u64>], support: Vec<(u64, Complex64)>, shift: u64) -> (MeasurementSet, CodeEnsemble, SparseSignal) {
    let ens = CodeEnsemble::from_bins(n, bins).unwrap();
    let x = SparseSignal::new(n, support).unwrap();
    let p = ModulationParams::new(n, ModulationKind::Standard, shift).unwrap();
    (encode(&x, &ens, &p).unwrap(), ens, x)
}

#[test]
fn four_bin_toy_colors_in_graph_order() {
    let bins = vec![vec![1, 4, 5], vec![3, 6], vec![2, 3, 4, 5, 6], vec![1, 3]];
    let support = vec![(1, c(1.0, 0.5)), (2, c(-0.7, 1.2)), (3, c(0.4, -2.0)), (4, c(1.5, 0.3))];
    let (y, ens, x) = toy(6, &bins, support, 5);
    let res = decode_unicolor(&y, &ens, Some(4)).unwrap();
    assert_eq!(res.order, vec![3, 1, 4, 2]);
    assert_eq!(res.status, DecodeStatus::FullRecovery);
    assert!(align_global_phase(&res.recovered, &x).unwrap() < 1e-9);
}

fn example_five() -> (MeasurementSet, CodeEnsemble, SparseSignal) {
    let bins = vec![vec![1], vec![1, 2], vec![3], vec![3, 4], vec![2, 3, 4]];
    let support = vec![(1, c(0.9, -0.2)), (2, c(-1.1, 0.6)), (3, c(0.3, 1.4)), (4, c(2.0, -0.5))];
    toy(4, &bins, support, 3)
}

#[test]
fn unicolor_stalls_on_two_colors() {
    let (y, ens, x) = example_five();
    let res = decode_unicolor(&y, &ens, Some(4)).unwrap();
    assert_eq!(res.recovered.len(), 2);
    assert_eq!(res.status, DecodeStatus::PartialRecovery);
    let s = score(&res.recovered, &x);
    assert_eq!((s.correct, s.wrong), (2, 0));
}

#[test]
fn multicolor_merges_through_shared_bin() {
    let (y, ens, x) = example_five();
    let res = decode_multicolor(&y, &ens, Some(4)).unwrap();
    assert_eq!(res.recovered.len(), 4);
    assert_eq!(res.status, DecodeStatus::FullRecovery);
    assert!(align_global_phase(&res.recovered, &x).unwrap() < 1e-9);
}

#[test]
fn empty_signal_is_full_recovery() {
    let ens = CodeEnsemble::balls_and_bins(1000, 30, 4, RngSeed(1)).unwrap();
    let x = SparseSignal::new(1000, vec![]).unwrap();
    let p = ModulationParams::draw(1000, ModulationKind::Standard, RngSeed(2)).unwrap();
    let y = encode(&x, &ens, &p).unwrap();
    for alg in [Algorithm::Unicolor, Algorithm::Multicolor] {
        let res = decode(&y, &ens, alg, Some(0), &DecoderOptions::default()).unwrap();
        assert_eq!(res.status, DecodeStatus::FullRecovery);
        assert!(res.recovered.is_empty());
    }
}

#[test]
fn single_ball_found_by_singleton_pass() {
    let ens = CodeEnsemble::balls_and_bins(1 << 30, 8, 3, RngSeed(5)).unwrap();
    let x = SparseSignal::new(1 << 30, vec![(123_456_789, c(-0.3, 0.8))]).unwrap();
    let p = ModulationParams::draw(1 << 30, ModulationKind::Standard, RngSeed(6)).unwrap();
    let y = encode(&x, &ens, &p).unwrap();
    let res = decode_multicolor(&y, &ens, Some(1)).unwrap();
    assert_eq!(res.iterations, 1);
    assert_eq!(res.recovered.len(), 1);
    assert_eq!(res.recovered[0].0, 123_456_789);
    assert!((res.recovered[0].1.norm() - x.support()[0].1.norm()).abs() < 1e-12);
}

fn random_instance(seed: u64, n: u64, k: usize, c: f64, d: usize) -> (MeasurementSet, CodeEnsemble, SparseSignal) {
    let s = RngSeed(seed);
    let x = generate_signal(n, k, s.derive(0), ValueModel::ComplexGaussian).unwrap();
    let m = (c * k as f64).ceil() as usize;
    let ens = CodeEnsemble::balls_and_bins(n, m, d, s.derive(1)).unwrap();
    let p = ModulationParams::draw(n, ModulationKind::Standard, s.derive(2)).unwrap();
    (encode(&x, &ens, &p).unwrap(), ens, x)
}

#[test]
fn no_false_coloring_and_multicolor_dominates() {
    let mut uni_full = 0;
    for seed in 0..1000 {
        let (y, ens, x) = random_instance(seed, 1_000_000, 40, 2.9, 6);
        let uni = decode_unicolor(&y, &ens, Some(40)).unwrap();
        let multi = decode_multicolor(&y, &ens, Some(40)).unwrap();
        for res in [&uni, &multi] {
            let s = score(&res.recovered, &x);
            assert_eq!(s.wrong, 0, "seed {seed}");
            if !res.recovered.is_empty() {
                assert!(align_global_phase(&res.recovered, &x).unwrap() < 1e-8, "seed {seed}");
            }
        }
        if uni.status == DecodeStatus::FullRecovery {
            uni_full += 1;
            assert_eq!(multi.status, DecodeStatus::FullRecovery, "seed {seed}");
        }
    }
    assert!(uni_full > 100, "only {uni_full} full recoveries");
}

#[test]
fn sweep_budget_is_respected() {
    let (y, ens, _) = random_instance(11, 1 << 40, 300, 3.3, 7);
    let opts = DecoderOptions { max_sweeps: Some(2), ..DecoderOptions::default() };
    let res = decode(&y, &ens, Algorithm::Unicolor, Some(300), &opts).unwrap();
    assert!(res.iterations <= 2);
    let opts = DecoderOptions { min_sweeps: 30, max_sweeps: Some(30), ..DecoderOptions::default() };
    let res = decode(&y, &ens, Algorithm::Unicolor, Some(300), &opts).unwrap();
    assert_eq!(res.trajectory.len(), 30);
    assert!(res.trajectory.windows(2).skip(1).all(|w| w[0] <= w[1]));
}

#[test]
fn memory_counters_scale_with_k_not_n() {
    let small = random_instance(3, 1 << 20, 200, 3.32, 7);
    let large = random_instance(3, 1 << 50, 200, 3.32, 7);
    let a = decode_unicolor(&small.0, &small.1, Some(200)).unwrap().resources;
    let b = decode_unicolor(&large.0, &large.1, Some(200)).unwrap().resources;
    assert_eq!(a.bins, b.bins);
    assert!(b.resident() <= 2 * a.resident());
    assert!(b.resident() < 20 * 200);
}
