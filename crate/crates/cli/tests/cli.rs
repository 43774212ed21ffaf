use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasecode")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn design_emits_one_row_per_degree() {
    let o = run(&["design", "--d", "4..10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,c_min,c_max,lambda_min,lambda_max,p_star,m_per_K");
    assert_eq!(lines.len(), 8);
    let d6: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(d6[0], 6.0);
    assert!((d6[1] - 3.17).abs() < 0.01);
    assert!((d6[6] - 4.0 * d6[1]).abs() < 1e-3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["simulate", "--n", "1000000", "--k", "60", "--trials", "6", "--seed", "5", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.contains("# seed=5"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

#[test]
fn config_file_drives_simulate_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nmode=simulate\nn=100000\nK=40\nd=6\nc=3.2\ntrials=3\nseed=9\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# d=6") && text.contains("# seed=9") && text.contains("# trials=2"));
    assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 2);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mode=simulate\nd=0\n").unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&cfg, "mode=simulate\nnonsense\n").unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["design", "--d", "9..4"]).status.code(), Some(2));
}

#[test]
fn ff_verify_passes() {
    let o = run(&["ff-verify", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.matches("PASS").count(), 12);
    assert!(!text.contains("FAIL"));
}

#[test]
fn nonsparse_self_test() {
    for mode in ["general", "fourier"] {
        let o = run(&["nonsparse", "--mode", mode, "--n", "32", "--trials", "2", "--self-test", "1e-8"]);
        assert_eq!(o.status.code(), Some(0), "{mode}");
        assert!(stdout(&o).contains("self-test PASS"));
    }
    let o = run(&["nonsparse", "--n", "16", "--self-test", "0"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn decode_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let (sig, meas, rec) = (p("x.txt"), p("y.txt"), p("r.txt"));
    assert!(run(&["gen-signal", "--n", "1000000000", "--k", "150", "--seed", "3", "--out", &sig]).status.success());
    let code = ["--d", "7", "--c", "3.32", "--code-seed", "11"];
    let mut enc = vec!["encode", "--signal", &sig, "--seed", "4", "--out", &meas];
    enc.extend(code);
    assert!(run(&enc).status.success());
    let mut dec = vec!["decode", "--measurements", &meas, "--signal", &sig, "--out", &rec];
    dec.extend(code);
    let o = run(&dec);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(&rec).unwrap();
    let status: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(status["status"], "full");
    assert_eq!(status["fraction_recovered"], 1.0);
    let truth = fs::read_to_string(&sig).unwrap();
    let idx = |s: &str| {
        let mut v: Vec<u64> = s
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .filter(|l| l.split_whitespace().count() == 3)
            .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
            .collect();
        v.sort_unstable();
        v
    };
    assert_eq!(idx(&text), idx(&truth));
    assert_eq!(idx(&text).len(), 150);
}
