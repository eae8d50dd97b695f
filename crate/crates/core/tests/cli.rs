use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn supstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supstab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn certify_exit_codes() {
    let id = data("data/identity4.txt");
    let sig = data("data/signal4.txt");
    let out = supstab(&["certify", "--matrix", path(&id), "--signal", path(&sig)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("identifiable: true"));

    let cm = data("data/counterexample.txt");
    let cs = data("data/counterexample_signal.txt");
    let out = supstab(&["certify", "--matrix", path(&cm), "--signal", path(&cs)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("identifiable: false"));

    let bad = data("data/malformed.txt");
    assert_eq!(code(&supstab(&["certify", "--matrix", path(&bad), "--signal", path(&sig)])), 2);
    assert_eq!(code(&supstab(&["certify", "--matrix", "no/such/file", "--signal", path(&sig)])), 2);
    assert_eq!(code(&supstab(&["certify"])), 2);
}

#[test]
fn analyze_predict_verify_on_identity() {
    let dir = tempfile::tempdir().unwrap();
    let id = data("data/identity4.txt");
    let sig = data("data/signal4.txt");
    let rec = dir.path().join("analysis.json");
    let out = supstab(&["analyze", "--matrix", path(&id), "--signal", path(&sig), "--alpha", "inf", "--output", path(&rec)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("c1: 1e0"), "{text}");
    assert!(text.contains("c2: 5e-1"), "{text}");
    assert!(text.contains("extended support: [0, 2]"));

    // x0 = (2, 0, -1.5, 0), tau_max = 0.75; soft-thresholding of x0 + w at tau
    let noise = dir.path().join("w.txt");
    std::fs::write(&noise, "4\n0.1 0.2 -0.3 0.05\n").unwrap();
    let xfile = dir.path().join("x.txt");
    let out = supstab(&["predict", "--analysis", path(&rec), "--tau", "0.5", "--noise-file", path(&noise), "--output", path(&xfile)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let x = supstab::linalg::vector_from_text(&std::fs::read_to_string(&xfile).unwrap()).unwrap();
    let expected = [1.6, 0.0, -1.3, 0.0];
    for (a, b) in x.iter().zip(expected) {
        assert!((a - b).abs() <= 1e-12, "{x:?}");
    }

    let out = supstab(&["verify", "--analysis", path(&rec), "--tau", "0.5", "--noise-file", path(&noise)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("pass: true"));

    let out = supstab(&["predict", "--analysis", path(&rec), "--tau", "0.9"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau <= c2*x_min"));
    let out = supstab(&["predict", "--analysis", path(&rec), "--tau", "0.5", "--noise-uniform", "0.6"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("c1*tau"));
}

#[test]
fn analyze_failure_codes() {
    let id = data("data/identity4.txt");
    let sig = data("data/signal4.txt");
    let out = supstab(&["analyze", "--matrix", path(&id), "--signal", path(&sig), "--alpha", "1"]);
    assert_eq!(code(&out), 3);
    let cm = data("data/counterexample.txt");
    let cs = data("data/counterexample_signal.txt");
    let out = supstab(&["analyze", "--matrix", path(&cm), "--signal", path(&cs), "--alpha", "inf"]);
    assert_eq!(code(&out), 1);
    let out = supstab(&["analyze", "--matrix", path(&id), "--signal", path(&sig), "--alpha", "3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn derived_constants_are_labelled() {
    let id = data("data/identity4.txt");
    let sig = data("data/signal4.txt");
    let out = supstab(&["analyze", "--matrix", path(&id), "--signal", path(&sig), "--alpha", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("constants: derived"));
    assert!(text.contains("not a published result"));
}

#[test]
fn toy_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let out = supstab(&["toy", "--seed", "7", "--tau-list", "0.25,0.5,0.75,1", "--relative", "--output", path(&csv)]);
    assert_eq!(code(&out), 0);
    let got = std::fs::read_to_string(&csv).unwrap();
    let want = std::fs::read_to_string(data("golden/toy_seed7.csv")).unwrap();
    assert_eq!(got, want);
    assert_eq!(stdout(&out).matches("matches true").count(), 4);
}

#[test]
fn small_sweep_writes_monotone_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "# small sweep\nn = 20\nm = 10\nk_values = 2:6:2\ntrials_per_k = 3\ns_e_values = 0,2\n").unwrap();
    let outdir = dir.path().join("out");
    let out = supstab(&["sweep", "--config", path(&cfg), "--inv-alpha", "0,0.5,1", "--jobs", "2", "--output", path(&outdir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "failures.csv", "curves.csv", "curve_points.csv", "heatmap_se0.csv", "heatmap_se2.csv"] {
        let text = std::fs::read_to_string(outdir.join(f)).unwrap();
        assert!(text.starts_with("# supstab "), "{f}");
    }
    let records = std::fs::read_to_string(outdir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 2 + 3 * 3 * 3);

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(outdir.join("curves.csv"))
        .unwrap();
    let head: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    for row in rdr.records() {
        let row = row.unwrap();
        for inv in ["0", "0.5", "1"] {
            let col = |s: &str| {
                let name = format!("inv_alpha={inv};s_e={s}");
                let i = head.iter().position(|h| *h == name).unwrap();
                row[i].parse::<f64>().unwrap()
            };
            assert!(col("0") <= col("2") && col("2") <= col("inf"));
        }
    }

    let again = dir.path().join("again");
    let out = supstab(&["sweep", "--config", path(&cfg), "--inv-alpha", "0,0.5,1", "--output", path(&again)]);
    assert_eq!(code(&out), 0);
    for f in ["records.csv", "curves.csv", "heatmap_se0.csv"] {
        assert_eq!(
            std::fs::read(outdir.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
}

#[test]
fn paper_scale_preset_is_recognized() {
    let cfg = supstab::experiments::ExperimentConfig::preset("paper_scale").unwrap();
    assert_eq!((cfg.n, cfg.m), (1000, 900));
    assert_eq!(code(&supstab(&["sweep", "--config", "no_such_preset_or_file"])), 2);
}
