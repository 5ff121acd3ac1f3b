use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hippoprog"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hippoprog")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

/// Asserts failure with a single `error <kind>: ...` line on stderr.
fn fails(args: &[&str], kind: &str) {
    let o = run(args);
    assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error {kind}: ")), "{err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const HEADER: &str = "subject_id,left_path,right_path,label,time_months,event";

fn survival_fixture(dir: &Path, rows: &[(&str, f64, f64, u8)]) -> (PathBuf, PathBuf) {
    let manifest = dir.join("manifest.csv");
    let preds = dir.join("pred.csv");
    let mut m = format!("{HEADER}\n");
    let mut q = String::from("subject_id,eta\n");
    for (id, eta, t, e) in rows {
        m.push_str(&format!("{id},{id}_l.vol3,{id}_r.vol3,MCI,{t},{e}\n"));
        q.push_str(&format!("{id},{eta}\n"));
    }
    std::fs::write(&manifest, m).unwrap();
    std::fs::write(&preds, q).unwrap();
    (manifest, preds)
}

#[test]
fn evaluate_prints_four_subject_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (m, q) = survival_fixture(
        dir.path(),
        &[
            ("a", 0.5, 40.0, 0),
            ("b", 2.0, 10.0, 1),
            ("c", 1.0, 30.0, 1),
            ("d", 3.0, 20.0, 1),
        ],
    );
    for rule in ["strict", "half"] {
        let out = ok(&[
            "evaluate",
            "--predictions",
            p(&q),
            "--manifest",
            p(&m),
            "--tie-rule",
            rule,
        ]);
        assert!(out.lines().any(|l| l == "c_index=0.833333"), "{out}");
        assert!(out.lines().any(|l| l == "pairs=6"), "{out}");
    }
    fails(
        &[
            "evaluate",
            "--predictions",
            p(&q),
            "--manifest",
            p(&m),
            "--tie-rule",
            "sometimes",
        ],
        "config",
    );
}

#[test]
fn evaluate_writes_metric_and_roc_tables() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(String, f64, f64, u8)> = (0..30)
        .map(|i| {
            (
                format!("s{i:02}"),
                (i % 7) as f64,
                6.0 * (1 + i % 10) as f64,
                (i % 3 != 0) as u8,
            )
        })
        .collect();
    let rows: Vec<(&str, f64, f64, u8)> = rows.iter().map(|(a, b, c, d)| (a.as_str(), *b, *c, *d)).collect();
    let (m, q) = survival_fixture(dir.path(), &rows);
    let out_dir = dir.path().join("eval");
    let args = [
        "evaluate",
        "--predictions",
        p(&q),
        "--manifest",
        p(&m),
        "--horizon",
        "24,36",
        "--seed",
        "5",
        "--out",
        p(&out_dir),
    ];
    let first = ok(&args);
    assert!(first.contains("auc_24="), "{first}");
    let table = std::fs::read_to_string(out_dir.join("evaluation.csv")).unwrap();
    assert!(table.starts_with("metric,value\nc_index,"));
    let roc = std::fs::read_to_string(out_dir.join("roc_36.csv")).unwrap();
    assert!(roc.starts_with("threshold,sensitivity,specificity\ninf,0,1\n"));
    assert_eq!(ok(&args), first);
}

#[test]
fn stratify_eight_subject_fixture_is_two_four_two() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(String, f64, f64, u8)> = (1..=8)
        .map(|i| (format!("s{i}"), i as f64, 6.0 * (9 - i) as f64, 1))
        .collect();
    let rows: Vec<(&str, f64, f64, u8)> = rows.iter().map(|(a, b, c, d)| (a.as_str(), *b, *c, *d)).collect();
    let (m, q) = survival_fixture(dir.path(), &rows);
    let out = dir.path().join("strat");
    let stdout = ok(&[
        "stratify",
        "--predictions",
        p(&q),
        "--manifest",
        p(&m),
        "--out",
        p(&out),
    ]);
    assert!(stdout.starts_with("low=2 middle=4 high=2\n"), "{stdout}");
    let groups = std::fs::read_to_string(out.join("groups.csv")).unwrap();
    let labels: Vec<&str> = groups.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(
        labels,
        ["Low", "Low", "Middle", "Middle", "Middle", "Middle", "High", "High"]
    );
    let lr = std::fs::read_to_string(out.join("logrank.csv")).unwrap();
    assert!(lr.contains("\nall,") && lr.contains("\nlow_vs_high,"));
    let km = std::fs::read_to_string(out.join("km.csv")).unwrap();
    assert!(km.starts_with("group,time,survival,at_risk,events\nLow,0,1,2,0\n"));
}

#[test]
fn usage_and_input_errors_are_single_lines() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    fails(&["frobnicate"], "usage");
    fails(&["evaluate", "--manifest", p(&missing)], "usage");
    fails(
        &["evaluate", "--predictions", p(&missing), "--manifest", p(&missing)],
        "io",
    );
    fails(
        &[
            "fit-cox",
            "--manifest",
            p(&missing),
            "--clinical",
            "--combined",
            "--out",
            p(&missing),
        ],
        "usage",
    );
    fails(&["fit-cox", "--manifest", p(&missing), "--out", p(&missing)], "usage");

    // MCI rows must carry follow-up
    let m = dir.path().join("m.csv");
    std::fs::write(&m, format!("{HEADER}\nx,l,r,MCI,,\n")).unwrap();
    fails(
        &["fit-cox", "--manifest", p(&m), "--clinical", "--out", p(&missing)],
        "parse",
    );

    // AD/NC rows without follow-up cannot be evaluated
    std::fs::write(&m, format!("{HEADER}\nx,l,r,AD,,\n")).unwrap();
    let q = dir.path().join("q.csv");
    std::fs::write(&q, "subject_id,eta\nx,1\n").unwrap();
    fails(
        &["evaluate", "--predictions", p(&q), "--manifest", p(&m)],
        "precondition",
    );

    // a manifest of only MCI rows has nothing to train on
    std::fs::write(&m, format!("{HEADER}\nx,l,r,MCI,12,1\n")).unwrap();
    fails(
        &["train-cnn", "--manifest", p(&m), "--out", p(&missing)],
        "precondition",
    );

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n_nc = lots\n").unwrap();
    fails(&["gen-data", "--config", p(&cfg), "--out", p(dir.path())], "config");
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

/// Runs every command on a tiny synthetic cohort and returns all outputs.
fn tiny_pipeline(root: &Path) -> (Vec<(PathBuf, Vec<u8>)>, String) {
    let cfg = root.join("run.cfg");
    std::fs::write(
        &cfg,
        "n_nc=12\nn_ad=12\nn_mci=40\ndims=16x16x24\nscale=1/8\nmax_iters=6\nbatch_size=4\neval_every=3\n\
         horizon=24,36\nbootstrap_resamples=50\nfolds=5\n",
    )
    .unwrap();
    let c = p(&cfg);
    let d = |name: &str| root.join(name).to_str().unwrap().to_string();
    let data = d("data");
    let manifest = d("data/manifest.csv");
    let mut log = String::new();
    log += &ok(&["gen-data", "--config", c, "--seed", "11", "--out", &data]);
    log += &ok(&[
        "train-cnn",
        "--config",
        c,
        "--seed",
        "11",
        "--manifest",
        &manifest,
        "--out",
        &d("model.hpnet"),
    ]);
    log += &ok(&[
        "extract-features",
        "--manifest",
        &manifest,
        "--model",
        &d("model.hpnet"),
        "--out",
        &d("feat.csv"),
    ]);
    log += &ok(&[
        "fit-cox",
        "--config",
        c,
        "--seed",
        "11",
        "--manifest",
        &manifest,
        "--features",
        &d("feat.csv"),
        "--out",
        &d("cox.txt"),
    ]);
    log += &ok(&[
        "fit-cox",
        "--config",
        c,
        "--manifest",
        &manifest,
        "--clinical",
        "--out",
        &d("clin.txt"),
    ]);
    log += &ok(&[
        "predict",
        "--config",
        c,
        "--manifest",
        &manifest,
        "--coxfit",
        &d("clin.txt"),
        "--out",
        &d("pred.csv"),
    ]);
    log += &ok(&[
        "predict",
        "--config",
        c,
        "--manifest",
        &manifest,
        "--coxfit",
        &d("cox.txt"),
        "--features",
        &d("feat.csv"),
        "--out",
        &d("pred_img.csv"),
    ]);
    log += &ok(&[
        "evaluate",
        "--config",
        c,
        "--seed",
        "11",
        "--predictions",
        &d("pred.csv"),
        "--manifest",
        &manifest,
        "--out",
        &d("eval"),
    ]);
    log += &ok(&[
        "stratify",
        "--predictions",
        &d("pred.csv"),
        "--manifest",
        &manifest,
        "--out",
        &d("strat"),
    ]);
    log += &ok(&[
        "relevance-map",
        "--manifest",
        &manifest,
        "--model",
        &d("model.hpnet"),
        "--subject",
        "SUBJ0001",
        "--out",
        &d("maps"),
    ]);
    std::fs::remove_file(&cfg).unwrap();
    (files_under(root), log)
}

#[test]
fn every_command_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, la) = tiny_pipeline(a.path());
    let (fb, lb) = tiny_pipeline(b.path());
    assert_eq!(la.replace(p(a.path()), ""), lb.replace(p(b.path()), ""));
    assert_eq!(fa.len(), fb.len());
    for ((pa, ba), (pb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs between runs", pa.display());
    }
    let names: Vec<String> = fa.iter().map(|(p, _)| p.to_string_lossy().into_owned()).collect();
    for want in [
        "data/manifest.csv",
        "data/truth.csv",
        "model.hpnet",
        "model.hpnet.log.csv",
        "feat.csv",
        "cox.txt",
        "cox.txt.cv.csv",
        "cox.txt.coef.csv",
        "clin.txt",
        "pred.csv",
        "eval/evaluation.csv",
        "eval/roc_24.csv",
        "strat/groups.csv",
        "strat/km.csv",
        "strat/logrank.csv",
        "maps/SUBJ0001_left.vol3",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }

    // feature CSV: id + 2 x final channels (4/8/16 at scale 1/8)
    let feat = std::fs::read_to_string(a.path().join("feat.csv")).unwrap();
    let header: Vec<&str> = feat.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 32);
    assert_eq!(feat.lines().count(), 1 + 64);

    // relevance maps come back at input resolution
    let vol = std::fs::read(a.path().join("maps/SUBJ0001_left.vol3")).unwrap();
    assert_eq!(&vol[..4], b"VOL3");
    assert_eq!(vol.len(), 16 + 4 * 16 * 16 * 24);
}
