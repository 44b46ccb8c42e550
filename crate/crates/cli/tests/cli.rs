use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxcomplete")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const TINY: &str = "per_category = 3\nscans_per_object = 2\nbank_size = 2\ncategory_bank_size = 2\nepochs = 1\nbatch_size = 4\n";

#[test]
fn unknown_flag_exits_with_usage() {
    let out = run(&["gen-toy", "--out", "x", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_values_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-toy", "--out", s(dir.path()), "--resolution", "24"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn gen_toy_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&["gen-toy", "--out", s(a.path()), "--seed", "7"]);
    ok(&["gen-toy", "--out", s(b.path()), "--seed", "7"]);
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().any(|(p, _)| p.ends_with("manifest.json")));
    assert_eq!(fa, fb);
}

#[test]
fn full_chain_runs_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("tiny.conf");
    fs::write(&cfg, TINY).unwrap();
    let data = root.join("data");
    let work = root.join("work");
    let manifest = data.join("manifest.json");
    let common = |out: &Path| vec!["--out".to_owned(), s(out).to_owned(), "--config".to_owned(), s(&cfg).to_owned()];
    let with = |head: &[&str], out: &Path| {
        let mut v: Vec<String> = head.iter().map(|a| a.to_string()).collect();
        v.extend(common(out));
        v
    };
    let call = |v: Vec<String>| ok(&v.iter().map(String::as_str).collect::<Vec<_>>());

    call(with(&["gen-toy"], &data));
    call(with(&["build-priors", "--manifest", s(&manifest)], &work));
    assert!(work.join("seen_bank").exists());
    assert!(work.join("category_banks/bench").exists());
    call(with(&["train-cosl", "--manifest", s(&manifest), "--bank", s(&work.join("seen_bank"))], &work));
    assert!(work.join("cosl.ckpt").exists());
    call(with(
        &[
            "infer-cosl",
            "--manifest",
            s(&manifest),
            "--bank",
            s(&work.join("seen_bank")),
            "--checkpoint",
            s(&work.join("cosl.ckpt")),
        ],
        &work,
    ));
    assert_eq!(fs::read_dir(work.join("coarse")).unwrap().count(), 6);
    call(with(
        &[
            "refine-casr",
            "--manifest",
            s(&manifest),
            "--bank",
            s(&work.join("category_banks")),
            "--pred",
            s(&work.join("coarse")),
            "--category",
            "bench",
        ],
        &work,
    ));
    assert!(work.join("refined/bench_001.wvox").exists());
    assert!(!work.join("refined/basket_001.wvox").exists());
    let log = fs::read_to_string(work.join("data_access.jsonl")).unwrap();
    assert!(log.lines().any(|l| l.contains("refine-casr")));

    // ground truth against itself
    let gt_dir = root.join("gt");
    fs::create_dir_all(&gt_dir).unwrap();
    for i in 0..3 {
        let id = format!("bench_{i:03}");
        fs::copy(data.join(format!("objects/{id}/complete.wvox")), gt_dir.join(format!("{id}.wvox"))).unwrap();
    }
    let table = call(with(&["eval", "--pred", s(&gt_dir), "--manifest", s(&manifest)], &root.join("eval")));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["iou"].as_f64(), Some(1.0));
    assert_eq!(report["overall"]["count"].as_u64(), Some(3));
    assert!(table.contains("bench"));

    let refined = work.join("refined/bench_001.wvox");
    let field = work.join("fields/bench_001.wfld");
    assert!(field.exists());
    let exp = root.join("exp");
    call(with(&["export", s(&refined), s(&field), "--format", "cubes-obj"], &exp));
    assert!(exp.join("bench_001.obj").exists());
}

#[test]
fn export_counts_match_occupancy() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-toy", "--out", s(dir.path()), "--seed", "2"]);
    let grid = dir.path().join("objects/table_000/complete.wvox");
    let out = dir.path().join("exp");
    ok(&["export", s(&grid), "--out", s(&out)]);
    let points = fs::read_to_string(out.join("complete.xyz")).unwrap();
    ok(&["export", s(&grid), "--out", s(&out), "--format", "cubes-obj"]);
    let obj = fs::read_to_string(out.join("complete.obj")).unwrap();
    let k = points.lines().count();
    assert!(k > 0);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8 * k);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12 * k);
}
