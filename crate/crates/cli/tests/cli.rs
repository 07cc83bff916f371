use std::path::Path;
use std::process::{Command, Output};

use qsr_core::imagecore::{save_image, Image};

fn qsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsr")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stripes(w: usize, h: usize) -> Image<f64> {
    Image::from_fn(w, h, |r, c| 0.5 + 0.4 * ((r as f64 * 0.7).sin() * (c as f64 * 0.3).cos()))
}

fn corpus(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..2 {
        let img = Image::from_fn(90, 90, |r, c| 0.5 + 0.3 * ((r * (k + 1)) as f64 * 0.2).sin() + 0.2 * (c as f64 * 0.45).cos());
        save_image(&img, dir.join(format!("{k}.png"))).unwrap();
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.png");
    assert_eq!(code(&qsr(&["sr", "--method", "nope"])), 2);
    assert_eq!(code(&qsr(&["sr", "--input", "/no/such.png", "--dict", "/no/dict", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&qsr(&["synth", "--out", out.to_str().unwrap(), "--grid", "lin:0:1"])), 2);
    assert_eq!(code(&qsr(&["--threads", "0", "synth", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&qsr(&["train-dict", "--corpus", "/no/such/dir", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn entropy_outputs_need_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let lr = tmp.path().join("lr.png");
    save_image(&stripes(20, 20), &lr).unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    let o = qsr(&["sr", "--input", &p("lr.png"), "--dict", &p("lr.png"), "--out", &p("o.png"), "--method", "anneal", "--entropy-map", &p("e.png")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ensemble"));
}

#[test]
fn unreadable_dictionary_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let lr = tmp.path().join("lr.png");
    save_image(&stripes(20, 20), &lr).unwrap();
    let bogus = tmp.path().join("d.qsrd");
    std::fs::write(&bogus, b"not a dictionary").unwrap();
    let o = qsr(&["sr", "--input", lr.to_str().unwrap(), "--dict", bogus.to_str().unwrap(), "--out", tmp.path().join("o.png").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_sr_bench_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    corpus(&tmp.path().join("corpus"));
    let o = qsr(&["--seed", "4", "train-dict", "--corpus", &p("corpus"), "--out", &p("d.qsrd"), "--atoms", "32", "--patches", "800", "--epochs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("d.qsrd.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "train-dict");
    assert_eq!(m["seed"], 4);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 2);

    save_image(&stripes(18, 18), p("lr.png")).unwrap();
    let o = qsr(&[
        "sr", "--input", &p("lr.png"), "--dict", &p("d.qsrd"), "--out", &p("hr.png"), "--method", "ensemble", "--reads", "4",
        "--entropy-csv", &p("e.csv"), "--manifest", &p("sr.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hr = qsr_core::imagecore::load_image::<f64>(p("hr.png")).unwrap();
    assert_eq!((hr.width(), hr.height()), (54, 54));
    assert!(std::fs::read_to_string(p("e.csv")).unwrap().starts_with("row,col,entropy\n"));
    assert!(Path::new(&p("sr.json")).exists());

    std::fs::create_dir(p("gt")).unwrap();
    save_image(&stripes(47, 40), tmp.path().join("gt/a.png")).unwrap();
    let o = qsr(&["bench", "--images", &p("gt"), "--dict", &p("d.qsrd"), "--out", &p("b.csv"), "--methods", "lasso,anneal", "--reads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(p("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "image,bicubic,lasso,anneal");
    assert!(lines[1].starts_with("a,"));
    assert!(lines[2].starts_with("mean,"));
}

#[test]
fn record_then_replay_reproduces_output() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    corpus(&tmp.path().join("corpus"));
    assert_eq!(code(&qsr(&["train-dict", "--corpus", &p("corpus"), "--out", &p("d.qsrd"), "--atoms", "8", "--patches", "300", "--epochs", "1"])), 0);
    save_image(&stripes(12, 12), p("lr.png")).unwrap();
    let base = ["sr", "--input", &p("lr.png"), "--dict", &p("d.qsrd"), "--method", "anneal", "--reads", "3"];
    let o = qsr(&[&base[..], &["--out", &p("a.png"), "--record", &p("r.bin")]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = qsr(&[&base[..], &["--out", &p("b.png"), "--replay", &p("r.bin"), "--seed", "99"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(p("a.png")).unwrap(), std::fs::read(p("b.png")).unwrap());
}

#[test]
fn synth_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    let o = qsr(&["synth", "--out", &p("s.csv"), "--svg", &p("s.svg"), "--solvers", "lasso,anneal", "--datasets", "1", "--reads", "4", "--grid", "0.05,0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(p("s.csv")).unwrap();
    assert!(csv.lines().count() >= 5);
    assert!(std::fs::read_to_string(p("s.svg")).unwrap().contains("<svg"));
}

#[test]
fn config_file_is_applied_and_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    std::fs::write(p("c.toml"), "seed = 5\n[synth]\nn_datasets = 1\nn_reads = 2\n").unwrap();
    let o = qsr(&["--config", &p("c.toml"), "synth", "--out", &p("s.csv"), "--solvers", "lasso", "--grid", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("s.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["synth"]["n_datasets"], 1);

    std::fs::write(p("bad.toml"), "[sr]\nnot_a_key = 1\n").unwrap();
    assert_eq!(code(&qsr(&["--config", &p("bad.toml"), "synth", "--out", &p("s.csv")])), 2);
}

#[test]
#[ignore = "needs QSR_LENNA (path to the Lenna image) and QSR_DICT"]
fn lenna_region() {
    let (Some(img), Some(dict)) = (std::env::var_os("QSR_LENNA"), std::env::var_os("QSR_DICT")) else {
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt");
    std::fs::create_dir(&gt).unwrap();
    std::fs::copy(&img, gt.join("lenna.png")).unwrap();
    let csv = tmp.path().join("b.csv");
    let o = qsr(&["bench", "--images", gt.to_str().unwrap(), "--dict", dict.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    println!("{}", std::fs::read_to_string(csv).unwrap());
}
