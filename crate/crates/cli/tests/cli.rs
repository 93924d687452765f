use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rootseg_core::volume::{self, Dims, Volume3D};

const TINY_NET: &str = "[net]\nencoder_widths = [4, 4, 4, 4, 4]\nrefine_width = 4\n";

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn rootseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rootseg"))
        .current_dir(dir)
        .env_remove("ROOTSEG_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path) -> String {
    let models = models_dir();
    let text = format!(
        "models = [{:?}, {:?}]\n[generate]\nn_train = 2\nn_val = 2\n[generate.input_dims]\nx = 32\ny = 32\nz = 8\n{TINY_NET}",
        models.join("root_1.rootm"),
        models.join("root_2.rootm"),
    );
    std::fs::write(dir.join("tiny.toml"), text).unwrap();
    "tiny.toml".into()
}

fn generate(dir: &Path, out: &str) {
    let cfg = write_config(dir);
    let o = rootseg(dir, &["--config", &cfg, "--out", out, "generate"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn first_validation_pair(data: &Path) -> (PathBuf, PathBuf) {
    let mut vols: Vec<PathBuf> = std::fs::read_dir(data.join("pairs/validation"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "vol3"))
        .collect();
    vols.sort();
    let v = vols.remove(0);
    (v.clone(), v.with_extension("msk3"))
}

#[test]
fn generate_writes_pairs_manifest_and_config() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "data");
    let data = dir.path().join("data");
    let manifest = std::fs::read_to_string(data.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    assert_eq!(std::fs::read_dir(data.join("pairs/train")).unwrap().count(), 4);
    assert!(data.join("config.toml").exists());
    assert!(!data.join(".lock").exists());
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "a");
    generate(dir.path(), "b");
    let read = |d: &str| std::fs::read(dir.path().join(d).join("manifest.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
    generate(dir.path(), "a");
    assert_eq!(read("a"), read("b"));
}

#[test]
fn generate_cli_counts_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = rootseg(dir.path(), &["--config", &cfg, "--out", "d", "generate", "--n-train", "1", "--n-val", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(dir.path().join("d/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 1);
}

#[test]
fn missing_model_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rootseg(dir.path(), &["--out", "d", "generate", "--model", "absent.rootm", "--n-train", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.rootm"));
}

#[test]
fn unknown_override_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rootseg(dir.path(), &["--set", "train.epoch=3", "--out", "d", "train", "--data", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.epoch"));
}

#[test]
fn env_var_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "data");
    let (v, _) = first_validation_pair(&dir.path().join("data"));
    let o = Command::new(env!("CARGO_BIN_EXE_rootseg"))
        .current_dir(dir.path())
        .env("ROOTSEG_OUT", dir.path().join("root"))
        .args(["render", "--input", v.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("root/render/config.toml").exists());
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("d")).unwrap();
    std::fs::write(dir.path().join("d/.lock"), "1").unwrap();
    let o = rootseg(dir.path(), &["--out", "d", "generate", "--model", "x.rootm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("in use"));
}

#[test]
fn train_header_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = rootseg(dir.path(), &["--out", "t", "train", "--data", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rootseg(dir.path(), &["--set", "train.epochs=0", "--out", "t", "train", "--data", "x"]);
    assert_eq!(o.status.code(), Some(2));

    generate(dir.path(), "data");
    let cfg = write_config(dir.path());
    let o = rootseg(dir.path(), &["--config", &cfg, "--set", "train.epochs=100", "--out", "t", "train", "--data", "data", "--epochs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("epochs=1 lr=6e-4 clip=0.01"), "{}", stdout(&o));
    let echoed = std::fs::read_to_string(dir.path().join("t/config.toml")).unwrap();
    assert!(echoed.contains("epochs = 1"));
}

#[test]
fn train_one_epoch_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "data");
    let cfg = write_config(dir.path());
    for out in ["a", "b"] {
        let o = rootseg(dir.path(), &["--config", &cfg, "--seed", "5", "--out", out, "train", "--data", "data", "--epochs", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/checkpoint.rsck"), read("b/checkpoint.rsck"));
    assert_eq!(read("a/history.csv"), read("b/history.csv"));
    let history = String::from_utf8(read("a/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert!(history.lines().nth(1).unwrap().starts_with("1,"));
}

#[test]
fn predict_doubles_dims_and_thresholds_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data");
    let cfg = write_config(d);
    let o = rootseg(d, &["--config", &cfg, "--out", "t", "train", "--data", "data", "--epochs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let input = Volume3D::from_fn(Dims::new(64, 64, 8).unwrap(), |x, y, z| ((x * 7 + y * 3 + z) % 11) as f32).unwrap();
    volume::save_volume(&input, d.join("big.vol3")).unwrap();
    let ckpt = "t/checkpoint.rsck";
    for (out, t) in [("p5", "0.5"), ("p9", "0.9")] {
        let o = rootseg(d, &["--config", &cfg, "--out", out, "predict", "--checkpoint", ckpt, "--input", "big.vol3", "--threshold", t]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let conf = volume::load_volume(d.join("p5/big_confidence.vol3")).unwrap();
    assert_eq!(conf.dims(), Dims::new(128, 128, 16).unwrap());
    assert!(conf.voxels().iter().all(|v| (0.0..=1.0).contains(v)));
    let m5 = volume::load_mask(d.join("p5/big_mask.msk3")).unwrap();
    let m9 = volume::load_mask(d.join("p9/big_mask.msk3")).unwrap();
    assert!(m9.is_subset_of(&m5));

    let o = rootseg(d, &["--set", "net.refine_width=8", "--out", "px", "predict", "--checkpoint", ckpt, "--input", "big.vol3"]);
    assert_eq!(o.status.code(), Some(2));

    let odd = Volume3D::zeros(Dims::new(40, 32, 4).unwrap()).unwrap();
    volume::save_volume(&odd, d.join("odd.vol3")).unwrap();
    let o = rootseg(d, &["--out", "po", "predict", "--checkpoint", ckpt, "--input", "odd.vol3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("32x32"), "{}", stderr(&o));
}

#[test]
fn evaluate_reports_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data");
    let (v, g) = first_validation_pair(&d.join("data"));
    let (g, v) = (g.to_str().unwrap(), v.to_str().unwrap());

    let o = rootseg(d, &["--out", "e", "evaluate", "--prediction", g, "--ground-truth", g, "--curve", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("e/report.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["f1"], 1.0);
    let curve = std::fs::read_to_string(d.join("e/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 7);
    let tolerances: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(tolerances, ["0", "1", "2", "3", "4", "5"]);

    // tolerance 0 matches the d=0 row of the curve
    let report = std::fs::read_to_string(d.join("e/report.csv")).unwrap();
    assert_eq!(report.lines().nth(1), curve.lines().nth(1));

    let o = rootseg(d, &["--out", "e2", "evaluate", "--prediction", v, "--ground-truth", g]);
    assert_eq!(o.status.code(), Some(2));
    let o = rootseg(d, &["--out", "e3", "evaluate", "--prediction", g, "--ground-truth", g, "--structuring", "disk"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn render_writes_identical_png() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data");
    let (v, g) = first_validation_pair(&d.join("data"));
    let v = v.to_str().unwrap();
    for out in ["r1", "r2"] {
        let o = rootseg(d, &["--out", out, "render", "--input", v, "--axis", "z", "--index", "0"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let name = format!("{}_z0.png", Path::new(v).file_stem().unwrap().to_string_lossy());
    let a = std::fs::read(d.join("r1").join(&name)).unwrap();
    assert_eq!(a, std::fs::read(d.join("r2").join(&name)).unwrap());
    let (w, h) = image_dims(&a);
    assert_eq!((w, h), (32, 32));

    let o = rootseg(d, &["--out", "r3", "render", "--input", g.to_str().unwrap(), "--axis", "x", "--index", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = rootseg(d, &["--out", "r4", "render", "--input", v, "--axis", "w"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rootseg(d, &["--out", "r5", "render", "--input", v, "--index", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

/// Width and height from a PNG IHDR chunk.
fn image_dims(png: &[u8]) -> (u32, u32) {
    assert_eq!(&png[1..4], b"PNG");
    let be = |at: usize| u32::from_be_bytes(png[at..at + 4].try_into().unwrap());
    (be(16), be(20))
}
