use depthfield::config::{PipelineConfig, PIPELINE_KEYS};
use depthfield::fusion::evaluate;
use depthfield::io::{read_ply_mesh, write_ply_points};
use depthfield::Vec3;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depthfield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_scene(dir: &Path) {
    let o = run(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "views=3",
        "--set",
        "width=48",
        "--set",
        "height=48",
        "--set",
        "anchors_per_view=300",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

const FAST: &[&str] = &[
    "--global-steps",
    "200",
    "--global-t0",
    "100",
    "--per-view-steps",
    "20",
    "--per-view-t0",
    "10",
    "--batch-size",
    "256",
    "--threads",
    "1",
];

fn dir_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_lists_every_key_with_its_default() {
    let o = run(&["run", "--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let defaults = PipelineConfig::default();
    for (key, _) in PIPELINE_KEYS {
        let flag = format!("--{}", key.replace('_', "-"));
        let line = text.lines().find(|l| l.trim_start().starts_with(&flag)).unwrap_or_else(|| panic!("{flag} missing"));
        assert!(line.contains(&format!("[default: {}]", defaults.get(key).unwrap())), "{line}");
    }
}

#[test]
fn synth_writes_complete_deterministic_scenes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["synth", "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["cameras.txt", "images.txt", "points3D.txt", "gt/surface.ply", "depth/view_0000.vggt.pfm", "depth/view_0007.mono.pfm"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let fa = dir_files(&a);
    assert_eq!(fa, dir_files(&b));
    assert!(fa.len() >= 3 + 8 * 3 + 1);
}

#[test]
fn synth_rejects_single_view_and_bad_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = run(&["synth", "--out", out.to_str().unwrap(), "--set", "views=1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("at least 2 views"));
    let o = run(&["synth", "--out", out.to_str().unwrap(), "--set", "colour=red"]);
    assert_eq!(code(&o), 1);
    let o = run(&["synth"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn spec_file_is_read() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.txt");
    std::fs::write(&spec, "# tiny\nviews = 2\nwidth = 32\nheight = 32\nanchors_per_view = 50\n").unwrap();
    let out = tmp.path().join("s");
    let o = run(&["synth", "--out", out.to_str().unwrap(), "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("depth/view_0001.vggt.pfm").is_file());
    assert!(!out.join("depth/view_0002.vggt.pfm").exists());
}

#[test]
fn missing_depth_is_a_data_error_naming_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    std::fs::remove_file(scene.join("depth/view_0001.mono.pfm")).unwrap();
    std::fs::remove_file(scene.join("depth/view_0002.vggt.pfm")).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["run", "--scene", scene.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("scene incomplete"), "{err}");
    assert!(err.contains("view_0001.mono.pfm"), "{err}");
}

#[test]
fn bad_values_are_usage_errors() {
    let o = run(&["run", "--neighbors", "zero"]);
    assert_eq!(code(&o), 1);
    let o = run(&["run", "--tau", "-1"]);
    assert_eq!(code(&o), 1);
    let o = run(&["run", "--global-t0", "9000"]);
    assert_eq!(code(&o), 1);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 1);
}

fn write_points(path: &Path, pts: &[Vec3]) {
    std::fs::write(path, write_ply_points(pts, None)).unwrap();
}

fn kv(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn eval_identical_shifted_and_bad_tau() {
    let tmp = tempfile::tempdir().unwrap();
    let pts: Vec<Vec3> = (0..50).map(|i| Vec3::new(i as f64 * 0.1, (i % 7) as f64 * 0.05, 0.0)).collect();
    let shifted: Vec<Vec3> = pts.iter().map(|p| p + Vec3::new(0.0, 0.0, 0.03)).collect();
    let (a, b) = (tmp.path().join("a.ply"), tmp.path().join("b.ply"));
    write_points(&a, &pts);
    write_points(&b, &shifted);
    let out = tmp.path().join("r");

    let o = run(&["eval", "--pred", a.to_str().unwrap(), "--gt", a.to_str().unwrap(), "--tau", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("report/eval.txt")).unwrap();
    assert_eq!(kv(&text, "chamfer"), 0.0);
    assert_eq!(kv(&text, "f1"), 1.0);
    assert!(out.join("report/eval.json").is_file());

    let o = run(&["eval", "--pred", b.to_str().unwrap(), "--gt", a.to_str().unwrap(), "--tau", "0.02", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out.join("report/eval.txt")).unwrap();
    let lib = evaluate(&shifted, &pts, 0.02).unwrap();
    // the file carries f32 coordinates
    assert!((kv(&text, "chamfer") - lib.chamfer).abs() < 1e-6);
    assert!((kv(&text, "chamfer") - 0.03).abs() < 1e-6);
    assert_eq!(kv(&text, "f1"), 0.0);

    for tau in ["0", "-0.5"] {
        let o = run(&["eval", "--pred", a.to_str().unwrap(), "--gt", a.to_str().unwrap(), "--tau", tau, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "tau {tau}");
    }
    let o = run(&["eval", "--pred", "/nonexistent.ply", "--gt", a.to_str().unwrap(), "--tau", "0.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_end_to_end_and_stage_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.txt");
    // the file asks for mono only; the flag wins
    std::fs::write(&cfg, format!("scene = {}\nhead_mode = mono\n", scene.display())).unwrap();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--head-mode", "both"];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    for f in [
        "config.txt",
        "depth_aligned/view_0000.vggt.pfm",
        "depth_corrected/view_0002.mono.pfm",
        "field/field.txt",
        "cloud/dense.ply",
        "cloud/reliable.ply",
        "cloud/errors/view_0001.pfm",
        "mesh/mesh.ply",
        "report/eval.txt",
        "report/eval.json",
        "report/depth.txt",
        "report/alignment.txt",
        "report/timing.txt",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let used = PipelineConfig::from_key_values(&std::fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(used.train.head_mode.to_string(), "both");
    assert_eq!(used.train.global.steps, 200);

    let timing = std::fs::read_to_string(out.join("report/timing.txt")).unwrap();
    let stages: Vec<&str> = timing.lines().filter(|l| !l.starts_with('#')).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(stages, ["align", "train_global", "finetune", "correct", "dense_init", "fuse", "eval", "total"]);
    assert!(timing.contains("TSDF fusion + Marching Cubes"));
    assert!(timing.contains("Per-pixel correction"));
    let mesh = read_ply_mesh(&std::fs::read(out.join("mesh/mesh.ply")).unwrap()).unwrap();
    assert!(!mesh.faces.is_empty());

    // the stage commands reproduce run's artifacts
    let staged = tmp.path().join("staged");
    for cmd in ["align", "correct", "init", "fuse"] {
        let mut args = vec![cmd, "--scene", scene.to_str().unwrap(), "--output", staged.to_str().unwrap()];
        args.extend_from_slice(FAST);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    for f in ["depth_corrected/view_0001.vggt.pfm", "cloud/dense.ply", "mesh/mesh.ply", "depth_aligned/view_0000.mono.pfm"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(staged.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stage_commands_need_their_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    small_scene(&scene);
    let out = tmp.path().join("out");
    let o = run(&["fuse", "--scene", scene.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run `correct` first"), "{}", stderr(&o));
}
