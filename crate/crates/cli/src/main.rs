use clap::{Arg, ArgAction, ArgMatches, Command};
use depthfield::config::{PipelineConfig, SynthConfig, PIPELINE_KEYS, SYNTH_KEYS};
use depthfield::pipeline::{self, ErrorKind, PipelineError, RunSummary};
use depthfield::synth::{corrupt_depths, generate_scene, write_scene, SynthError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn pipeline_args(cmd: Command) -> Command {
    let defaults = PipelineConfig::default();
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value config file; flags override its values"),
    );
    PIPELINE_KEYS.iter().fold(cmd, |cmd, (key, doc)| {
        let default = defaults.get(key).expect("listed key");
        cmd.arg(
            Arg::new(*key)
                .long(flag(key))
                .value_name("VALUE")
                .help(format!("{doc} [default: {default}]")),
        )
    })
}

fn cli() -> Command {
    let synth_defaults = SynthConfig::default();
    let synth_keys: Vec<String> =
        SYNTH_KEYS.iter().map(|k| format!("{k} = {}", synth_defaults.get(k).expect("listed key"))).collect();
    Command::new("depthfield")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Sparse-anchor depth correction, dense point initialization and TSDF fusion")
        .subcommand_required(true)
        .arg(
            Arg::new("verbose")
                .short('v')
                .long("verbose")
                .global(true)
                .action(ArgAction::Count)
                .help("more log output (-v info, -vv debug)"),
        )
        .subcommand(
            Command::new("synth")
                .about("generate a synthetic scene directory")
                .after_help(format!("Spec keys and defaults:\n  {}", synth_keys.join("\n  ")))
                .arg(Arg::new("out").long("out").short('o').value_name("DIR").required(true).help("scene directory to write"))
                .arg(Arg::new("spec").long("spec").value_name("FILE").help("key = value spec file"))
                .arg(
                    Arg::new("set")
                        .long("set")
                        .value_name("KEY=VALUE")
                        .action(ArgAction::Append)
                        .help("override one spec key"),
                )
                .arg(Arg::new("threads").long("threads").value_name("N").value_parser(clap::value_parser!(usize)).help("worker threads [default: all cores]")),
        )
        .subcommand(pipeline_args(Command::new("align").about("fit per-view affine alignment to the sparse anchors")))
        .subcommand(pipeline_args(Command::new("correct").about("align, train the correction field and write corrected depths")))
        .subcommand(pipeline_args(Command::new("init").about("reliable dense point cloud from corrected depths")))
        .subcommand(pipeline_args(Command::new("fuse").about("TSDF fusion of reliable corrected depths into a mesh")))
        .subcommand(pipeline_args(Command::new("run").about("full pipeline: align, train, correct, init, fuse, eval")))
        .subcommand(
            Command::new("eval")
                .about("Chamfer distance and F-score of a mesh or cloud against ground-truth points")
                .arg(Arg::new("pred").long("pred").value_name("PLY").required(true).help("predicted mesh or point cloud"))
                .arg(Arg::new("gt").long("gt").value_name("PLY").required(true).help("ground-truth points"))
                .arg(Arg::new("tau").long("tau").value_name("DIST").required(true).allow_negative_numbers(true).help("F-score distance threshold"))
                .arg(Arg::new("out").long("out").short('o').value_name("DIR").default_value(".").help("directory receiving report/"))
                .arg(Arg::new("threads").long("threads").value_name("N").value_parser(clap::value_parser!(usize)).help("worker threads [default: all cores]")),
        )
}

fn usage(stage: &str, msg: impl Into<String>) -> PipelineError {
    PipelineError::usage(stage, msg)
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))
}

fn pipeline_config(m: &ArgMatches) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => PipelineConfig::from_key_values(&read_text(Path::new(path))?).map_err(|e| usage("config", format!("{path}: {e}")))?,
        None => PipelineConfig::default(),
    };
    for (key, _) in PIPELINE_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v).map_err(|e| usage("config", format!("--{}: {e}", flag(key))))?;
        }
    }
    cfg.validate().map_err(|e| usage("config", e))?;
    Ok(cfg)
}

fn synth_config(m: &ArgMatches) -> Result<SynthConfig, PipelineError> {
    let mut cfg = match m.get_one::<String>("spec") {
        Some(path) => SynthConfig::from_key_values(&read_text(Path::new(path))?).map_err(|e| usage("synth", format!("{path}: {e}")))?,
        None => SynthConfig::default(),
    };
    for kv in m.get_many::<String>("set").into_iter().flatten() {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage("synth", format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| usage("synth", e))?;
    }
    Ok(cfg)
}

fn synth_err(e: SynthError) -> PipelineError {
    match e {
        SynthError::Spec(_) => usage("synth", e.to_string()),
        _ => PipelineError::data("synth", e.to_string()),
    }
}

fn cmd_synth(m: &ArgMatches) -> Result<(), PipelineError> {
    let cfg = synth_config(m)?;
    let out = PathBuf::from(m.get_one::<String>("out").expect("required"));
    cfg.corruption.validate().map_err(synth_err)?;
    let scene = generate_scene(&cfg.scene).map_err(synth_err)?;
    let corrupted = corrupt_depths(&scene, &cfg.corruption).map_err(synth_err)?;
    write_scene(&out, &scene, &corrupted).map_err(synth_err)?;
    std::fs::write(out.join("synth.txt"), cfg.to_key_values()).map_err(|e| PipelineError::data("synth", e.to_string()))?;
    println!(
        "wrote {} ({} views, {} sparse points, {} ground-truth samples)",
        out.display(),
        scene.views().len(),
        scene.model.points.len(),
        scene.surface_samples.len()
    );
    Ok(())
}

fn print_summary(s: &RunSummary) {
    print!("{}", s.timing.to_text());
    if let Some((before, after)) = s.depth_l1 {
        println!("depth L1: aligned {before:.6}, corrected {after:.6}");
    }
    println!(
        "cloud: {} of {} points reliable, {} after downsampling",
        s.reliable_points, s.total_points, s.downsampled_points
    );
    println!("mesh: {} vertices, {} faces (voxel {:.6})", s.mesh_vertices, s.mesh_faces, s.tsdf_voxel);
    if let Some(r) = &s.eval {
        println!("chamfer {:.6}  precision {:.4}  recall {:.4}  f1 {:.4}  (tau {:.6})", r.chamfer, r.precision, r.recall, r.f1, r.tau);
    }
}

fn dispatch(m: &ArgMatches) -> Result<(), PipelineError> {
    match m.subcommand() {
        Some(("synth", sub)) => cmd_synth(sub),
        Some(("align", sub)) => {
            let cfg = pipeline_config(sub)?;
            let a = pipeline::run_align(&cfg)?;
            println!("aligned {} views into {}", a.params.len(), cfg.output_dir.display());
            Ok(())
        }
        Some(("correct", sub)) => {
            let cfg = pipeline_config(sub)?;
            let (v, _) = pipeline::run_correct(&cfg)?;
            println!("corrected {} views into {}", v.len(), cfg.output_dir.display());
            Ok(())
        }
        Some(("init", sub)) => {
            let cfg = pipeline_config(sub)?;
            let d = pipeline::run_init(&cfg)?;
            println!("{} of {} points reliable, {} after downsampling", d.reliable.len(), d.total, d.downsampled.len());
            Ok(())
        }
        Some(("fuse", sub)) => {
            let cfg = pipeline_config(sub)?;
            let f = pipeline::run_fuse(&cfg)?;
            println!("mesh: {} vertices, {} faces (voxel {:.6})", f.mesh.vertices.len(), f.mesh.faces.len(), f.voxel_size);
            Ok(())
        }
        Some(("run", sub)) => {
            let cfg = pipeline_config(sub)?;
            print_summary(&pipeline::run(&cfg)?);
            Ok(())
        }
        Some(("eval", sub)) => {
            let tau_text = sub.get_one::<String>("tau").expect("required");
            let tau: f64 = tau_text.parse().map_err(|_| usage("eval", format!("--tau: not a number: {tau_text:?}")))?;
            let path = |k: &str| PathBuf::from(sub.get_one::<String>(k).expect("required or defaulted"));
            let r = pipeline::run_eval(&path("pred"), &path("gt"), tau, &path("out"))?;
            print!("{}", r.to_key_values());
            Ok(())
        }
        _ => Err(usage("cli", "unknown subcommand")),
    }
}

fn threads_of(m: &ArgMatches) -> Option<usize> {
    let (_, sub) = m.subcommand()?;
    match sub.try_get_one::<usize>("threads") {
        Ok(Some(n)) => Some(*n),
        _ => sub.try_get_one::<String>("threads").ok().flatten().and_then(|s| s.parse().ok()),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(ErrorKind::Usage.exit_code() as u8) } else { ExitCode::SUCCESS };
        }
    };
    let level = match matches.get_count("verbose") {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = threads_of(&matches) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
