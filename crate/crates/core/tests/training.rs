use depthfield::field::{finetune_all, load_field, save_field, train_global, CorrectionField, HeadMode, StageConfig, TrainConfig};
use depthfield::nn::{architecture, backward, forward, AdamW, LrSchedule, MlpParams, Workspace};
use depthfield::pipeline::{align_scene, correct_scene, training_set, Scene};
use depthfield::synth::{corrupt_depths, generate_scene, CorruptionSpec, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene() -> Scene {
    let s = generate_scene(&SynthSpec { num_views: 4, width: 48, height: 48, anchors_per_view: 400, ..SynthSpec::default() }).unwrap();
    let c = corrupt_depths(&s, &CorruptionSpec::default()).unwrap();
    Scene { dir: Default::default(), model: s.model, vggt: c.vggt.maps, mono: c.mono.maps }
}

fn config() -> TrainConfig {
    TrainConfig {
        global: StageConfig { steps: 600, t0: 300, lr: 1e-3 },
        per_view: StageConfig { steps: 60, t0: 30, lr: 1e-3 },
        batch_size: 256,
        ..TrainConfig::default()
    }
}

#[test]
fn regression_loss_drops_below_a_tenth_in_500_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 256;
    let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target: Vec<f64> = x.chunks(2).map(|p| (std::f64::consts::PI * p[0]).sin() * p[1] + 0.5).collect();
    let mut params = MlpParams::<f64>::init(&architecture(2, 32, 2, 1), &mut rng);
    let mut grad = MlpParams::zeros(params.dims());
    let mut opt = AdamW::for_params(&params, 1e-2);
    let schedule = LrSchedule::new(1e-2, 500);
    let mut ws = Workspace::default();
    let loss_at = |params: &MlpParams<f64>, ws: &mut Workspace<f64>| {
        let y = forward(params, &x, n, ws).unwrap();
        y.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64
    };
    let initial = loss_at(&params, &mut ws);
    for step in 0..500 {
        let y = forward(&params, &x, n, &mut ws).unwrap().to_vec();
        let d: Vec<f64> = y.iter().zip(&target).map(|(a, b)| 2.0 * (a - b) / n as f64).collect();
        backward(&params, &x, n, &mut ws, &d, &mut grad).unwrap();
        opt.step_params(&mut params, &grad, schedule.lr(step)).unwrap();
    }
    let last = loss_at(&params, &mut ws);
    assert!(last < 0.1 * initial, "{initial} -> {last}");
}

fn per_view_loss(field: &CorrectionField, set: &depthfield::field::TrainingSet) -> f64 {
    let mut total = 0.0;
    for v in 0..set.num_views {
        let s = set.view_samples(v);
        total += field.sparse_l1_loss(field.weights_for(v), &s) * s.len() as f64;
    }
    total / set.samples.len() as f64
}

#[test]
fn each_stage_lowers_the_anchor_residual() {
    let scene = scene();
    let aligned = align_scene(&scene);
    let set = training_set(&scene, &aligned).unwrap();
    for mode in [HeadMode::Both, HeadMode::MonoOnly] {
        let cfg = TrainConfig { head_mode: mode, ..config() };
        let mut field = CorrectionField::identity(set.depth_scale, set.num_views, mode, cfg.seed);
        let affine = field.sparse_l1_loss(&field.global_weights, &set.samples);
        train_global(&mut field, &set, &cfg).unwrap();
        let global = per_view_loss(&field, &set);
        finetune_all(&mut field, &set, &cfg).unwrap();
        let local = per_view_loss(&field, &set);
        assert!(global <= 1.01 * affine, "{mode}: {affine} -> {global}");
        assert!(local <= 1.01 * global, "{mode}: {global} -> {local}");
        assert!(local < affine, "{mode}");
        for v in 0..set.num_views {
            let s = set.view_samples(v);
            assert!(field.sparse_l1_loss(field.weights_for(v), &s) <= field.sparse_l1_loss(&field.global_weights, &s));
        }
    }
}

#[test]
fn training_is_deterministic_on_one_thread() {
    let scene = scene();
    let aligned = align_scene(&scene);
    let set = training_set(&scene, &aligned).unwrap();
    let cfg = TrainConfig { global: StageConfig { steps: 200, t0: 100, lr: 1e-3 }, ..config() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let run = || pool.install(|| depthfield::field::train_field(&set, &cfg).unwrap());
    let (a, b) = (run(), run());
    assert_eq!(a.global_weights, b.global_weights);
    assert_eq!(a.per_view_weights, b.per_view_weights);
    let other = pool.install(|| depthfield::field::train_field(&set, &TrainConfig { seed: 1, ..cfg.clone() }).unwrap());
    assert_ne!(a.global_weights, other.global_weights);
}

#[test]
fn saved_field_corrects_identically() {
    let scene = scene();
    let aligned = align_scene(&scene);
    let set = training_set(&scene, &aligned).unwrap();
    let cfg = TrainConfig { global: StageConfig { steps: 100, t0: 100, lr: 1e-3 }, ..config() };
    let field = depthfield::field::train_field(&set, &cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    save_field(tmp.path(), &field).unwrap();
    let back = load_field(tmp.path()).unwrap();
    assert_eq!(back.global_weights, field.global_weights);
    assert_eq!(back.per_view_weights, field.per_view_weights);
    assert_eq!(back.head_mode, field.head_mode);
    let a = correct_scene(&field, scene.views(), &aligned.vggt, &aligned.mono);
    let b = correct_scene(&back, scene.views(), &aligned.vggt, &aligned.mono);
    assert_eq!(a, b);
}
