use depthfield::io::{read_ply_points, save_pfm};
use depthfield::pipeline::{load_scene, ErrorKind};
use depthfield::synth::{
    corrupt_depths, depth_statistics, generate_scene, invert_corruption, mono_depth_file, vggt_depth_file, write_scene,
    CorruptionSpec, SynthSpec, GT_SURFACE_FILE,
};
use depthfield::{DepthMap, PixelCoord};

fn spec() -> SynthSpec {
    SynthSpec { num_views: 3, width: 48, height: 40, anchors_per_view: 250, ..SynthSpec::default() }
}

#[test]
fn generation_is_a_pure_function_of_the_spec() {
    let a = generate_scene(&spec()).unwrap();
    let b = generate_scene(&spec()).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.gt_depths, b.gt_depths);
    assert_eq!(a.surface_samples, b.surface_samples);
    let ca = corrupt_depths(&a, &CorruptionSpec::default()).unwrap();
    let cb = corrupt_depths(&a, &CorruptionSpec::default()).unwrap();
    assert_eq!(ca.vggt.maps, cb.vggt.maps);
    assert_eq!(ca.mono.params, cb.mono.params);
    let other = corrupt_depths(&a, &CorruptionSpec { seed: 99, ..CorruptionSpec::default() }).unwrap();
    assert_ne!(ca.vggt.maps, other.vggt.maps);
    let moved = generate_scene(&SynthSpec { seed: 7, ..spec() }).unwrap();
    assert_ne!(a.model.points, moved.model.points);
}

#[test]
fn ground_truth_matches_ray_intersections() {
    let s = generate_scene(&spec()).unwrap();
    let mut hits = 0;
    for (v, d) in s.views().iter().zip(&s.gt_depths) {
        for y in 0..v.height() {
            for x in 0..v.width() {
                let p = PixelCoord::new(x as f64, y as f64);
                let dir = v.world_ray(&p);
                match s.surface.intersect(&v.center(), &dir) {
                    Some(t) => {
                        let z = v.depth_of(&(v.center() + dir * t));
                        assert!((d.get(x, y) - z).abs() < 1e-9);
                        hits += 1;
                    }
                    None => assert!(d.depth_at(x, y).is_none()),
                }
            }
        }
    }
    assert!(hits > 0);
    assert!(s.model.max_reprojection_error() < 1e-6);
}

#[test]
fn inverse_corruption_recovers_ground_truth_within_noise() {
    let s = generate_scene(&spec()).unwrap();
    let cspec = CorruptionSpec::default();
    let c = corrupt_depths(&s, &cspec).unwrap();
    let (median, _) = depth_statistics(&s.gt_depths);
    for (channel, ch) in [(&c.vggt, &cspec.vggt), (&c.mono, &cspec.mono)] {
        let bound = 6.0 * ch.noise_sigma * median / ch.scale_range.0;
        for (i, gt) in s.gt_depths.iter().enumerate() {
            let back = invert_corruption(&channel.maps[i], &channel.params[i]);
            for (a, b) in back.values().iter().zip(gt.values()) {
                if *b > 0.0 {
                    assert!((a - b).abs() <= bound, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn written_scene_loads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate_scene(&spec()).unwrap();
    let c = corrupt_depths(&s, &CorruptionSpec::default()).unwrap();
    write_scene(tmp.path(), &s, &c).unwrap();

    let scene = load_scene(tmp.path()).unwrap();
    assert_eq!(scene.views().len(), 3);
    assert!(scene.model.max_reprojection_error() < 1e-6);
    assert_eq!(scene.model.points.len(), s.model.points.len());
    for (i, v) in scene.views().iter().enumerate() {
        assert_eq!((v.width(), v.height()), (48, 40));
        assert!((v.center() - s.views()[i].center()).norm() < 1e-9);
        for (a, b) in scene.vggt[i].values().iter().zip(c.vggt.maps[i].values()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }
    let gt = scene.gt_depths().unwrap();
    assert_eq!(gt.len(), 3);
    let samples = read_ply_points(&std::fs::read(tmp.path().join(GT_SURFACE_FILE)).unwrap()).unwrap().0;
    assert_eq!(samples.len(), s.surface_samples.len());
}

#[test]
fn depth_at_another_resolution_is_resampled() {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate_scene(&spec()).unwrap();
    let c = corrupt_depths(&s, &CorruptionSpec::exact(0)).unwrap();
    write_scene(tmp.path(), &s, &c).unwrap();
    save_pfm(&tmp.path().join(mono_depth_file(1)), &DepthMap::filled(24, 20, 3.0)).unwrap();
    let scene = load_scene(tmp.path()).unwrap();
    let m = &scene.mono[1];
    assert_eq!((m.width(), m.height()), (48, 40));
    assert!(m.values().iter().all(|&d| (d - 3.0).abs() < 1e-12));
}

#[test]
fn missing_files_are_reported_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate_scene(&spec()).unwrap();
    let c = corrupt_depths(&s, &CorruptionSpec::default()).unwrap();
    write_scene(tmp.path(), &s, &c).unwrap();
    std::fs::remove_file(tmp.path().join(vggt_depth_file(2))).unwrap();
    std::fs::remove_file(tmp.path().join(mono_depth_file(0))).unwrap();
    let e = load_scene(tmp.path()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Data);
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains(&mono_depth_file(0)), "{e}");

    std::fs::remove_file(tmp.path().join("images.txt")).unwrap();
    let e = load_scene(tmp.path()).unwrap_err();
    assert!(e.to_string().contains("scene incomplete: missing") && e.to_string().contains("images.txt"), "{e}");
}

#[test]
fn malformed_model_is_a_data_error_with_a_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate_scene(&spec()).unwrap();
    let c = corrupt_depths(&s, &CorruptionSpec::default()).unwrap();
    write_scene(tmp.path(), &s, &c).unwrap();
    let cams = std::fs::read_to_string(tmp.path().join("cameras.txt")).unwrap();
    let broken = cams.replacen("PINHOLE", "FISHEYE", 1);
    std::fs::write(tmp.path().join("cameras.txt"), broken).unwrap();
    let e = load_scene(tmp.path()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Data);
    assert!(e.to_string().contains("cameras.txt:"), "{e}");
}
