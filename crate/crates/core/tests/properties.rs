use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use neuralpci::baselines::{explicit_interpolate, motion_derivatives, scene_flow_warp, CorrespondenceSet, ExplicitOrder};
use neuralpci::cloud::sub;
use neuralpci::data::{generate_scene, load_cloud, make_windows, motion_magnitude, preset, save_cloud, CloudFormat, RigidPose};
use neuralpci::field::{field_forward, select_reference, FieldConfig, NeuralField};
use neuralpci::geometry::{brute_force_knn, transfer_labels, LabeledPointCloud, NeighborIndex};
use neuralpci::losses::{chamfer_distance, directed_chamfer, emd_distance, EmdConfig};
use neuralpci::{InputWindow, Point3, PointCloud};

fn point() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-2.0f64..2.0)
}

fn cloud(max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(point(), 1..=max)
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<Point3>, Vec<Point3>)> {
    (1..=max).prop_flat_map(|n| (prop::collection::vec(point(), n), prop::collection::vec(point(), n)))
}

fn shuffled(points: &[Point3], seed: u64) -> Vec<Point3> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut v = points.to_vec();
    v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    v
}

fn shift(points: &[Point3], d: Point3) -> Vec<Point3> {
    points.iter().map(|p| [p[0] + d[0], p[1] + d[1], p[2] + d[2]]).collect()
}

fn exact() -> EmdConfig {
    EmdConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_is_symmetric(p in cloud(40), q in cloud(40)) {
        prop_assert_eq!(chamfer_distance(&p, &q).unwrap(), chamfer_distance(&q, &p).unwrap());
    }

    #[test]
    fn metrics_ignore_point_order((p, q) in pair(24), s1 in any::<u64>(), s2 in any::<u64>()) {
        let (ps, qs) = (shuffled(&p, s1), shuffled(&q, s2));
        let c = chamfer_distance(&p, &q).unwrap();
        prop_assert!((c - chamfer_distance(&ps, &qs).unwrap()).abs() <= 1e-12 * c.max(1.0));
        let e = emd_distance(&p, &q, &exact()).unwrap();
        prop_assert!((e - emd_distance(&ps, &qs, &exact()).unwrap()).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn zero_only_for_equal_sets((p, q) in pair(24), s in any::<u64>()) {
        prop_assert_eq!(chamfer_distance(&p, &shuffled(&p, s)).unwrap(), 0.0);
        prop_assert_eq!(emd_distance(&p, &shuffled(&p, s), &exact()).unwrap(), 0.0);
        if p.iter().any(|x| !q.contains(x)) {
            prop_assert!(chamfer_distance(&p, &q).unwrap() > 0.0);
            prop_assert!(emd_distance(&p, &q, &exact()).unwrap() > 0.0);
        }
    }

    #[test]
    fn emd_dominates_directed_chamfer((p, q) in pair(24)) {
        let e = emd_distance(&p, &q, &exact()).unwrap();
        let d = directed_chamfer(&p, &q).unwrap().max(directed_chamfer(&q, &p).unwrap());
        prop_assert!(e >= d - 1e-12, "emd {} < directed chamfer {}", e, d);
    }

    #[test]
    fn metrics_are_translation_invariant((p, q) in pair(24), d in point()) {
        let (pt, qt) = (shift(&p, d), shift(&q, d));
        let c = chamfer_distance(&p, &q).unwrap();
        prop_assert!((c - chamfer_distance(&pt, &qt).unwrap()).abs() <= 1e-12 * c.max(1.0));
        let e = emd_distance(&p, &q, &exact()).unwrap();
        prop_assert!((e - emd_distance(&pt, &qt, &exact()).unwrap()).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn knn_matches_exhaustive_search(p in cloud(200), q in point(), k in 1usize..12) {
        let k = k.min(p.len());
        let tree = NeighborIndex::build(&p).unwrap().knn(&q, k).unwrap();
        let brute = brute_force_knn(&p, &q, k);
        let d = |v: &[neuralpci::geometry::Neighbor]| v.iter().map(|n| n.dist2).collect::<Vec<_>>();
        prop_assert_eq!(d(&tree), d(&brute));
    }

    #[test]
    fn label_transfer_with_k1_is_identity_on_same_geometry(p in cloud(64), seed in any::<u64>()) {
        let mut uniq: Vec<Point3> = Vec::new();
        for x in p {
            if !uniq.contains(&x) {
                uniq.push(x);
            }
        }
        let labels: Vec<i32> = (0..uniq.len()).map(|i| ((i as u64 ^ seed) % 5) as i32).collect();
        let c = PointCloud::new(uniq, 0.0);
        let out = transfer_labels(&LabeledPointCloud::new(c.clone(), labels.clone()).unwrap(), &c, 1).unwrap();
        prop_assert_eq!(out.labels, labels);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn field_is_a_per_point_map(p in cloud(20), seed in 0u64..100, s in any::<u64>(), t in 0.0f64..3.0) {
        let cfg = FieldConfig { depth: 2, width: 16, final_layer_scale: 1.0, ..FieldConfig::default() };
        let field = NeuralField::new(cfg, seed).unwrap();
        let out = field_forward(&field, &PointCloud::new(p.clone(), 1.0), 1.0, t).unwrap();
        let perm = shuffled(&(0..p.len()).map(|i| [i as f64, 0.0, 0.0]).collect::<Vec<_>>(), s);
        let order: Vec<usize> = perm.iter().map(|x| x[0] as usize).collect();
        let permuted: Vec<Point3> = order.iter().map(|&i| p[i]).collect();
        let out_p = field_forward(&field, &PointCloud::new(permuted, 1.0), 1.0, t).unwrap();
        prop_assert_eq!(out_p.len(), p.len());
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(out_p.points[j], out.points[i]);
        }
    }

    #[test]
    fn zero_output_layer_is_identity(p in cloud(20), t in -1.0f64..4.0) {
        let cfg = FieldConfig { depth: 2, width: 16, final_layer_scale: 0.0, ..FieldConfig::default() };
        let field = NeuralField::new(cfg, 3).unwrap();
        let out = field_forward(&field, &PointCloud::new(p.clone(), 0.0), 0.0, t).unwrap();
        prop_assert_eq!(out.points, p);
    }

    #[test]
    fn reference_selection_ignores_time_shift(q in -1.0f64..4.0, dt in -50.0f64..50.0) {
        let frames = |off: f64| (0..4).map(|i| PointCloud::new(vec![[0.0; 3]], i as f64 + off)).collect::<Vec<_>>();
        let a = select_reference(&InputWindow::new(frames(0.0)).unwrap(), q);
        // shift by a dyadic amount so the distances stay exact
        let dt = (dt * 8.0).round() / 8.0;
        let b = select_reference(&InputWindow::new(frames(dt)).unwrap(), q + dt);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn derivative_identities(c in prop::collection::vec(point(), 4 * 8)) {
        let clouds: [Vec<Point3>; 4] = std::array::from_fn(|k| c[k * 8..(k + 1) * 8].to_vec());
        let d = motion_derivatives(&CorrespondenceSet::new(clouds).unwrap());
        for i in 0..8 {
            prop_assert_eq!(d.a0[i], sub(&d.v1[i], &d.v0[i]));
            prop_assert_eq!(d.a1[i], sub(&d.v2[i], &d.v1[i]));
            prop_assert_eq!(d.b[i], sub(&d.a1[i], &d.a0[i]));
        }
    }

    #[test]
    fn explicit_models_follow_linear_and_quadratic_paths(
        x0 in prop::collection::vec(point(), 6),
        v in prop::collection::vec(point(), 6),
        a in prop::collection::vec(point(), 6),
        t in 0.0f64..1.0,
    ) {
        let at = |s: f64, acc: f64| -> Vec<Point3> {
            (0..6).map(|i| std::array::from_fn(|k| x0[i][k] + v[i][k] * s + acc * a[i][k] * s * s)).collect()
        };
        let corr = |acc: f64| CorrespondenceSet::new([at(-1.0, acc), at(0.0, acc), at(1.0, acc), at(2.0, acc)]).unwrap();
        for order in [ExplicitOrder::Linear, ExplicitOrder::Quadratic, ExplicitOrder::Cubic] {
            let got = explicit_interpolate(&corr(0.0), t, order).unwrap();
            for (g, w) in got.points.iter().zip(at(t, 0.0)) {
                for k in 0..3 {
                    prop_assert!((g[k] - w[k]).abs() <= 1e-12 * 8.0, "{:?} {} vs {}", order, g[k], w[k]);
                }
            }
        }
        let got = explicit_interpolate(&corr(1.0), t, ExplicitOrder::Quadratic).unwrap();
        for (g, w) in got.points.iter().zip(at(t, 1.0)) {
            for k in 0..3 {
                prop_assert!((g[k] - w[k]).abs() <= 1e-12 * 16.0);
            }
        }
    }

    #[test]
    fn flow_warps_agree_on_linear_motion(p in cloud(16), v in point(), t in 0.0f64..=1.0) {
        let p0 = PointCloud::new(p.clone(), 0.0);
        let p1 = PointCloud::new(shift(&p, v), 1.0);
        let fwd = vec![v; p.len()];
        let bwd = vec![[-v[0], -v[1], -v[2]]; p.len()];
        let (a, b) = scene_flow_warp(&p0, &p1, &fwd, &bwd, t).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            for k in 0..3 {
                prop_assert!((x[k] - y[k]).abs() <= 1e-12 * 8.0);
            }
        }
    }

    #[test]
    fn yaw_survives_inversion(yaw in -3.0f64..3.0, t in point()) {
        let r = Matrix3::new(yaw.cos(), -yaw.sin(), 0.0, yaw.sin(), yaw.cos(), 0.0, 0.0, 0.0, 1.0);
        let tr = Vector3::new(t[0], t[1], t[2]);
        let pose = RigidPose::new(r, tr).unwrap();
        let inv = RigidPose::new(r.transpose(), -(r.transpose() * tr)).unwrap();
        let (m, mi) = (motion_magnitude(&pose), motion_magnitude(&inv));
        prop_assert!((m.yaw_deg - mi.yaw_deg).abs() < 1e-9);
        prop_assert!((m.translation_rms - mi.translation_rms).abs() < 1e-9);
    }

    #[test]
    fn windows_keep_inputs_and_held_out_apart(len in 2usize..30, frames in 2usize..5, between in 0usize..4, stride in prop::option::of(1usize..5)) {
        let seq: Vec<PointCloud> = (0..len).map(|i| PointCloud::new(vec![[i as f64, 0.0, 0.0]], i as f64)).collect();
        for w in make_windows(&seq, frames, between, stride).unwrap() {
            prop_assert_eq!(w.input_indices.len(), frames);
            prop_assert!(w.held_out_indices.iter().all(|h| !w.input_indices.contains(h)));
        }
    }
}

#[test]
fn binary_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    let points: Vec<Point3> = (0..500)
        .map(|i| {
            let f = |x: f64| f64::from(x as f32);
            [f(i as f64 * 0.37 - 50.0), f((i as f64).sin() * 1e3), f(-1e-4 * i as f64)]
        })
        .collect();
    let c = PointCloud::new(points, 0.0);
    save_cloud(&c, &path, CloudFormat::Bin).unwrap();
    assert_eq!(load_cloud(&path, CloudFormat::Bin).unwrap().points, c.points);
}

#[test]
fn text_formats_round_trip_to_single_precision() {
    let dir = tempfile::tempdir().unwrap();
    let c = generate_scene(&preset("two-body", 64, 1).unwrap(), 4).unwrap().frames[0].clone();
    for format in [CloudFormat::Xyz, CloudFormat::Ply] {
        let path = dir.path().join(format!("c.{}", format.extension()));
        save_cloud(&c, &path, format).unwrap();
        let back = load_cloud(&path, format).unwrap();
        assert_eq!(back.len(), c.len());
        for (a, b) in back.points.iter().zip(&c.points) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-6 * b[k].abs().max(1.0));
            }
        }
    }
}

#[test]
fn generated_frames_match_ground_truth() {
    for name in ["rigid-box", "rotating", "accelerating", "two-body"] {
        let scene = generate_scene(&preset(name, 100, 4).unwrap(), 9).unwrap();
        for f in &scene.frames {
            let gt = scene.ground_truth(f.time);
            for (a, b) in f.points.iter().zip(&gt.points) {
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() <= 1e-12, "{name} at t={}", f.time);
                }
            }
        }
    }
}
