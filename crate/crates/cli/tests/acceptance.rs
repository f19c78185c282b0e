//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion;
//! pass criterion numbers as arguments to run a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neuralpci::baselines::{explicit_interpolate, scene_flow_warp, CorrespondenceSet, ExplicitOrder};
use neuralpci::cloud::{dist2, sub, Point3};
use neuralpci::data::{cube_surface, generate_scene, preset, save_cloud, save_poses, sphere_surface, CloudFormat, RigidPose};
use neuralpci::evaluation::{evaluate_case, synthetic_sweep_cases};
use neuralpci::geometry::{autolabel, label_accuracy, morph_sequence, LabeledPointCloud};
use neuralpci::losses::{chamfer_distance, emd_exact, emd_sinkhorn, smoothness, total_loss, EmdConfig, EmdMode};
use neuralpci::optimize::{extrapolate, fit, interpolate, FitConfig};
use neuralpci::{FieldConfig, InputWindow, LossConfig, NeuralField, Normalization};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn net(depth: usize, width: usize) -> FieldConfig {
    FieldConfig {
        depth,
        width,
        ..FieldConfig::default()
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

fn gradient_correctness() -> Outcome {
    let scene = generate_scene(&preset("rigid-box", 32, 3)?, 1)?;
    let window = InputWindow::new(scene.frames.clone())?;
    let cfg = LossConfig::with_weights(1.0, 1.0, 1.0);
    let mut field = NeuralField::new(net(2, 16), 5)?;
    field.normalization = Normalization::fit(&window);
    field.time_axis = window.time_axis();
    let (_, grads) = total_loss(&field, &window, &cfg)?;

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let loss_at = |f: &NeuralField| total_loss(f, &window, &cfg).map(|(b, _)| b.total);
    for l in 0..grads.len() {
        let (rows, cols) = grads[l].weights.dim();
        // (row, col) with col == cols addressing the bias
        for r in 0..rows {
            for c in 0..=cols {
                let nudge = |f: &mut NeuralField, d: f64| {
                    f.params_and_adam().0[l].update(|w, b| {
                        if c == cols {
                            b[r] += d
                        } else {
                            w[[r, c]] += d
                        }
                    })
                };
                nudge(&mut field, h);
                let up = loss_at(&field)?;
                nudge(&mut field, -2.0 * h);
                let down = loss_at(&field)?;
                nudge(&mut field, h);
                let numeric = (up - down) / (2.0 * h);
                let analytic = if c == cols { grads[l].biases[r] } else { grads[l].weights[[r, c]] };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    Ok((worst < 1e-4, format!("{checked} parameters, max relative error {worst:.2e}")))
}

fn brute_chamfer(p: &[Point3], q: &[Point3]) -> f64 {
    let directed = |a: &[Point3], b: &[Point3]| {
        a.iter()
            .map(|x| b.iter().map(|y| dist2(x, y)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / a.len() as f64
    };
    directed(p, q) + directed(q, p)
}

fn brute_smoothness(points: &[Point3], motions: &[Point3], k: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut order: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist2(&points[a], &points[i]).total_cmp(&dist2(&points[b], &points[i])).then(a.cmp(&b)));
        let mut inner = 0.0;
        for &j in &order[..k] {
            inner += dist2(&motions[j], &motions[i]);
        }
        total += inner / k as f64;
    }
    total
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cd_mismatch = 0;
    for _ in 0..100 {
        let (n, m) = (rng.random_range(1..=256), rng.random_range(1..=256));
        let p = random_cloud(&mut rng, n);
        let q = random_cloud(&mut rng, m);
        if chamfer_distance(&p, &q)? != brute_chamfer(&p, &q) {
            cd_mismatch += 1;
        }
    }
    let approx = EmdConfig {
        mode: EmdMode::Approximate,
        ..EmdConfig::default()
    };
    let mut emd_worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=64);
        let p = random_cloud(&mut rng, n);
        let q = random_cloud(&mut rng, n);
        let exact = emd_exact(&p, &q)?.value;
        let approx = emd_sinkhorn(&p, &q, &approx)?.value;
        emd_worst = emd_worst.max((approx - exact).abs() / exact);
    }
    let pts = random_cloud(&mut rng, 128);
    let motions = random_cloud(&mut rng, 128);
    let smooth_equal = smoothness(&pts, &motions, 9)?.value == brute_smoothness(&pts, &motions, 9);
    Ok((
        cd_mismatch == 0 && emd_worst < 0.01 && smooth_equal,
        format!("chamfer mismatches {cd_mismatch}/100, approximate EMD worst relative error {emd_worst:.2e}, smoothness exact {smooth_equal}"),
    ))
}

fn self_reconstruction() -> Outcome {
    let scene = generate_scene(&preset("rigid-box", 512, 4)?, 3)?;
    let window = InputWindow::new(scene.frames.clone())?;
    let cfg = FitConfig {
        max_iters: 300,
        field: net(4, 64),
        loss: LossConfig::outdoor(),
        ..FitConfig::default()
    };
    let (field, report) = fit(&window, &cfg)?;
    let recon = interpolate(&field, &window, &window.timestamps())?;
    let mut worst = 0.0f64;
    for (r, f) in recon.iter().zip(window.frames()) {
        worst = worst.max(chamfer_distance(&r.points, &f.points)?);
    }
    let initial = report.history[0].loss.total;
    let at100 = report.history[100].loss.total;
    Ok((
        worst < 1e-3 && at100 < 0.5 * initial,
        format!("{} iterations, worst reconstruction CD {worst:.2e}, loss at 100 / initial {:.3}", cfg.max_iters, at100 / initial),
    ))
}

fn nonlinear_advantage() -> Outcome {
    let (mut field_cd, mut linear_cd) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 0..5 {
        let scene = generate_scene(&preset("rotating", 128, 4)?, seed)?;
        let window = InputWindow::new(scene.frames.clone())?;
        let cfg = FitConfig {
            seed,
            lr_decay: 0.997,
            field: net(8, 256),
            loss: LossConfig::with_weights(0.0, 1.0, 0.0),
            log_every: 100,
            ..FitConfig::default()
        };
        let (field, _) = fit(&window, &cfg)?;
        let truth = scene.ground_truth(1.5);
        let predicted = interpolate(&field, &window, &[1.5])?.remove(0);
        let (p1, p2) = (&window.frames()[1], &window.frames()[2]);
        let fwd: Vec<Point3> = p2.points.iter().zip(&p1.points).map(|(b, a)| sub(b, a)).collect();
        let bwd: Vec<Point3> = p1.points.iter().zip(&p2.points).map(|(a, b)| sub(a, b)).collect();
        let (linear, _) = scene_flow_warp(p1, p2, &fwd, &bwd, 0.5)?;
        let f = chamfer_distance(&predicted.points, &truth.points)?;
        let l = chamfer_distance(&linear.points, &truth.points)?;
        per_seed.push(format!("{:.2}", f / l));
        field_cd += f / 5.0;
        linear_cd += l / 5.0;
    }
    let ratio = field_cd / linear_cd;
    Ok((
        ratio <= 0.7,
        format!("mean field CD {field_cd:.3e}, linear CD {linear_cd:.3e}, ratio {ratio:.3} (per seed {})", per_seed.join(" ")),
    ))
}

fn explicit_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 50;
    let coeffs: Vec<[[f64; 3]; 3]> = (0..n)
        .map(|_| [[0; 3]; 3].map(|c: [i32; 3]| c.map(|_| rng.random_range(-2.0..2.0))))
        .collect();
    let at = |t: f64, quadratic: bool| -> Vec<Point3> {
        coeffs
            .iter()
            .map(|c| {
                let mut p = [0.0; 3];
                for a in 0..3 {
                    p[a] = c[0][a] + c[1][a] * t + if quadratic { c[2][a] * t * t } else { 0.0 };
                }
                p
            })
            .collect()
    };
    let slots = |quadratic: bool| {
        CorrespondenceSet::new([-1.0, 0.0, 1.0, 2.0].map(|t| at(t, quadratic)))
    };
    let (quad, lin) = (slots(true)?, slots(false)?);
    let mut quad_err = 0.0f64;
    let mut lin_err = 0.0f64;
    for _ in 0..20 {
        let t: f64 = rng.random_range(0.0..1.0);
        if t == 0.0 {
            continue;
        }
        let want_q = at(t, true);
        let got = explicit_interpolate(&quad, t, ExplicitOrder::Quadratic)?;
        quad_err = quad_err.max(got.points.iter().zip(&want_q).map(|(a, b)| dist2(a, b).sqrt()).fold(0.0, f64::max));
        let want_l = at(t, false);
        for order in [ExplicitOrder::Linear, ExplicitOrder::Quadratic, ExplicitOrder::Cubic] {
            let got = explicit_interpolate(&lin, t, order)?;
            lin_err = lin_err.max(got.points.iter().zip(&want_l).map(|(a, b)| dist2(a, b).sqrt()).fold(0.0, f64::max));
        }
    }
    let square = CorrespondenceSet::new([-1.0f64, 0.0, 1.0, 2.0].map(|t| vec![[t * t, 0.0, 0.0]]))?;
    let mut cubic_err = 0.0f64;
    for t in [0.1, 0.25, 0.5, 0.9] {
        let x = explicit_interpolate(&square, t, ExplicitOrder::Cubic)?.points[0][0];
        cubic_err = cubic_err.max((x - (t + t * t)).abs());
    }
    Ok((
        quad_err <= 1e-12 && lin_err <= 1e-12 && cubic_err <= 1e-12,
        format!("quadratic error {quad_err:.1e}, linear error (all orders) {lin_err:.1e}, cubic vs t + t^2 {cubic_err:.1e}"),
    ))
}

fn interval_degradation() -> Outcome {
    const INTERVALS: [f64; 3] = [1.0, 2.0, 3.0];
    // Raw query time enters one layer before the output, so paths are piecewise
    // linear in t; the encoded time gives them curvature between frames.
    let cfg = FitConfig {
        lr_decay: 0.997,
        field: FieldConfig {
            encode_query_time: true,
            ..net(8, 256)
        },
        loss: LossConfig::with_weights(0.0, 1.0, 0.0),
        log_every: 100,
        ..FitConfig::default()
    };
    let emd = EmdConfig::default();
    // A single fit is noisy at the larger intervals; average three scenes,
    // each scored at three times per gap.
    let seeds = 0..3u64;
    let mut field = [0.0; 3];
    let mut linear = [0.0; 3];
    let mut per_seed = Vec::new();
    for seed in seeds.clone() {
        let scene = generate_scene(&preset("accelerating", 128, 1)?, seed)?;
        let mut cds = Vec::new();
        for (k, case) in synthetic_sweep_cases(&scene, &INTERVALS, 0.0, 3)?.iter().enumerate() {
            let row = evaluate_case(case, &cfg, &emd)?;
            field[k] += row.field_cd / seeds.end as f64;
            linear[k] += row.linear_cd / seeds.end as f64;
            cds.push(format!("{:.2e}", row.field_cd));
        }
        per_seed.push(cds.join("/"));
    }
    let increasing = field.windows(2).all(|w| w[1] > w[0]);
    let beats = field.iter().zip(&linear).all(|(f, l)| f <= l);
    let table: Vec<String> = INTERVALS
        .iter()
        .enumerate()
        .map(|(k, iv)| format!("interval {iv}: field {:.3e} linear {:.3e}", field[k], linear[k]))
        .collect();
    Ok((
        increasing && beats,
        format!("{}; field per scene {}", table.join("; "), per_seed.join(" ")),
    ))
}

fn extrapolation_growth() -> Outcome {
    let scene = generate_scene(&preset("constant-velocity", 256, 4)?, 5)?;
    let window = InputWindow::new(scene.frames.clone())?;
    let cfg = FitConfig {
        max_iters: 500,
        field: net(4, 64),
        loss: LossConfig::with_weights(1.0, 0.0, 0.0),
        log_every: 100,
        ..FitConfig::default()
    };
    let (field, _) = fit(&window, &cfg)?;
    let predicted = extrapolate(&field, &window, 4)?;
    let mut cds = Vec::new();
    for p in &predicted {
        cds.push(chamfer_distance(&p.points, &scene.ground_truth(p.time).points)?);
    }
    let ok = cds.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = cds.iter().map(|c| format!("{c:.2e}")).collect();
    Ok((ok, format!("CD at horizon 1..4: {}", shown.join(" "))))
}

fn applications() -> Outcome {
    let mut spec = preset("two-body", 1024, 5)?;
    let clean = generate_scene(&spec, 6)?;
    spec.noise_sigma = 1e-3 * clean.extent();
    let scene = generate_scene(&spec, 6)?;
    let key = |i: usize| LabeledPointCloud::new(scene.frames[i].clone(), scene.labels.clone());
    let keyframes = vec![key(0)?, key(1)?, key(3)?, key(4)?];
    let cfg = FitConfig {
        max_iters: 300,
        field: net(4, 64),
        loss: LossConfig::with_weights(1.0, 0.0, 0.0),
        log_every: 100,
        ..FitConfig::default()
    };
    let (labeled, _) = autolabel(&keyframes, &scene.frames[2], 5, &cfg)?;
    let accuracy = label_accuracy(&labeled.labels, &scene.labels);

    let source = cube_surface(1024, 7);
    let target = sphere_surface(1024, 8);
    let (field, _, _) = morph_sequence(&source, &target, 1, &cfg)?;
    let window = InputWindow::new(vec![source.clone(), target.clone().with_time(1.0)])?;
    let ends = interpolate(&field, &window, &[0.0, 1.0])?;
    let cd0 = chamfer_distance(&ends[0].points, &source.points)?;
    let cd1 = chamfer_distance(&ends[1].points, &target.points)?;
    Ok((
        accuracy >= 0.99 && cd0 < 1e-3 && cd1 < 1e-3,
        format!("label accuracy {accuracy:.4}; morph endpoint CD {cd0:.2e} / {cd1:.2e}"),
    ))
}

fn cli(args: &[&str]) -> Result<(), Box<dyn std::error::Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_neuralpci")).args(args).output()?;
    if !out.status.success() {
        return Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)).into());
    }
    Ok(())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let d = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    let fit = ["--iters", "20", "--depth", "3", "--width", "16", "--weights", "1,1,1", "--seed", "3"];
    let with_fit = |head: Vec<String>| -> Vec<String> { head.into_iter().chain(fit.iter().map(|s| s.to_string())).collect() };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<String>>();

    cli(&["gen", "--preset", "two-body", "--points", "64", "--frames", "4", "--between", "1", "--noise", "0.001", "--seed", "2", "--out-dir", &d("gen")])?;
    let frame = |i: usize| d(&format!("gen/frame_{i:03}.xyz"));
    for i in [0, 3] {
        std::fs::copy(d("gen/labels.txt"), d(&format!("gen/frame_{i:03}.labels")))?;
    }
    let poses: Vec<RigidPose> = (0..12).map(|i| RigidPose::from_yaw_translation((i * i) as f64 * 0.01, [i as f64, 0.0, 0.0])).collect();
    save_poses(&poses, Path::new(&d("seq.poses")))?;
    std::fs::create_dir_all(d("morph"))?;
    save_cloud(&cube_surface(64, 1), Path::new(&d("morph/cube.xyz")), CloudFormat::Xyz)?;
    save_cloud(&sphere_surface(64, 2), Path::new(&d("morph/sphere.ply")), CloudFormat::Ply)?;

    let runs: Vec<(&str, Vec<String>)> = vec![
        ("gen", vec![]),
        ("interp", with_fit(s(&["interp", "--inputs", &frame(0), &frame(1), &frame(2), &frame(3), "--n", "2", "--format", "bin", "--out-dir", &d("interp")]))),
        ("interp-seq", with_fit(s(&["interp", "--sequence", &frame(0), &frame(1), &frame(2), &frame(3), &frame(0), &frame(1), "--frames", "2", "--n", "1", "--jobs", "2", "--out-dir", &d("interp-seq")]))),
        ("extrap", with_fit(s(&["extrap", "--inputs", &frame(0), &frame(1), &frame(2), "--horizon", "2", "--truth", &frame(3), &frame(3), "--out-dir", &d("extrap")]))),
        ("baseline", with_fit(s(&["baseline", "--mode", "explicit", "--order", "cubic", "--correspondence", "field", "--inputs", &frame(0), &frame(1), &frame(2), &frame(3), "--n", "3", "--out-dir", &d("baseline")]))),
        ("fuse", s(&["baseline", "--mode", "fuse-random", "--inputs", &frame(0), &frame(1), "--seed", "4", "--out-dir", &d("fuse")])),
        ("eval", s(&["eval", "--pred", &frame(1), &frame(2), "--truth", &frame(2), &frame(1), "--out-dir", &d("eval")])),
        ("sweep", with_fit(s(&["eval", "--sweep", "--scene", "accelerating", "--scene-points", "32", "--intervals", "1,2", "--jobs", "2", "--out-dir", &d("sweep")]))),
        ("autolabel", with_fit(s(&["autolabel", "--keyframes", &frame(0), &frame(3), "--target", &frame(1), "--truth-labels", &d("gen/labels.txt"), "--out-dir", &d("autolabel")]))),
        ("morph", with_fit(s(&["morph", "--source", &d("morph/cube.xyz"), "--target", &d("morph/sphere.ply"), "--steps", "2", "--endpoints", "--format", "ply", "--out-dir", &d("morph/out")]))),
        ("select", s(&["select", "--poses", &d("seq.poses"), "--top-k", "2", "--yaw-threshold", "1", "--out-dir", &d("select")])),
    ];
    let (mut identical, mut timing_only, mut failed) = (0, 0, Vec::new());
    for (name, args) in &runs {
        let dir = if *name == "gen" { d("gen") } else { args[args.iter().position(|a| a == "--out-dir").unwrap() + 1].clone() };
        if !args.is_empty() {
            cli(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
        let manifest = PathBuf::from(&dir).join("manifest.json");
        let again = d(&format!("rerun-{name}"));
        let out = Command::new(env!("CARGO_BIN_EXE_neuralpci"))
            .args(["rerun", "--manifest", &manifest.to_string_lossy(), "--out-dir", &again])
            .output()?;
        let report = String::from_utf8_lossy(&out.stderr);
        identical += report.lines().filter(|l| l.ends_with(": identical")).count();
        timing_only += report.lines().filter(|l| l.ends_with("except timing fields")).count();
        if !out.status.success() {
            failed.push(format!("{name}: {}", report.trim()));
        }
    }
    let detail = format!(
        "{} runs; {identical} files bit-identical, {timing_only} identical except wall-clock fields{}",
        runs.len(),
        if failed.is_empty() { String::new() } else { format!("; failures: {}", failed.join(" | ")) }
    );
    Ok((failed.is_empty(), detail))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradient_correctness),
        ("metric-oracle equivalence", metric_oracles),
        ("self-reconstruction convergence", self_reconstruction),
        ("nonlinear advantage", nonlinear_advantage),
        ("explicit-model exactness", explicit_exactness),
        ("interval degradation", interval_degradation),
        ("extrapolation error growth", extrapolation_growth),
        ("applications", applications),
        ("determinism", determinism),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= pass;
        println!(
            "criterion {} {name}: {} ({detail}) [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
