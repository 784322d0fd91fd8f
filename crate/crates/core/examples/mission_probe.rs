//! Scratch probe: run mission batches across speeds and seeds and print
//! per-trial outcomes. Not part of the library surface.

use pursuit_core::sim::{run_mission, run_mission_traced, SimConfig, TargetConfig};

fn detail(a: f64, speed: f64, trial: u64) {
    let seed = 1000 * speed as u64 + trial;
    let mut cfg = SimConfig::default();
    cfg.target = TargetConfig::seeded(a, speed, seed);
    let (r, trace) = run_mission_traced(&cfg, seed).unwrap();
    println!("mode log:");
    for tr in &r.mode_log {
        println!("  {:8.2}s  {:>8} -> {:<9}  ({})", tr.time, tr.from.name(), tr.to.name(), tr.trigger);
    }
    println!(
        "result: success={} converged={} arrived={} loops={:?} int_err={:?} est_a={:?} ratio={:?} n_obs={} paced={} dur={:.1}",
        r.success, r.converged, r.arrived, r.loops_used, r.intercept_error, r.estimated_a,
        r.final_ratio, r.n_observations, r.paced_ticks, r.duration_s
    );
    println!("d_h history (n, d_h/a_fit, a_fit), every 10th + last:");
    for (i, (n, d, a_fit)) in r.d_h_history.iter().enumerate() {
        if i % 10 == 0 || i + 1 == r.d_h_history.len() {
            println!("  {:>4}  {:.4}  {:.2}", n, d / a_fit, a_fit);
        }
    }
    if let Some((a_fit, pose, shift_x)) = r.final_fit {
        // Per-observation distance to the final fitted curve: find what
        // pins the observation-to-curve side of the Hausdorff metric.
        let dense: Vec<_> = pursuit_core::lemniscate::sample_lemniscate(a_fit, shift_x, 2048)
            .into_iter()
            .map(|p| pose.apply(p))
            .collect();
        let mut dists: Vec<(f64, f64)> = r
            .observations_g
            .iter()
            .map(|&(t, p)| {
                let d = dense
                    .iter()
                    .map(|s| (p - s).norm())
                    .fold(f64::INFINITY, f64::min);
                (d, t)
            })
            .collect();
        dists.sort_by(|x, y| y.0.total_cmp(&x.0));
        let over = |lim: f64| dists.iter().filter(|(d, _)| *d > lim).count();
        println!(
            "obs-to-final-fit: n={} >1m: {} >2m: {} >4m: {}",
            dists.len(),
            over(1.0),
            over(2.0),
            over(4.0)
        );
        println!("worst 10 (dist, time):");
        for (d, t) in dists.iter().take(10) {
            println!("    {d:7.2} m at t={t:7.2} s");
        }
    }
    if let Some(p) = r.intercept_position_g {
        // Decompose the intercept error against the dense true path: z error
        // (plane tilt) vs in-plane miss.
        let path = pursuit_core::sim::TargetPath::new(&cfg.target);
        let period = path.period();
        let mut best = f64::INFINITY;
        let mut best_q = p;
        for i in 0..20_000 {
            let q = path.position_at(period * i as f64 / 20_000.0);
            let d = (q - p).norm();
            if d < best {
                best = d;
                best_q = q;
            }
        }
        let dz = p.z - best_q.z;
        let dxy = ((p.x - best_q.x).powi(2) + (p.y - best_q.y).powi(2)).sqrt();
        println!(
            "intercept err decomposition: |e|={:.3} dz={:.3} dxy={:.3} at pose=({:.2},{:.2},{:.2}) yaw={:.3}",
            best, dz, dxy, p.x, p.y, p.z, r.intercept_yaw_g.unwrap_or(f64::NAN)
        );
    }
    if let Some(last) = trace.last() {
        println!(
            "final: t={:.2} mode={:?} follower=({:.2},{:.2},{:.2} yaw {:.3}) target=({:.2},{:.2},{:.2})",
            last.time, last.mode,
            last.follower.position.x, last.follower.position.y, last.follower.position.z,
            last.follower.yaw, last.target_g.x, last.target_g.y, last.target_g.z
        );
    }
    // Sensing-geometry profile: how often the target was in depth range,
    // in the camera frustum, and both, over sensing-mode ticks.
    let mount = pursuit_core::geometry::RigidTransform::forward_camera_mount();
    let intr = cfg.sensor.intrinsics;
    let mut in_range = 0usize;
    let mut in_fov = 0usize;
    let mut both = 0usize;
    let mut total = 0usize;
    for rec in &trace {
        if matches!(rec.mode, pursuit_core::guidance::Mode::Search | pursuit_core::guidance::Mode::Follow) {
            total += 1;
            let d = (rec.target_g - rec.follower.position).norm();
            let ranged = d < 15.0;
            let t_g_c = rec.follower.to_transform().compose(&mount);
            let p_c = t_g_c.inverse().apply(rec.target_g);
            let fov = intr.project(p_c).is_some_and(|(u, v)| intr.contains(u, v));
            if ranged {
                in_range += 1;
            }
            if fov {
                in_fov += 1;
            }
            if ranged && fov {
                both += 1;
            }
        }
    }
    if total > 0 {
        println!(
            "sensing ticks {}: in-range {:.2} in-fov {:.2} both {:.2}",
            total,
            in_range as f64 / total as f64,
            in_fov as f64 / total as f64,
            both as f64 / total as f64
        );
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let first = args.next();
    if first.as_deref() == Some("detail") {
        let a: f64 = args.next().unwrap().parse().unwrap();
        let speed: f64 = args.next().unwrap().parse().unwrap();
        let trial: u64 = args.next().unwrap().parse().unwrap();
        detail(a, speed, trial);
        return;
    }
    let a: f64 = first.map(|s| s.parse().unwrap()).unwrap_or(20.0);
    let speeds: Vec<f64> = args
        .next()
        .map(|s| s.split(',').map(|v| v.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    let trials: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(15);
    let lead: Option<f64> = args.next().map(|s| s.parse().unwrap());
    let threshold: Option<f64> = args.next().map(|s| s.parse().unwrap());

    println!(
        "{:>5} {:>4} {:>3} {:>4} {:>4} {:>6} {:>8} {:>8} {:>8} {:>6} {:>7} {:>7}",
        "speed", "seed", "ok", "conv", "arr", "loops", "int_err", "foc_err", "est_a", "n_obs", "dur", "ratio"
    );
    for &speed in &speeds {
        let mut n_ok = 0;
        let mut n_conv3 = 0;
        let mut n_acc = 0;
        let mut errors: Vec<f64> = Vec::new();
        for trial in 0..trials {
            let seed = 1000 * speed as u64 + trial;
            let mut cfg = SimConfig::default();
            cfg.target = TargetConfig::seeded(a, speed, seed);
            if let Some(l) = lead {
                cfg.pipeline.servo.lead_time_s = l;
            }
            if let Some(th) = threshold {
                cfg.pipeline.estimator.threshold = th;
            }
            let r = run_mission(&cfg, seed).unwrap();
            if r.success {
                n_ok += 1;
            }
            if r.converged && r.loops_used.map_or(false, |l| l < 3.0) {
                n_conv3 += 1;
            }
            if r.intercept_error.map_or(false, |e| e < 1.25) {
                n_acc += 1;
            }
            errors.push(r.intercept_error.unwrap_or(f64::INFINITY));
            let min_ratio = r
                .d_h_history
                .iter()
                .map(|&(_, d, a_fit)| d / a_fit)
                .fold(f64::INFINITY, f64::min);
            println!(
                "{:>5} {:>4} {:>3} {:>4} {:>4} {:>6} {:>8} {:>8} {:>8} {:>6} {:>7} {:>7} {:>7}",
                speed,
                trial,
                r.success as u8,
                r.converged as u8,
                r.arrived as u8,
                r.loops_used.map_or("-".into(), |v| format!("{v:.2}")),
                r.intercept_error.map_or("-".into(), |v| format!("{v:.3}")),
                r.focal_error.map_or("-".into(), |v| format!("{v:.3}")),
                r.estimated_a.map_or("-".into(), |v| format!("{v:.3}")),
                r.n_observations,
                format!("{:.1}", r.duration_s),
                r.final_ratio.map_or("-".into(), |v| format!("{v:.3}")),
                if min_ratio.is_finite() {
                    format!("{min_ratio:.3}")
                } else {
                    "-".into()
                },
            );
        }
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errors[errors.len() / 2];
        println!(
            "== speed {speed}: success {n_ok}/{trials}, conv<3loops {n_conv3}/{trials}, err<1.25 {n_acc}/{trials}, median_err {median:.3}"
        );
    }
}
