//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
//! thresholds are fixed here. With `SPINSIM_ACCEPTANCE_STRICT=1` the process
//! exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use spinsim_core::experiment::{
    run_adnf_arnf, run_phase_cycle, run_phase_cycle_with, state_at,
    sweep_omega1, sweep_retention, Orientation, PowderScheme, RunOptions,
};
use spinsim_core::hamiltonian::{
    average_dipolar_closed, average_dipolar_matrix_form, average_dipolar_numeric, dipolar_hamiltonian_rot,
    nutating_average_reference, rf_hardware_from_basis, rf_ideal_from_parts, static_average_check,
    DipolarCoupling, NutatingFrame, SpinSystem,
};
use spinsim_core::propagation::{dipolar_order_metric, propagate_interval, DensityDeviation};
use spinsim_core::sequence::{SequenceSpec, ZetaChoice};
use spinsim_core::spin::{Axis, HermitianSpectrum, OperatorMatrix, SpinBasis};
use spinsim_core::waveform::{phase_correction, EnvelopeKind, EnvelopeSpec, Waveform};
use spinsim_testkit as tk;

const KHZ: f64 = 2.0 * PI * 1e3;
/// Model pair coupling, rad/s.
const D_MODEL: f64 = -5.0 * KHZ;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::rngs::StdRng::seed_from_u64(seed)
}

fn model_pair() -> SpinSystem<f64> {
    SpinSystem::pair(D_MODEL, PI / 2.0, 0.0).unwrap()
}

fn rel(a: &OperatorMatrix<f64>, b: &OperatorMatrix<f64>) -> f64 {
    a.distance(b) / b.frobenius_norm()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for set in 0..20 {
        let tau = r.random_range(0.2e-3..4e-3);
        let w2 = r.random_range(1.0..50.0) * KHZ;
        let w1 = if set < 2 { PI / tau } else { r.random_range(5.0..50.0) * KHZ };
        let env = EnvelopeSpec::new(EnvelopeKind::AdnfRampdown, w2, tau, 0.0).unwrap();
        let profile = tk::RampProfile { omega1: w1, omega2: w2, tau, t_retention: 0.0, zeta_down: 0.0, zeta_up: 0.0 };
        let integrand = |s: f64| profile.field(s) * (w1 * s).cos();
        let panel = 0.25 * PI / w1;
        let mut acc = 0.0;
        let mut t_prev = 0.0;
        for k in 1..=1000 {
            let t = tau * k as f64 / 1000.0;
            let n = ((t - t_prev) / panel).ceil().max(1.0) as usize;
            let h = (t - t_prev) / n as f64;
            for p in 0..n {
                let lo = t_prev + p as f64 * h;
                let hi = if p + 1 == n { t } else { lo + h };
                acc += tk::adaptive_simpson(&integrand, lo, hi, 1e-14);
            }
            t_prev = t;
            let closed = phase_correction(t, &env, w1, 0.0).unwrap();
            worst = worst.max((closed + acc).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |phi' closed - quadrature| = {worst:.2e} rad over 20 x 1000 points (limit 1e-9)"))
}

fn criterion_2() -> Outcome {
    let w = 20.0 * KHZ;
    let mut spec = SequenceSpec::new(w, w, 2e-3);
    spec.t_retention = 2e-3;
    let wf = Waveform::from_spec(&spec).unwrap();
    let t_end = spec.duration();
    let a = spec.omega2 * spec.tau / 2.0;
    let axis = |zeta: f64| tk::total_op('z', 1) * tk::C::new(zeta.cos(), 0.0) - tk::total_op('y', 1) * tk::C::new(zeta.sin(), 0.0);
    let zeta_r = spec.resolved_zeta_arnf();
    let u2 = tk::propagator(&axis(zeta_r), a) * tk::propagator(&axis(spec.zeta_adnf), a);
    let target = tk::propagator(&tk::total_op('x', 1), w * t_end) * u2;
    let profile = tk::RampProfile {
        omega1: w,
        omega2: w,
        tau: spec.tau,
        t_retention: spec.t_retention,
        zeta_down: spec.zeta_adnf,
        zeta_up: zeta_r,
    };
    let undo = tk::propagator(&tk::total_op('z', 1), -profile.phase_integral(t_end, 1e-12));
    let basis = SpinBasis::<f64>::new(1).unwrap();
    let u = propagate_interval(|t| rf_hardware_from_basis(&basis, &wf.sample(t)), 0.0, t_end, 25e-9).unwrap();
    let err = tk::frobenius(&(&undo * u.matrix() - &target));
    outcome(err <= 1e-6, format!("hardware propagation vs U1 U2 at dt = 25 ns: Frobenius {err:.2e} (limit 1e-6)"))
}

fn criterion_3() -> Outcome {
    let wr = 20.0 * KHZ;
    let mut r = rng(3);
    let mut worst = [0.0f64; 2];
    let mut off_worst = 0.0f64;
    for _ in 0..50 {
        let c = DipolarCoupling::new(0, 1, D_MODEL, r.random_range(0.0..PI), r.random_range(0.0..2.0 * PI)).unwrap();
        for (slot, (k, w1)) in [(1u8, wr / 2.0), (2u8, wr)].into_iter().enumerate() {
            let numeric = average_dipolar_numeric(&c, w1, wr, 1).unwrap();
            let closed = average_dipolar_closed(&c, k).unwrap();
            worst[slot] = worst[slot].max(rel(&numeric, &closed));
        }
    }
    for _ in 0..5 {
        let c = DipolarCoupling::new(0, 1, D_MODEL, r.random_range(0.0..PI), r.random_range(0.0..2.0 * PI)).unwrap();
        // 0.37 = 37/100: one common period spans 100 rotor periods
        let off = average_dipolar_numeric(&c, 0.37 * wr, wr, 1).unwrap();
        off_worst = off_worst.max(off.frobenius_norm() / D_MODEL.abs());
    }
    let pass = worst[0] <= 1e-6 && worst[1] <= 1e-6 && off_worst <= 1e-3;
    outcome(
        pass,
        format!(
            "numeric vs closed average, 50 orientations: rel {:.2e} (k=1), {:.2e} (k=2) (limit 1e-6); off-condition |H|/|d| = {off_worst:.2e} (limit 1e-3)",
            worst[0], worst[1]
        ),
    )
}

fn criterion_4() -> Outcome {
    let wr = 20.0 * KHZ;
    let mut r = rng(4);
    let mut worst_exact = 0.0f64;
    let mut worst_numeric = 0.0f64;
    for _ in 0..20 {
        let (beta, gamma) = (r.random_range(0.0..PI), r.random_range(0.0..2.0 * PI));
        let c = DipolarCoupling::new(0, 1, D_MODEL, beta, gamma).unwrap();
        for k in [1u8, 2] {
            let g = if k == 1 {
                -(2.0f64.sqrt() / 4.0) * D_MODEL * (2.0 * beta).sin()
            } else {
                D_MODEL * beta.sin().powi(2) / 4.0
            };
            let corner = tk::C::from_polar(0.375 * g, k as f64 * gamma);
            let mut want = tk::M::zeros(4, 4);
            want[(0, 3)] = corner;
            want[(3, 0)] = corner.conj();
            let scale = tk::frobenius(&want).max(1e-300);
            for op in [average_dipolar_closed(&c, k).unwrap(), average_dipolar_matrix_form(&c, k).unwrap()] {
                worst_exact = worst_exact.max(tk::frobenius(&(op.matrix() - &want)) / scale);
            }
            let w1 = if k == 2 { wr } else { wr / 2.0 };
            let numeric = average_dipolar_numeric(&c, w1, wr, 1).unwrap();
            worst_numeric = worst_numeric.max(tk::frobenius(&(numeric.matrix() - &want)) / scale);
        }
    }
    outcome(
        worst_exact <= 1e-12 && worst_numeric <= 1e-6,
        format!("double-quantum corner structure, 20 orientations: constructed {worst_exact:.2e} (limit 1e-12), numeric {worst_numeric:.2e} (limit 1e-6)"),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let u = tk::propagator(&tk::total_op('y', 2), PI / 2.0);
    for _ in 0..10 {
        let beta = r.random_range(0.0..PI);
        let c = DipolarCoupling::new(0, 1, D_MODEL, beta, 0.0).unwrap();
        let (lhs, rhs) = static_average_check(&c, 20.0 * KHZ).unwrap();
        // independent right-hand side
        let h = tk::dipolar_tensor(0, 1, 2) * tk::C::new(D_MODEL / 2.0 * (3.0 * beta.cos().powi(2) - 1.0), 0.0);
        let want = (&u * h * u.adjoint()) * tk::C::new(-0.5, 0.0);
        let scale = tk::frobenius(&want);
        worst = worst.max(tk::frobenius(&(lhs.matrix() - &want)) / scale);
        worst = worst.max(tk::frobenius(&(rhs.matrix() - &want)) / scale);
    }
    outcome(worst <= 1e-8, format!("static nutating-frame average vs -1/2 y-rotated coupling, 10 angles: rel {worst:.2e} (limit 1e-8)"))
}

fn criterion_6() -> Outcome {
    let sys = model_pair();
    let w = 20.0 * KHZ;
    let m = |tau: f64| {
        let spec = SequenceSpec { record_stride: 100_000, ..SequenceSpec::new(w, w, tau) };
        run_adnf_arnf(&spec, &sys, &Orientation::identity()).unwrap().recovered_m.norm()
    };
    let taus = [1e-3, 2e-3, 4e-3, 8e-3];
    let ms: Vec<f64> = taus.iter().map(|&t| m(t)).collect();
    let base = ms[1];
    let monotone = ms.windows(2).all(|p| p[1] >= 0.99 * p[0]);
    outcome(
        base >= 0.8 && monotone,
        format!(
            "static pair |m| at tau = 1/2/4/8 ms: {:.3}/{:.3}/{:.3}/{:.3}; need |m|(2 ms) >= 0.8 and no drop > 1% per doubling",
            ms[0], ms[1], ms[2], ms[3]
        ),
    )
}

fn criterion_7() -> Outcome {
    let wr = 20.0 * KHZ;
    let mut spec = SequenceSpec::new(wr, 20.0 * KHZ, 2e-3);
    spec.omega_r = wr;
    spec.static_mode = false;
    spec.dt = 1e-7;
    let scheme = PowderScheme::golden_spiral(144).unwrap();
    let sweep = sweep_omega1(&spec, &model_pair(), &scheme, &[wr, wr / 2.0, 0.3 * wr]).unwrap();
    let m: Vec<f64> = sweep.recovered.iter().map(|z| z.norm()).collect();
    // thresholds: R3 >= 4x, HORROR >= 2x the off-condition value
    let pass = m[0] >= 4.0 * m[2] && m[1] >= 2.0 * m[2];
    outcome(
        pass,
        format!(
            "powder (144) |m|: {:.4} (w1 = w_r), {:.4} (w_r/2), {:.4} (0.3 w_r); need ratios >= 4 and >= 2, got {:.2} and {:.2}",
            m[0],
            m[1],
            m[2],
            m[0] / m[2],
            m[1] / m[2]
        ),
    )
}

fn criterion_8() -> Outcome {
    let w1 = 30.0 * KHZ;
    let dt = 1.0 / (30e3 * 240.0);
    let mut spec = SequenceSpec::new(w1, 18.0 * KHZ, 2e-3);
    spec.dt = dt;
    let scheme = PowderScheme::single_crystal();
    let t_values: Vec<f64> = (0..8).map(|k| (60 * k) as f64 * dt).collect();
    let sys = model_pair();
    let unc = sweep_retention(&spec, &sys, &scheme, &t_values, false).unwrap();
    let comp = sweep_retention(&spec, &sys, &scheme, &t_values, true).unwrap();
    let rot = unc.x_rotation();
    let mut worst_abs = 0.0f64;
    let mut worst_step = 0.0f64;
    for (k, &t) in t_values.iter().enumerate() {
        let expect = w1 * (2.0 * spec.tau + t);
        let dev = spinsim_core::scalar::wrap_phase(rot[k] - expect).abs();
        worst_abs = worst_abs.max(dev);
        if k > 0 {
            let step = spinsim_core::scalar::wrap_phase(rot[k] - rot[k - 1] - w1 * (t - t_values[k - 1])).abs();
            worst_step = worst_step.max(step);
        }
    }
    let mags: Vec<f64> = comp.recovered.iter().map(|z| z.norm()).collect();
    let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    let spread = (hi - lo) / hi;
    let pass = worst_abs.to_degrees() <= 5.0 && spread <= 0.02;
    outcome(
        pass,
        format!(
            "uncompensated x-rotation vs w1(2 tau + T): worst {:.2} deg (limit 5; per-step advance error {:.2} deg); compensated |m| spread {:.1}% (limit 2%)",
            worst_abs.to_degrees(),
            worst_step.to_degrees(),
            100.0 * spread
        ),
    )
}

fn criterion_9() -> Outcome {
    let w = 20.0 * KHZ;
    // B1-locked magnetization: initial I_x with no nutating-frame field
    let mut locked = SequenceSpec::new(w, 0.0, 2e-3);
    locked.record_stride = 100_000;
    let options = RunOptions { initial: Some(DensityDeviation::along(Axis::X, 2).unwrap()), record: false };
    let mut leak = 0.0f64;
    for sys in [model_pair(), SpinSystem::uncoupled(2)] {
        let r = run_phase_cycle_with(&locked, &sys, &Orientation::identity(), &options).unwrap();
        leak = leak.max(r.recovered_m.norm()).max(r.magnetization[2].abs());
    }
    let mut spec = SequenceSpec::new(w, w, 2e-3);
    spec.zeta_arnf = ZetaChoice::Fixed(0.0);
    spec.record_stride = 100_000;
    let sys = model_pair();
    let cycled = run_phase_cycle(&spec, &sys, &Orientation::identity()).unwrap();
    let single = run_adnf_arnf(&spec, &sys, &Orientation::identity()).unwrap();
    let diff = (cycled.recovered_m - single.recovered_m).norm();
    outcome(
        leak <= 1e-10 && diff <= 1e-8,
        format!("locked-magnetization leak {leak:.2e} (limit 1e-10); cycled vs single-shot zeta = 0 differ by {diff:.2e} (limit 1e-8)"),
    )
}

fn criterion_10() -> Outcome {
    let wr = 20.0 * KHZ;
    let mut spec = SequenceSpec::new(wr, 20.0 * KHZ, 2e-3);
    spec.omega_r = wr;
    spec.static_mode = false;
    spec.t_retention = 1e-3;
    spec.dt = 1e-7;
    let sys = model_pair();
    let t = spec.tau + spec.t_retention / 2.0;
    let rho = state_at(&spec, &sys, &Orientation::identity(), t).unwrap();
    let basis = SpinBasis::new(2).unwrap();
    let frame = NutatingFrame::new(&basis, wr).unwrap();
    let nut = DensityDeviation::new(frame.transform(rho.matrix(), t)).unwrap();
    let reference = nutating_average_reference(&sys, wr, wr, false).unwrap().expect("recoupled");
    let metric = dipolar_order_metric(&nut, &reference).unwrap();
    outcome(metric >= 0.5, format!("R3 dipolar-order overlap at t = tau + T/2: {metric:.4} (need >= 0.5)"))
}

fn criterion_11() -> Outcome {
    let wr = 20.0 * KHZ;
    let sys = SpinSystem::pair(D_MODEL, 1.0, 0.7).unwrap();
    let basis = SpinBasis::<f64>::new(2).unwrap();
    let wf = Waveform::new(wr, 20.0 * KHZ, 2.5e-3, 0.0, 0.0, 0.0).unwrap();
    let h = |t: f64| {
        let mut h = rf_ideal_from_parts(&basis, t, wr, wf.nutating_amplitude(t), 0.0);
        h += &dipolar_hamiltonian_rot(&sys, wr, t, false).unwrap();
        h
    };
    let dt = 25e-9;
    let mut u = OperatorMatrix::identity(4);
    let mut rho = basis.total(Axis::Z).clone();
    let p0 = rho.inner(&rho).re;
    let mut worst_trace = 0.0f64;
    for k in 0..100_000 {
        let step = HermitianSpectrum::new(&h((k as f64 + 0.5) * dt)).unwrap().exp(dt);
        u = &step * &u;
        rho = rho.conjugate_by(&step);
        worst_trace = worst_trace.max(rho.trace().norm());
    }
    let unit = u.unitarity_error();
    let drift = (rho.inner(&rho).re - p0).abs();
    let interval = |dt: f64| propagate_interval(&h, 0.0, 2e-4, dt).unwrap();
    let (a, b, c) = (interval(1e-7), interval(5e-8), interval(2.5e-8));
    let ratio = a.distance(&b) / b.distance(&c);
    let pass = unit <= 1e-10 && worst_trace <= 1e-10 && drift <= 1e-8 && (ratio - 4.0).abs() <= 0.5;
    outcome(
        pass,
        format!("1e5 steps: unitarity {unit:.2e}, |Tr rho| {worst_trace:.2e}, purity drift {drift:.2e}; Richardson ratio {ratio:.3}"),
    )
}

fn spinsim(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_spinsim"))
        .args(args)
        .args(["--threads", threads])
        .output()
        .expect("spinsim runs")
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let (x, y) = (std::fs::read(a.join(n)), std::fs::read(b.join(n)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y && !x.is_empty() => {}
            _ => return Err(format!("{n} differs or is missing")),
        }
    }
    Ok(())
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = "sequence.omega1_hz = 20000\nsequence.omega2_hz = 20000\nsequence.tau_s = 0.0005\n";
    let cfg_static = format!("{base}sequence.retention_s = 0.0001\npowder.scheme = golden_spiral\npowder.n = 6\ndetect.mode = fid\ndetect.fid_duration_s = 0.0005\n");
    let cfg_mas = format!("{base}mas.rate_hz = 20000\npowder.scheme = golden_spiral\npowder.n = 4\nsweep.param = omega1\nsweep.values = 10000,20000\n");
    std::fs::write(d.join("static.cfg"), cfg_static).unwrap();
    std::fs::write(d.join("mas.cfg"), cfg_mas).unwrap();
    let (first, second) = (d.join("a"), d.join("b"));
    std::fs::create_dir_all(&first).unwrap();
    std::fs::create_dir_all(&second).unwrap();
    let p = |dir: &Path, f: &str| dir.join(f).to_string_lossy().into_owned();
    let static_cfg = p(d, "static.cfg");
    let mas_cfg = p(d, "mas.cfg");
    let runs: Vec<(Vec<String>, &str)> = vec![
        (vec!["waveform".into(), "--config".into(), static_cfg.clone(), "--out".into(), p(&first, "wf.csv")], "1"),
        (vec!["avgham".into(), "--config".into(), mas_cfg.clone(), "--out".into(), p(&first, "avg.csv")], "1"),
        (vec!["simulate".into(), "--config".into(), static_cfg, "--out".into(), p(&first, "sim")], "1"),
        (vec!["sweep".into(), "--config".into(), mas_cfg, "--out".into(), p(&first, "sweep.csv")], "1"),
    ];
    for (args, threads) in &runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = spinsim(&refs, threads);
        if !out.status.success() {
            return outcome(false, format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let reruns: Vec<(&str, String, String)> = vec![
        ("waveform", p(&first, "wf.csv.config"), p(&second, "wf.csv")),
        ("avgham", p(&first, "avg.csv.config"), p(&second, "avg.csv")),
        ("simulate", p(&first.join("sim"), "run.config"), p(&second, "sim")),
        ("sweep", p(&first, "sweep.csv.config"), p(&second, "sweep.csv")),
    ];
    for (cmd, cfg, out) in &reruns {
        let o = spinsim(&[cmd, "--config", cfg, "--out", out], "3");
        if !o.status.success() {
            return outcome(false, format!("rerun of {cmd} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    let checks = [
        same_files(&first, &second, &["wf.csv", "avg.csv", "sweep.csv"]),
        same_files(&first.join("sim"), &second.join("sim"), &["trajectory.csv", "fid.csv", "spectrum.csv"]),
    ];
    match checks.into_iter().find(|c| c.is_err()) {
        Some(Err(e)) => outcome(false, format!("rerun from echoed config: {e}")),
        _ => outcome(true, "waveform/avgham/simulate/sweep CSVs byte-identical after rerun from echoed config with 1 vs 3 threads".into()),
    }
}

fn main() {
    type Criterion = (u32, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 12] = [
        (1, criterion_1, Some(Duration::from_secs(1))),
        (2, criterion_2, Some(Duration::from_secs(5))),
        (3, criterion_3, Some(Duration::from_secs(10))),
        (4, criterion_4, None),
        (5, criterion_5, Some(Duration::from_secs(5))),
        (6, criterion_6, Some(Duration::from_secs(30))),
        (7, criterion_7, Some(Duration::from_secs(600))),
        (8, criterion_8, Some(Duration::from_secs(300))),
        (9, criterion_9, None),
        (10, criterion_10, None),
        (11, criterion_11, None),
        (12, criterion_12, None),
    ];
    // `cargo test -- --list` enumerates tests; nothing to list here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, run, limit) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let timing = match limit {
            Some(l) => {
                if elapsed > l {
                    pass = false;
                }
                format!("{:.2} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs())
            }
            None => format!("{:.2} s", elapsed.as_secs_f64()),
        };
        detail = format!("{detail}; {timing}");
        println!("criterion {n:>2} {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("all criteria pass");
        return;
    }
    println!("FAILED criteria: {failed:?}");
    // report-only by default so the rest of the workspace suite still runs
    if std::env::var_os("SPINSIM_ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
