use std::f64::consts::PI;

use dualcomp::assembly::spectrum_report;
use dualcomp::system::wave_system;
use dualcomp::timeint::{integrate, Method, Observer, StepperConfig};
use nalgebra::{DMatrix, DVector};

/// Jacobian of a linear right-hand side, column by column.
fn generator(sys: &dualcomp::system::SkewGradientSystem) -> DMatrix<f64> {
    let d = sys.dim();
    let mut j = DMatrix::zeros(d, d);
    for c in 0..d {
        let e = DVector::from_fn(d, |i, _| if i == c { 1.0 } else { 0.0 });
        j.set_column(c, &sys.rhs(&e).unwrap());
    }
    j
}

#[test]
fn unit_speed_frequencies() {
    // q_tt = q_xx with q_x(+-1) = 0: omega_k = k pi / 2.
    let sys = wave_system(16, &[1.0]).unwrap();
    let report = spectrum_report(&generator(&sys)).unwrap();
    assert!(report.max_abs_real < 1e-9);
    let mut freqs: Vec<f64> = report
        .eigenvalues
        .iter()
        .map(|z| z.im)
        .filter(|&w| w > 1e-4)
        .collect();
    freqs.sort_by(f64::total_cmp);
    for (k, w) in freqs.iter().take(6).enumerate() {
        let exact = (k + 1) as f64 * PI / 2.0;
        assert!(
            (w - exact).abs() < 1e-8 * exact,
            "mode {}: {w} vs {exact}",
            k + 1
        );
    }
    // Constant displacement and its secular partner form a Jordan block at
    // zero, which roundoff splits by about sqrt(eps).
    assert_eq!(freqs.len(), sys.dim() / 2 - 1);
}

#[test]
fn unit_speed_energy_drift() {
    let sys = wave_system(16, &[1.0]).unwrap();
    let u0 = sys
        .project(&[&|x: f64| (PI * x).cos(), &|x: f64| (0.5 * PI * x).sin()])
        .unwrap();
    let h = sys.clone();
    let obs = [Observer::new("H", move |u| h.energy(u))];
    let cfg = StepperConfig::new(Method::Midpoint, 0.01);
    let t = integrate(&sys, &u0, &cfg, 10.0, &obs).unwrap();
    assert!(t.is_complete());
    assert_eq!(t.times.len(), 1001);
    let drift = t.max_drift()[0];
    assert!(drift < 1e-10, "{drift}");
}

#[test]
fn variable_speed_self_convergence() {
    let a = [2.0, 1.0];
    let fine: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
    let q0 = |x: f64| (PI * x).cos();
    // p = 0 keeps the data compatible with q_x(+-1) = 0 for any a.
    let p0 = |_: f64| 0.0;
    let eval = |n: usize| {
        let sys = wave_system(n, &a).unwrap();
        let u = sys.project(&[&q0, &p0]).unwrap();
        let f = sys.rhs(&u).unwrap();
        (
            sys.eval_field(&f, 0, &fine, 0),
            sys.eval_field(&f, 1, &fine, 0),
        )
    };
    let (rq, rp) = eval(32);
    let scale = rq.amax().max(rp.amax());
    let mut errs = Vec::new();
    for n in [4, 8, 12, 16] {
        let (q, p) = eval(n);
        errs.push((&q - &rq).amax().max((&p - &rp).amax()) / scale);
    }
    for w in errs.windows(2) {
        assert!(w[1] / w[0] < 0.2, "{errs:?}");
    }
}
