use std::f64::consts::PI;

use dualcomp::system::{kdv_form1, kdv_form2, SkewGradientSystem};
use dualcomp::timeint::{integrate, Method, Observer, StepperConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    // Decaying spectrum keeps the state smooth.
    DVector::from_fn(2 * n + 1, |i, _| {
        let k = i.div_ceil(2);
        rng.random_range(-1.0..1.0) / (1.0 + k as f64).powi(2)
    })
}

/// Exact KdV right-hand side `-6 u u_x - u_xxx` by complex mode convolution.
fn convolution_rhs(u: &DVector<f64>) -> DVector<f64> {
    let n = (u.len() - 1) / 2;
    let c = dualcomp::basis::fourier::spectral_to_modes(u.as_slice());
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); 2 * n + 1];
    for k in -(n as i64)..=(n as i64) {
        let ik = num_complex::Complex64::new(0.0, k as f64);
        let mut acc = -(ik * ik * ik) * c[(k + n as i64) as usize];
        // u u_x = (u^2)_x / 2
        let mut sq = num_complex::Complex64::new(0.0, 0.0);
        for p in -(n as i64)..=(n as i64) {
            let q = k - p;
            if q.abs() <= n as i64 {
                sq += c[(p + n as i64) as usize] * c[(q + n as i64) as usize];
            }
        }
        acc -= 3.0 * ik * sq;
        out[(k + n as i64) as usize] = acc;
    }
    DVector::from_vec(dualcomp::basis::fourier::modes_to_spectral(&out))
}

#[test]
fn form1_matches_convolution_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sys = kdv_form1(12).unwrap();
    for _ in 0..10 {
        let u = random_state(&mut rng, 12);
        let diff = sys.rhs(&u).unwrap() - convolution_rhs(&u);
        assert!(diff.amax() < 1e-11, "{}", diff.amax());
    }
}

#[test]
fn forms_agree_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f1 = kdv_form1(16).unwrap();
    let f2 = kdv_form2(16).unwrap();
    for _ in 0..50 {
        let u = random_state(&mut rng, 16);
        let a = f1.rhs(&u).unwrap();
        let b = f2.rhs(&u).unwrap();
        assert!((&a - &b).amax() < 1e-10 * a.amax().max(1.0));
    }
}

#[test]
fn skew_gradient_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for sys in [kdv_form1(10).unwrap(), kdv_form2(10).unwrap()] {
        for _ in 0..50 {
            let u = random_state(&mut rng, 10);
            assert!(sys.skew_residual(&u).unwrap() < 1e-12);
        }
    }
}

#[test]
fn soliton_translates_rigidly() {
    // u = c/2 sech^2(sqrt(c)/2 (x - pi)) solves u_t = -c u_x on the line; on
    // [0, 2 pi) the periodic wraparound is below 1e-5 for c = 25.
    let c = 25.0_f64;
    let sys = kdv_form1(48).unwrap();
    let soliton = move |x: f64| 0.5 * c / ((c.sqrt() / 2.0 * (x - PI)).cosh().powi(2));
    let u = sys.project(&[&soliton]).unwrap();
    let pts: Vec<f64> = (0..200).map(|i| 2.0 * PI * i as f64 / 200.0).collect();
    let rhs = sys.rhs(&u).unwrap();
    let f = sys.eval_field(&rhs, 0, &pts, 0);
    let ux = sys.eval_field(&u, 0, &pts, 1);
    let rel = (f + &ux * c).amax() / (ux.amax() * c);
    assert!(rel < 1e-4, "{rel}");
}

fn observers(sys: &SkewGradientSystem) -> Vec<Observer> {
    let a = sys.clone();
    let b = sys.clone();
    let h2 = kdv_form2(sys.f0()[0].spec().n).unwrap();
    let h1 = kdv_form1(sys.f0()[0].spec().n).unwrap();
    vec![
        Observer::new("H1", move |u| h1.energy(u)),
        Observer::new("H2", move |u| h2.energy(u)),
        Observer::new("C", move |u| a.casimir(u)),
        Observer::new("H", move |u| b.energy(u)),
    ]
}

#[test]
fn form1_avf_conserves_energy_and_casimir() {
    let sys = kdv_form1(32).unwrap();
    let u0 = sys.project(&[&|x: f64| x.cos()]).unwrap();
    let cfg = StepperConfig::new(Method::Avf, 0.005);
    let t = integrate(&sys, &u0, &cfg, 1.0, &observers(&sys)).unwrap();
    assert!(t.is_complete());
    assert_eq!(t.times.len(), 201);
    let drift = t.max_drift();
    assert!(drift[0] < 1e-9, "H1 drift {}", drift[0]);
    assert!(drift[2] < 1e-10, "C drift {}", drift[2]);
}

#[test]
fn form2_midpoint_conserves_quadratic_energy() {
    let sys = kdv_form2(32).unwrap();
    let u0 = sys.project(&[&|x: f64| x.cos()]).unwrap();
    let cfg = StepperConfig::new(Method::Midpoint, 0.005);
    let t = integrate(&sys, &u0, &cfg, 1.0, &observers(&sys)).unwrap();
    assert!(t.is_complete());
    let drift = t.max_drift();
    assert!(drift[1] < 1e-10, "H2 drift {}", drift[1]);
    assert!(drift[2] < 1e-10, "C drift {}", drift[2]);
}

#[test]
fn zero_data_stays_zero() {
    let sys = kdv_form2(8).unwrap();
    let cfg = StepperConfig::new(Method::Midpoint, 0.01);
    let t = integrate(&sys, &DVector::zeros(17), &cfg, 0.1, &[]).unwrap();
    assert!(t.states.iter().all(|s| s.amax() == 0.0));
}
