use proptest::prelude::*;
use subdiff::fracops::*;
use subdiff::gamma::gamma;
use subdiff::mittag_leffler::{ml_eval, MlParams};

/// Composite Simpson on [0, 1] with 2n panels.
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / (2 * n) as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..2 * n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

/// Refine Simpson until two successive values agree to 1e-14.
fn converged(f: impl Fn(f64) -> f64 + Copy) -> f64 {
    let mut n = 16;
    let mut prev = simpson(f, n);
    loop {
        n *= 2;
        let cur = simpson(f, n);
        if (cur - prev).abs() <= 1e-14 * cur.abs() || n > 1 << 20 {
            return cur;
        }
        prev = cur;
    }
}

/// (1/Gamma(a)) int_0^t h(xi) (t - xi)^(a-1) dxi for smooth h, using
/// xi = t (1 - v^(1/a)), which removes the endpoint singularity.
fn frac_integral_oracle(h: impl Fn(f64) -> f64 + Copy, a: f64, t: f64) -> f64 {
    // (t - xi)^(a-1) dxi = t^a / a d(v)  with  t - xi = t v^(1/a)
    let g = move |v: f64| h(t * (1.0 - v.powf(1.0 / a)));
    t.powf(a) / a * converged(g) / gamma(a)
}

fn at_time(s: &TimeSignal, t: f64) -> f64 {
    let k = (t / s.dt).round() as usize;
    s.sample(k)
}

#[test]
fn integral_of_square_matches_quadrature_oracle() {
    let mut errs = vec![];
    for &n in &[64usize, 128, 256] {
        let dt = 1.0 / n as f64;
        let h = TimeSignal::from_fn(dt, n + 1, |t| t * t).unwrap();
        let i = rl_integral(&h, FracOrderParam::integral(-0.5).unwrap()).unwrap();
        let e = [0.5, 1.0]
            .iter()
            .map(|&t| (at_time(&i, t) - frac_integral_oracle(|x| x * x, 0.5, t)).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    // the oracle agrees with Gamma(3)/Gamma(3.5) t^2.5
    let closed = 2.0 / gamma(3.5);
    assert!((frac_integral_oracle(|x| x * x, 0.5, 1.0) - closed).abs() < 1e-13);
    assert!(errs[2] < 1e-5, "{errs:?}");
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
    }
}

#[test]
fn power_kernel_integral_is_gamma() {
    for &rho in &[0.3, 0.5, 0.8] {
        let h = TimeSignal::with_leading_power(0.0, 1.0 / 4096.0, vec![1.0; 4097], rho - 1.0).unwrap();
        let i = rl_integral(&h, FracOrderParam::integral(rho - 1.0).unwrap()).unwrap();
        for k in 0..i.len() {
            assert!((i.sample(k) - gamma(rho)).abs() < 1e-12);
        }
    }
}

#[test]
fn rl_derivative_kernel_vanishes() {
    let rho = 0.5;
    let h = TimeSignal::with_leading_power(0.0, 1e-3, vec![1.0; 1001], rho - 1.0).unwrap();
    let d = rl_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
    let m = (1..d.len() - 1).map(|k| d.sample(k).abs()).fold(0.0, f64::max);
    assert!(m <= d.dt, "{m}");
}

#[test]
fn eigenrelation_of_the_propagator() {
    let (rho, lambda) = (0.5, 2.0);
    let p = MlParams { rho, mu: rho };
    let mut errs = vec![];
    for &n in &[256usize, 512, 1024] {
        let dt = 1.0 / n as f64;
        let g: Vec<f64> = (0..=n).map(|k| ml_eval(p, -lambda * (k as f64 * dt).powf(rho)).unwrap()).collect();
        let h = TimeSignal::with_leading_power(0.0, dt, g, rho - 1.0).unwrap();
        let d = rl_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
        let e = (n / 4..n).map(|k| (d.sample(k) + lambda * h.sample(k)).abs()).fold(0.0, f64::max);
        errs.push(e);
    }
    // first order: error <= C dt with C tied to lambda
    for (e, n) in errs.iter().zip([256.0, 512.0, 1024.0]) {
        assert!(*e <= 2.0 * lambda / n, "{errs:?}");
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 0.9, "{errs:?}");
    }
}

#[test]
fn classical_limit_on_square() {
    let h = TimeSignal::from_fn(0.01, 101, |t| t * t).unwrap();
    let d = rl_derivative(&h, FracOrderParam::derivative(1.0).unwrap()).unwrap();
    for k in 0..d.len() {
        assert!((d.sample(k) - 2.0 * d.time(k)).abs() < 1e-12);
    }
    let c = caputo_derivative(&h, FracOrderParam::derivative(1.0).unwrap()).unwrap();
    for k in 0..c.len() {
        assert!((c.sample(k) - 2.0 * c.time(k)).abs() < 1e-12);
    }
    let near = rl_derivative(&h, FracOrderParam::derivative(0.999).unwrap()).unwrap();
    for k in 10..near.len() - 1 {
        assert!((near.sample(k) - 2.0 * near.time(k)).abs() < 1e-2);
    }
}

#[test]
fn caputo_of_identity_matches_quadrature_oracle() {
    let rho = 0.6;
    let h = TimeSignal::from_fn(1.0 / 512.0, 513, |t| t).unwrap();
    let c = caputo_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
    for &t in &[0.25, 0.5, 1.0] {
        let want = frac_integral_oracle(|_| 1.0, 1.0 - rho, t);
        assert!((at_time(&c, t) - want).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn gl_on_identity_is_first_order() {
    let rho = 0.5;
    let want = |t: f64| t.sqrt() / gamma(1.5);
    let mut errs = vec![];
    for &n in &[128usize, 256, 512, 1024] {
        let h = TimeSignal::from_fn(1.0 / n as f64, n + 1, |t| t).unwrap();
        let d = gl_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
        errs.push((at_time(&d, 0.5) - want(0.5)).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 0.9 && order < 1.1, "{errs:?}");
    }
}

fn smooth(a: f64, b: f64, c: f64, w: f64) -> impl Fn(f64) -> f64 + Copy {
    move |t: f64| a + b * t + c * (w * t).sin()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semigroup_of_integrals(a in 0.05f64..0.95, b in 0.05f64..0.95,
                              c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, w in 0.5f64..3.0) {
        let f = smooth(c0, c1, c2, w);
        let n = 200;
        let dt = 1.0 / n as f64;
        let h = TimeSignal::from_fn(dt, n + 1, f).unwrap();
        let ia = rl_integral(&h, FracOrderParam::integral(-a).unwrap()).unwrap();
        let iab = rl_integral(&ia, FracOrderParam::integral(-b).unwrap()).unwrap();
        let direct = rl_integral(&h, FracOrderParam::integral(-a - b).unwrap()).unwrap();
        let scale = h.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        for k in 0..=n {
            prop_assert!((iab.sample(k) - direct.sample(k)).abs() <= 3.0 * dt * dt * scale);
        }
    }

    #[test]
    fn derivatives_are_linear(rho in 0.05f64..0.95, p in -2.0f64..2.0, q in -2.0f64..2.0,
                              w1 in 0.5f64..3.0, w2 in 0.5f64..3.0) {
        let dt = 0.01;
        let n = 120;
        let f1 = smooth(0.3, -0.2, 1.0, w1);
        let f2 = smooth(-0.7, 0.5, 0.4, w2);
        let h1 = TimeSignal::from_fn(dt, n, f1).unwrap();
        let h2 = TimeSignal::from_fn(dt, n, f2).unwrap();
        let hs = TimeSignal::from_fn(dt, n, |t| p * f1(t) + q * f2(t)).unwrap();
        let r = FracOrderParam::derivative(rho).unwrap();
        type Op = fn(&TimeSignal, FracOrderParam) -> subdiff::Result<TimeSignal>;
        let ops: [Op; 2] = [rl_derivative, gl_derivative];
        for op in ops {
            let (d1, d2, ds) = (op(&h1, r).unwrap(), op(&h2, r).unwrap(), op(&hs, r).unwrap());
            for k in 1..n {
                let lin = p * d1.sample(k) + q * d2.sample(k);
                let scale = 1.0 + (p * d1.sample(k)).abs() + (q * d2.sample(k)).abs();
                prop_assert!((ds.sample(k) - lin).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn rl_and_gl_agree_at_first_order(rho in 0.1f64..0.9, c0 in -1.0f64..1.0, c1 in 0.2f64..1.0, w in 0.5f64..2.0) {
        let f = smooth(c0, c1, 0.5, w);
        let mut diffs = vec![];
        for &n in &[256usize, 512, 1024] {
            let h = TimeSignal::from_fn(1.0 / n as f64, n + 1, f).unwrap();
            let r = FracOrderParam::derivative(rho).unwrap();
            let a = rl_derivative(&h, r).unwrap();
            let b = gl_derivative(&h, r).unwrap();
            let d = (n / 2..=n).map(|k| (a.sample(k) - b.sample(k)).abs()).fold(0.0, f64::max);
            diffs.push(d);
        }
        for w in diffs.windows(2) {
            prop_assert!((w[0] / w[1]).log2() >= 0.9, "{:?}", diffs);
        }
    }

    #[test]
    fn kernel_property(rho in 0.05f64..0.95, n in 50usize..400) {
        let dt = 1.0 / n as f64;
        let h = TimeSignal::with_leading_power(0.0, dt, vec![1.0; n + 1], rho - 1.0).unwrap();
        let d = rl_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
        let m = (1..n).map(|k| d.sample(k).abs()).fold(0.0, f64::max);
        prop_assert!(m <= dt);
    }
}
