use num_complex::Complex64;
use proptest::prelude::*;
use serde::Deserialize;
use subdiff::fracops::{rl_derivative, FracOrderParam, TimeSignal};
use subdiff::mittag_leffler::propagator;
use subdiff::solver::*;
use subdiff::spectral::{Mode, SpectralField};

#[derive(Deserialize)]
struct DuhamelCase {
    rho: f64,
    lambda: f64,
    t: f64,
    constant: String,
    square: String,
    sine: Option<String>,
}

#[derive(Deserialize)]
struct DuhamelFile {
    cases: Vec<DuhamelCase>,
}

fn cases() -> Vec<DuhamelCase> {
    let f: DuhamelFile = serde_json::from_str(include_str!("data/duhamel_ref.json")).unwrap();
    f.cases
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn sampled(f: impl Fn(f64) -> f64, t: f64, n: usize) -> ModeSignal {
    let dt = t / n as f64;
    ModeSignal::Sampled { dt, values: (0..=n).map(|k| Complex64::new(f(k as f64 * dt), 0.0)).collect() }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn constant_forcing_matches_closed_form() {
    let q = DuhamelQuadrature::default();
    for c in cases() {
        let v = duhamel_mode(&ModeSignal::Constant(Complex64::new(1.0, 0.0)), c.lambda, c.rho, c.t, &q).unwrap();
        assert!(rel(v.re, num(&c.constant)) < 1e-12, "{} {} {}: {v}", c.rho, c.lambda, c.t);
        assert_eq!(v.im, 0.0);
    }
}

#[test]
fn quadratic_forcing_matches_closed_form() {
    let q = DuhamelQuadrature { nodes_per_unit: 256, ..Default::default() };
    for c in cases() {
        let f = sampled(|s| s * s, c.t, 20_000);
        let v = duhamel_mode(&f, c.lambda, c.rho, c.t, &q).unwrap();
        let want = num(&c.square);
        // interpolating t^2 on n cells: relative error below 0.5 / n^2
        let n = (256.0 * c.t).ceil().max(8.0);
        assert!(rel(v.re, want) < 0.5 / (n * n), "{} {} {}: {} vs {want}", c.rho, c.lambda, c.t, v.re);
    }
}

#[test]
fn sine_forcing_matches_direct_quadrature() {
    let q = DuhamelQuadrature { nodes_per_unit: 1024, ..Default::default() };
    for c in cases().into_iter().filter(|c| c.sine.is_some()) {
        let f = sampled(|s| (3.0 * s).sin(), c.t, 100_000);
        let v = duhamel_mode(&f, c.lambda, c.rho, c.t, &q).unwrap();
        let want = num(c.sine.as_ref().unwrap());
        assert!(rel(v.re, want) < 1e-5, "{} {} {}: {} vs {want}", c.rho, c.lambda, c.t, v.re);
        let g = duhamel_mode(&f, c.lambda, c.rho, c.t, &DuhamelQuadrature::graded(c.rho, 1024)).unwrap();
        assert!(rel(g.re, want) < 1e-4, "graded {} {} {}: {} vs {want}", c.rho, c.lambda, c.t, g.re);
    }
}

/// Observed orders of successive errors under node doubling.
fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn product_rule_is_second_order() {
    let (rho, lambda, t) = (0.5, 5.0, 1.0);
    let want = num(&cases().iter().find(|c| c.rho == rho && c.lambda == lambda && c.t == t).unwrap().square);
    let f = sampled(|s| s * s, t, 1 << 17);
    let errs: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&n| {
            let q = DuhamelQuadrature { nodes_per_unit: n, ..Default::default() };
            (duhamel_mode(&f, lambda, rho, t, &q).unwrap().re - want).abs()
        })
        .collect();
    // the t^(rho-1) endpoint adds an O(h^(2+rho)) term, so the observed
    // order climbs towards 2 from below
    let o = orders(&errs);
    assert!(o.iter().all(|&o| o >= 1.75) && o[2] >= 1.85, "{errs:?} {o:?}");
}

#[test]
fn graded_mesh_is_second_order_on_constant_forcing() {
    for c in cases().into_iter().filter(|c| c.t == 1.0 && c.lambda > 0.0) {
        let want = num(&c.constant);
        let errs: Vec<f64> = [16usize, 32, 64, 128]
            .iter()
            .map(|&n| {
                let q = DuhamelQuadrature::graded(c.rho, n);
                let v = duhamel_mode(&ModeSignal::Constant(Complex64::new(1.0, 0.0)), c.lambda, c.rho, c.t, &q);
                (v.unwrap().re - want).abs()
            })
            .collect();
        let o = orders(&errs);
        assert!(o.iter().skip(1).all(|&o| o >= 1.9), "rho={} lambda={}: {errs:?} {o:?}", c.rho, c.lambda);
    }
}

#[test]
fn complex_initial_coefficient() {
    let named: serde_json::Value = serde_json::from_str(include_str!("data/ml_named.json")).unwrap();
    let case = named["cases"].as_array().unwrap().iter().find(|c| c["name"] == "propagator_04_5_03").unwrap();
    let want: f64 = case["value"].as_str().unwrap().parse().unwrap();
    let phi = Complex64::new(2.0, 1.0);
    let v = homogeneous_mode(phi, 5.0, 0.4, 0.3).unwrap();
    assert!((v - phi * want).norm() < 1e-13 * (phi * want).norm());
}

fn single_mode_problem(rho: f64, mode: Mode, k: f64, forcing: bool) -> ProblemSpec {
    let dim = mode.dim();
    let one = Complex64::new(1.0, 0.0);
    let field = SpectralField::single_mode(dim, k, mode, one).unwrap();
    if forcing {
        ProblemSpec::new(rho, 1.0, SpectralField::new(dim, k).unwrap(), Forcing::Constant { field }).unwrap()
    } else {
        ProblemSpec::new(rho, 1.0, field, Forcing::None).unwrap()
    }
}

#[test]
fn solve_single_mode_closed_forms() {
    let m = Mode::new([2, -1]);
    let times = [0.01, 0.1, 1.0];
    let q = DuhamelQuadrature::default();
    for rho in [0.3, 0.5, 0.8, 1.0] {
        let snaps = solve(&single_mode_problem(rho, m.clone(), 10.0, false), &times, &q).unwrap();
        for s in &snaps {
            assert_eq!(s.field.len(), 1);
            let want = propagator(rho, 5.0, s.t).unwrap();
            assert!(rel(s.field.get(&m).re, want) < 1e-12);
            let reg = s.t.powf(1.0 - rho) * want;
            assert!(rel(s.regularized.get(&m).re, reg) < 1e-12);
        }
    }
    let heat = solve(&single_mode_problem(1.0, m.clone(), 10.0, false), &times, &q).unwrap();
    for s in &heat {
        assert!(rel(s.field.get(&m).re, (-5.0 * s.t).exp()) < 1e-14);
    }
}

#[test]
fn classical_limit_paths_agree() {
    let m = Mode::new([1, 1]);
    let times = [0.05, 0.5, 1.0];
    for forcing in [false, true] {
        let p = single_mode_problem(1.0, m.clone(), 4.0, forcing);
        let a = solve(&p, &times, &DuhamelQuadrature::default()).unwrap();
        let b = solve_classical_limit(&p, &times, 64).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (u, v) = (x.field.get(&m), y.field.get(&m));
            assert!((u - v).norm() < 1e-13 * v.norm(), "{u} {v}");
        }
    }
    // sampled forcing on both paths
    let dt = 1.0 / 1024.0;
    let frames = (0..=1024)
        .map(|k| {
            let t = k as f64 * dt;
            SpectralField::single_mode(2, 4.0, m.clone(), Complex64::new(t.cos(), t)).unwrap()
        })
        .collect();
    let p = ProblemSpec::new(1.0, 1.0, SpectralField::new(2, 4.0).unwrap(), Forcing::Sampled { dt, frames }).unwrap();
    let a = solve(&p, &times, &DuhamelQuadrature::default()).unwrap();
    let b = solve_classical_limit(&p, &times, 64).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.field.get(&m) - y.field.get(&m)).norm() < 1e-12);
    }
    assert!(solve_classical_limit(&single_mode_problem(0.5, m, 4.0, false), &times, 64).is_err());
}

#[test]
fn constant_forcing_solve_matches_closed_form() {
    let m = Mode::new([1, 2]);
    for c in cases().into_iter().filter(|c| c.lambda == 5.0) {
        let p = single_mode_problem(c.rho, m.clone(), 10.0, true);
        let s = solve(&p, &[c.t], &DuhamelQuadrature::default()).unwrap();
        assert!(rel(s[0].field.get(&m).re, num(&c.constant)) < 1e-12);
    }
}

#[test]
fn sampled_forcing_must_cover_horizon() {
    let frames = vec![SpectralField::new(1, 4.0).unwrap(); 5];
    let r = ProblemSpec::new(0.5, 1.0, SpectralField::new(1, 4.0).unwrap(), Forcing::Sampled { dt: 0.1, frames });
    assert!(matches!(r, Err(subdiff::Error::Coverage(_))));
}

#[test]
fn homogeneous_solution_satisfies_eigenrelation() {
    let (rho, lambda) = (0.6, 4.0);
    let phi = SpectralField::single_mode(1, 5.0, Mode::new([2]), Complex64::new(1.0, 0.5)).unwrap();
    let p = ProblemSpec::new(rho, 1.0, phi, Forcing::None).unwrap();
    let mut errs = vec![];
    for n in [256usize, 512, 1024] {
        let dt = 1.0 / n as f64;
        let times: Vec<f64> = (1..=n).map(|k| k as f64 * dt).collect();
        let snaps = solve(&p, &times, &DuhamelQuadrature::default()).unwrap();
        // g = t^(1-rho) u, with g(0) = phi / Gamma(rho)
        let mut g = vec![Complex64::new(1.0, 0.5) * subdiff::gamma::rgamma(rho)];
        g.extend(snaps.iter().map(|s| s.regularized.get(&Mode::new([2]))));
        let h = TimeSignal::with_leading_power(0.0, dt, g, rho - 1.0).unwrap();
        let d = rl_derivative(&h, FracOrderParam::derivative(rho).unwrap()).unwrap();
        let e = (n / 4..n).map(|k| (d.sample(k) + h.sample(k) * lambda).norm()).fold(0.0, f64::max);
        errs.push(e);
    }
    for o in orders(&errs) {
        assert!(o > 0.9, "{errs:?}");
    }
}

fn random_field(dim: usize, k: f64, vals: &[(i64, i64, f64, f64)]) -> SpectralField {
    let mut f = SpectralField::new(dim, k).unwrap();
    for &(a, b, re, im) in vals {
        let m = Mode::new([a, b]);
        if f.in_band(&m) {
            f.insert(m, Complex64::new(re, im)).unwrap();
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn modes_decouple(rho in 0.2f64..1.0,
                      phi in prop::collection::vec((-3i64..=3, -3i64..=3, -1.0f64..1.0, -1.0f64..1.0), 1..6),
                      f in prop::collection::vec((-3i64..=3, -3i64..=3, -1.0f64..1.0, -1.0f64..1.0), 0..4)) {
        let k = 12.0;
        let phi = random_field(2, k, &phi);
        let ff = random_field(2, k, &f);
        let p = ProblemSpec::new(rho, 1.0, phi.clone(), Forcing::Constant { field: ff.clone() }).unwrap();
        let times = [0.2, 0.7];
        let q = DuhamelQuadrature::default();
        let all = solve(&p, &times, &q).unwrap();
        for m in p.active_modes() {
            let one = |src: &SpectralField| {
                let v = src.get(&m);
                let mut s = SpectralField::new(2, k).unwrap();
                if v != Complex64::default() { s.insert(m.clone(), v).unwrap(); }
                s
            };
            let pm = ProblemSpec::new(rho, 1.0, one(&phi), Forcing::Constant { field: one(&ff) }).unwrap();
            let single = solve(&pm, &times, &q).unwrap();
            for (a, b) in all.iter().zip(&single) {
                let (x, y) = (a.field.get(&m), b.field.get(&m));
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
        let again = solve(&p, &times, &q).unwrap();
        for (a, b) in all.iter().zip(&again) {
            prop_assert_eq!(a.field.to_json(), b.field.to_json());
        }
    }
}
