//! Checks of computed solutions against the equation, the initial
//! condition, truncation tail bounds and the kernel estimates.
//!
//! Decay conditions written as `tau > N/4` with weights `|n|^(4 tau)` are the
//! Liouville condition `a > N/2` with `a = 2 tau`; `membership_report` takes `a`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{finite_difference, gl_derivative_corrected, FracOrderParam, TimeSignal};
use crate::gamma::rgamma;
use crate::mittag_leffler::{bound_constant_m1, check_m2, ml_eval, MlParams};
use crate::solver::{solve, DuhamelQuadrature, Forcing, ModeSignal, ProblemSpec, SolutionSnapshot};
use crate::spectral::{min_points_per_axis, synthesize, Mode, SpectralField};

/// Per-time norms of `d_t^rho u + A u - f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// L2 norm over the torus (normalised by its volume) of the residual.
    pub residual_l2: Vec<f64>,
    /// The same norm of `u`, for scale.
    pub solution_l2: Vec<f64>,
    pub dt_used: f64,
    pub expected_order: f64,
    pub warnings: Vec<String>,
}

impl ResidualReport {
    /// `max residual_l2 / solution_l2` over the times `>= t_min`.
    pub fn max_relative(&self, t_min: f64) -> f64 {
        self.times
            .iter()
            .zip(self.residual_l2.iter().zip(&self.solution_l2))
            .filter(|(t, _)| **t >= t_min)
            .map(|(_, (r, s))| if *s > 0.0 { r / s } else { *r })
            .fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:>14} {:>14} {:>14}\n", "t", "residual_l2", "solution_l2");
        for i in 0..self.times.len() {
            let _ =
                writeln!(s, "{:>14.6e} {:>14.6e} {:>14.6e}", self.times[i], self.residual_l2[i], self.solution_l2[i]);
        }
        s
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::Grid(format!("need at least 3 snapshots, got {}", times.len())));
    }
    let dt = times[0];
    if !(dt > 0.0) {
        return Err(Error::Grid(format!("first snapshot at t = {dt}; expected t = dt > 0")));
    }
    for (k, &t) in times.iter().enumerate() {
        let want = (k + 1) as f64 * dt;
        if (t - want).abs() > 1e-9 * want {
            return Err(Error::Grid(format!("snapshot {k} at t = {t}, expected {want} on a uniform grid")));
        }
    }
    Ok(dt)
}

/// Residual of the equation for snapshots at `t_k = k dt`, `k = 1..n`.
///
/// Computed per mode: the Laplacian is exact in frequency space, and the time
/// derivative comes from the Grünwald–Letnikov sum applied to the samples,
/// with starting weights for the singular powers `t^(rho(k+1)-1) < 0` of the
/// solution near `t = 0`. For `rho = 1` second-order differences are used.
pub fn residual_check(snapshots: &[SolutionSnapshot], forcing: &Forcing, rho: f64) -> Result<ResidualReport> {
    MlParams::new(rho, rho)?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let dt = uniform_step(&times)?;
    let n = snapshots.len();

    let mut modes: BTreeSet<Mode> = BTreeSet::new();
    for s in snapshots {
        modes.extend(s.field.modes().cloned());
    }
    modes.extend(forcing.modes());

    let mut warnings = Vec::new();
    let mut res_sq = vec![0.0; n];
    let mut sol_sq = vec![0.0; n];
    let exponents: Vec<f64> = (0..).map(|k| rho * (k + 1) as f64 - 1.0).take_while(|&g| g < 0.0).collect();

    for m in &modes {
        let lambda = m.eigenvalue();
        let u: Vec<Complex64> = snapshots.iter().map(|s| s.field.get(m)).collect();
        if u.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            warnings.push(format!("mode {m}: non-finite solution values"));
        }
        let f_sig = forcing.mode_signal(m);
        let f: Vec<Complex64> = times.iter().map(|&t| f_sig.at(t)).collect::<Result<_>>()?;
        let du: Vec<Complex64> = if rho == 1.0 {
            finite_difference(&u, dt)?
        } else {
            // samples of g = t^(1-rho) u; the t = 0 entry is never used
            let mut g = vec![Complex64::default()];
            g.extend(snapshots.iter().map(|s| s.regularized.get(m)));
            let h = TimeSignal::with_leading_power(0.0, dt, g, rho - 1.0)?;
            let d = gl_derivative_corrected(&h, FracOrderParam::derivative(rho)?, &exponents)?;
            d.values[1..].to_vec()
        };
        for k in 0..n {
            let r = du[k] + u[k] * lambda - f[k];
            res_sq[k] += r.norm_sqr();
            sol_sq[k] += u[k].norm_sqr();
        }
    }
    if let Some(k) = res_sq.iter().position(|v| !v.is_finite()) {
        warnings.push(format!("residual not finite at t = {}", times[k]));
    }
    Ok(ResidualReport {
        times,
        residual_l2: res_sq.into_iter().map(f64::sqrt).collect(),
        solution_l2: sol_sq.into_iter().map(f64::sqrt).collect(),
        dt_used: dt,
        expected_order: if rho == 1.0 { 2.0 } else { 1.0 },
        warnings,
    })
}

/// Deviation of `t^(1-rho) u(., t)` from `phi / Gamma(rho)` at decreasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialLimitReport {
    pub probe_times: Vec<f64>,
    pub deviation: Vec<f64>,
    /// `( sum |phi_n|^2 |E_{rho,rho}(-|n|^2 t^rho) - 1/Gamma(rho)|^2 )^(1/2)`,
    /// the deviation of the unforced problem.
    pub homogeneous_closed_form: Vec<f64>,
    /// First index from which the deviation decreases along the probes.
    pub monotone_from: Option<usize>,
    /// Slope of `log deviation` against `log t` over the later half of the
    /// monotone tail.
    pub fitted_exponent: Option<f64>,
}

impl InitialLimitReport {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>14} {:>14} {:>14}\n", "t", "deviation", "closed_form_f0");
        for i in 0..self.probe_times.len() {
            let _ = writeln!(
                s,
                "{:>14.6e} {:>14.6e} {:>14.6e}",
                self.probe_times[i], self.deviation[i], self.homogeneous_closed_form[i]
            );
        }
        s
    }
}

/// `2^-j` for `j = 3..=20`.
pub fn default_probe_times() -> Vec<f64> {
    (3..=20).map(|j| 2f64.powi(-j)).collect()
}

fn log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn initial_limit_check(
    problem: &ProblemSpec,
    probe_times: &[f64],
    quad: &DuhamelQuadrature,
) -> Result<InitialLimitReport> {
    if probe_times.is_empty() {
        return Err(Error::Argument("no probe times".into()));
    }
    if probe_times.windows(2).any(|w| w[1] >= w[0]) || probe_times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Argument("probe times must be positive and strictly decreasing".into()));
    }
    let rho = problem.rho;
    let mut increasing = probe_times.to_vec();
    increasing.reverse();
    let mut snaps = solve(problem, &increasing, quad)?;
    snaps.reverse();

    let target = problem.phi.map(|_, c| c * rgamma(rho));
    let p = MlParams { rho, mu: rho };
    let mut deviation = Vec::with_capacity(snaps.len());
    let mut closed = Vec::with_capacity(snaps.len());
    for s in &snaps {
        let mut d = 0.0;
        for m in s.regularized.modes().chain(target.modes()).collect::<BTreeSet<_>>() {
            d += (s.regularized.get(m) - target.get(m)).norm_sqr();
        }
        deviation.push(d.sqrt());
        let mut c = 0.0;
        for (m, v) in problem.phi.iter() {
            let e = ml_eval(p, -m.eigenvalue() * s.t.powf(rho))?;
            c += v.norm_sqr() * (e - rgamma(rho)).powi(2);
        }
        closed.push(c.sqrt());
    }
    // deviation[i] >= deviation[i+1] from monotone_from on
    let mut start = deviation.len() - 1;
    while start > 0 && deviation[start - 1] >= deviation[start] {
        start -= 1;
    }
    let monotone_from = if deviation.len() - start >= 2 { Some(start) } else { None };
    // fit the smaller half of the tail, closest to the limit
    let fitted_exponent = monotone_from.and_then(|i| {
        let from = i + (deviation.len() - i) / 2;
        let from = from.min(deviation.len() - 2);
        let pts: Vec<(f64, f64)> = probe_times[from..].iter().copied().zip(deviation[from..].iter().copied()).collect();
        log_slope(&pts)
    });
    Ok(InitialLimitReport {
        probe_times: probe_times.to_vec(),
        deviation,
        homogeneous_closed_form: closed,
        monotone_from,
        fitted_exponent,
    })
}

/// Sup-norm changes between successive truncations and their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub t: f64,
    pub band_k_values: Vec<f64>,
    /// `sup_x |u_{K_{i+1}} - u_{K_i}|` on the grid, one per consecutive pair.
    pub snapshot_diffs: Vec<f64>,
    /// Tail bound for each pair from the kernel estimate.
    pub bound_estimates: Vec<f64>,
    pub grid_points_per_axis: usize,
}

impl TruncationReport {
    pub fn all_dominated(&self) -> bool {
        self.snapshot_diffs.iter().zip(&self.bound_estimates).all(|(d, b)| *d <= b * (1.0 + 1e-9) + 1e-300)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:>12} {:>12} {:>14} {:>14}\n", "K_from", "K_to", "sup_diff", "bound");
        for i in 0..self.snapshot_diffs.len() {
            let _ = writeln!(
                s,
                "{:>12} {:>12} {:>14.6e} {:>14.6e}",
                self.band_k_values[i],
                self.band_k_values[i + 1],
                self.snapshot_diffs[i],
                self.bound_estimates[i]
            );
        }
        s
    }
}

fn restrict_forcing(f: &Forcing, k: f64) -> Result<Forcing> {
    Ok(match f {
        Forcing::None => Forcing::None,
        Forcing::Constant { field } => Forcing::Constant { field: field.restrict(k)? },
        Forcing::Sampled { dt, frames } => {
            Forcing::Sampled { dt: *dt, frames: frames.iter().map(|fr| fr.restrict(k)).collect::<Result<_>>()? }
        }
    })
}

/// Bound on `|u_n(t)|` from `|E_{rho,rho}(-s)| <= C / (1 + s^2)`:
/// `C |phi_n| t^(rho-1) / (1 + lambda^2 t^(2 rho)) + C sup|f_n| arctan(lambda t^rho) / (rho lambda)`.
fn mode_bound(c: f64, rho: f64, lambda: f64, t: f64, phi: f64, f_sup: f64) -> f64 {
    let s = lambda * t.powf(rho);
    let hom = c * phi * t.powf(rho - 1.0) / (1.0 + s * s);
    let integral = if lambda == 0.0 { t.powf(rho) / rho } else { s.atan() / (rho * lambda) };
    hom + c * f_sup * integral
}

/// Solve with each band `K` and compare consecutive truncations at time `t`.
pub fn truncation_study(
    problem: &ProblemSpec,
    band_k_values: &[f64],
    t: f64,
    quad: &DuhamelQuadrature,
) -> Result<TruncationReport> {
    if band_k_values.len() < 2 {
        return Err(Error::Argument("need at least two band values".into()));
    }
    if band_k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("band values must be increasing".into()));
    }
    let rho = problem.rho;
    // sup_x E_{1,1}(-s) (1 + s^2) = 1
    let c = if rho == 1.0 { 1.0 } else { bound_constant_m1(rho)?.constant_c };
    let k_max = band_k_values.last().copied().unwrap().min(problem.band_k());
    let m = min_points_per_axis(k_max);

    let mut fields = Vec::with_capacity(band_k_values.len());
    for &k in band_k_values {
        let kk = k.min(problem.band_k());
        let p = ProblemSpec::new(
            rho,
            problem.horizon_t,
            problem.phi.restrict(kk)?,
            restrict_forcing(&problem.forcing, kk)?,
        )?;
        let s = solve(&p, &[t], quad)?.remove(0);
        // lift to the common band so the fields can be subtracted
        fields.push(SpectralField::from_modes(problem.dim_n, k_max, s.field.iter().map(|(m, v)| (m.clone(), *v)))?);
    }

    let modes: BTreeSet<Mode> = problem.active_modes();
    let mut diffs = Vec::new();
    let mut bounds = Vec::new();
    for i in 0..fields.len() - 1 {
        let d = fields[i + 1].add(&fields[i].scale(-1.0))?;
        diffs.push(synthesize(&d, m)?.sup_norm());
        let (lo, hi) = (band_k_values[i], band_k_values[i + 1]);
        let mut b = 0.0;
        for mode in modes.iter().filter(|n| {
            let l = n.eigenvalue();
            l >= lo && l < hi && l < problem.band_k()
        }) {
            let sig = problem.forcing.mode_signal(mode);
            let f_sup = match &sig {
                ModeSignal::Zero => 0.0,
                ModeSignal::Constant(v) => v.norm(),
                ModeSignal::Sampled { values, .. } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            };
            b += mode_bound(c, rho, mode.eigenvalue(), t, problem.phi.get(mode).norm(), f_sup);
        }
        bounds.push(b);
    }
    Ok(TruncationReport {
        t,
        band_k_values: band_k_values.to_vec(),
        snapshot_diffs: diffs,
        bound_estimates: bounds,
        grid_points_per_axis: m,
    })
}

/// Kernel-estimate results for one `(rho, epsilon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSuiteRow {
    pub rho: f64,
    pub epsilon: f64,
    /// Grid-certified constant `C` of the global bound.
    pub c_m1: f64,
    /// `(log10 lambda at the decade start, sup of C' over the decade)`.
    pub c_prime_by_decade: Vec<(i32, f64)>,
    pub c_prime_max: f64,
    pub c_prime_min: f64,
    /// `max / min` of the decade suprema.
    pub decade_variation: f64,
    /// Every `C'` is at most `c_m1`.
    pub uniformly_bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSuiteReport {
    pub rows: Vec<KernelSuiteRow>,
    pub pass: bool,
}

impl KernelSuiteReport {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>6} {:>6} {:>12} {:>12} {:>12} {:>12} {:>6}\n",
            "rho", "eps", "C_m1", "C'_max", "C'_min", "max/min", "ok"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>6}",
                r.rho, r.epsilon, r.c_m1, r.c_prime_max, r.c_prime_min, r.decade_variation, r.uniformly_bounded
            );
        }
        s
    }
}

/// `lambda` decades `10^-3 .. 10^6` with 8 values each.
pub const SUITE_LAMBDA_DECADES: std::ops::Range<i32> = -3..6;
const LAMBDAS_PER_DECADE: usize = 8;

/// `t` on `[1e-3, 10]`, 64 points per decade.
pub fn suite_time_grid() -> Vec<f64> {
    (0..=4 * 64).map(|j| 10f64.powf(-3.0 + j as f64 / 64.0)).collect()
}

/// Sweep the second kernel estimate over a `(lambda, t)` grid and compare its
/// constants with the global bound constant.
pub fn kernel_estimate_suite(rho_values: &[f64], epsilon_values: &[f64]) -> Result<KernelSuiteReport> {
    let t_grid = suite_time_grid();
    let mut rows = Vec::new();
    for &rho in rho_values {
        let c_m1 = bound_constant_m1(rho)?.constant_c;
        for &eps in epsilon_values {
            let mut by_decade = Vec::new();
            for d in SUITE_LAMBDA_DECADES {
                let mut sup: f64 = 0.0;
                for j in 0..LAMBDAS_PER_DECADE {
                    let lambda = 10f64.powf(d as f64 + j as f64 / LAMBDAS_PER_DECADE as f64);
                    sup = sup.max(check_m2(rho, eps, lambda, &t_grid)?.constant_c);
                }
                by_decade.push((d, sup));
            }
            let max = by_decade.iter().map(|p| p.1).fold(0.0, f64::max);
            let min = by_decade.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            rows.push(KernelSuiteRow {
                rho,
                epsilon: eps,
                c_m1,
                c_prime_by_decade: by_decade,
                c_prime_max: max,
                c_prime_min: min,
                decade_variation: max / min,
                uniformly_bounded: max <= c_m1,
            });
        }
    }
    let pass = rows.iter().all(|r| r.uniformly_bounded);
    Ok(KernelSuiteReport { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralField;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let snaps: Vec<SolutionSnapshot> = (1..=16)
            .map(|k| {
                let f = SpectralField::new(2, 9.0).unwrap();
                SolutionSnapshot { t: k as f64 / 16.0, regularized: f.clone(), field: f, grid: None }
            })
            .collect();
        let r = residual_check(&snaps, &Forcing::None, 0.5).unwrap();
        assert!(r.residual_l2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_uniform_times_rejected() {
        let f = SpectralField::new(1, 4.0).unwrap();
        let snaps: Vec<SolutionSnapshot> = [0.1, 0.2, 0.35]
            .iter()
            .map(|&t| SolutionSnapshot { t, field: f.clone(), regularized: f.clone(), grid: None })
            .collect();
        assert!(matches!(residual_check(&snaps, &Forcing::None, 0.5), Err(Error::Grid(_))));
    }

    #[test]
    fn probe_times_must_decrease() {
        let phi = SpectralField::single_mode(1, 4.0, Mode::new([1]), c(1.0)).unwrap();
        let p = ProblemSpec::new(0.5, 1.0, phi, Forcing::None).unwrap();
        let q = DuhamelQuadrature::default();
        assert!(initial_limit_check(&p, &[0.1, 0.2], &q).is_err());
        assert_eq!(default_probe_times().len(), 18);
    }

    #[test]
    fn kernel_suite_excludes_rho_one() {
        assert!(kernel_estimate_suite(&[1.0], &[0.5]).is_err());
    }

    #[test]
    fn mode_bound_limits() {
        // lambda = 0: C |phi| t^(rho-1) + C sup|f| t^rho / rho
        let b = mode_bound(2.0, 0.5, 0.0, 0.25, 1.0, 1.0);
        assert!((b - (2.0 * 2.0 + 2.0 * 0.5 / 0.5)).abs() < 1e-14);
    }
}
