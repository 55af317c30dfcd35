//! Per-mode solution of `d_t^rho u + A u = f` on the torus with the initial
//! condition `lim_{t->0} d_t^(rho-1) u = phi`.
//!
//! Each Fourier coefficient evolves independently:
//!
//! `u_n(t) = phi_n K_n(t) + int_0^t f_n(t - xi) K_n(xi) dxi`,
//! `K_n(t) = t^(rho-1) E_{rho,rho}(-|n|^2 t^rho)`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mittag_leffler::{ml_eval, propagator, MlParams};
use crate::spectral::{synthesize, Mode, PhysicalGrid, SpectralField};

/// Time dependence of the source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Forcing {
    None,
    /// The same field at every time.
    Constant {
        field: SpectralField,
    },
    /// Frames at `t_k = k dt`, linearly interpolated in time.
    Sampled {
        dt: f64,
        frames: Vec<SpectralField>,
    },
}

impl Forcing {
    fn fields(&self) -> Vec<&SpectralField> {
        match self {
            Forcing::None => vec![],
            Forcing::Constant { field } => vec![field],
            Forcing::Sampled { frames, .. } => frames.iter().collect(),
        }
    }

    /// The time signal of one coefficient.
    pub fn mode_signal(&self, mode: &Mode) -> ModeSignal {
        match self {
            Forcing::None => ModeSignal::Zero,
            Forcing::Constant { field } => ModeSignal::Constant(field.get(mode)),
            Forcing::Sampled { dt, frames } => {
                let values: Vec<Complex64> = frames.iter().map(|f| f.get(mode)).collect();
                if values.iter().all(|v| *v == Complex64::default()) {
                    ModeSignal::Zero
                } else {
                    ModeSignal::Sampled { dt: *dt, values }
                }
            }
        }
    }

    /// The forcing field at time `t` (interpolated between frames).
    pub fn field_at(&self, dim_n: usize, band_k: f64, t: f64) -> Result<SpectralField> {
        let mut out = SpectralField::new(dim_n, band_k)?;
        for m in self.modes() {
            let v = self.mode_signal(&m).at(t)?;
            out.insert(m, v)?;
        }
        Ok(out)
    }

    /// Every mode stored in any frame.
    pub fn modes(&self) -> BTreeSet<Mode> {
        self.fields().into_iter().flat_map(|f| f.modes().cloned()).collect()
    }
}

/// One coefficient `f_n(t)` of the forcing.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSignal {
    Zero,
    Constant(Complex64),
    /// Samples at `t_k = k dt`.
    Sampled {
        dt: f64,
        values: Vec<Complex64>,
    },
}

impl ModeSignal {
    /// Last time covered by the samples.
    pub fn end(&self) -> f64 {
        match self {
            ModeSignal::Sampled { dt, values } => dt * (values.len().saturating_sub(1)) as f64,
            _ => f64::INFINITY,
        }
    }

    fn check_covers(&self, t: f64) -> Result<()> {
        let end = self.end();
        if t > end * (1.0 + 1e-12) {
            return Err(Error::Coverage(format!("forcing samples end at t = {end}, needed up to {t}")));
        }
        Ok(())
    }

    /// Linear interpolation of the samples.
    pub fn at(&self, t: f64) -> Result<Complex64> {
        match self {
            ModeSignal::Zero => Ok(Complex64::default()),
            ModeSignal::Constant(c) => Ok(*c),
            ModeSignal::Sampled { dt, values } => {
                self.check_covers(t)?;
                if !(t >= 0.0) {
                    return Err(Error::Domain(format!("forcing evaluated at t = {t} < 0")));
                }
                let s = t / dt;
                let k = (s.floor() as usize).min(values.len().saturating_sub(2));
                if values.len() == 1 {
                    return Ok(values[0]);
                }
                let w = (s - k as f64).min(1.0);
                Ok(values[k] * (1.0 - w) + values[k + 1] * w)
            }
        }
    }
}

/// Quadrature rule for the convolution with the singular kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadScheme {
    /// Uniform cells, `f` piecewise linear, exact kernel moments.
    ProductLinear,
    /// Cells `xi_j = t (j/M)^r`, `f E` piecewise linear against exact
    /// moments of `xi^(rho-1)`.
    GradedMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelQuadrature {
    pub scheme: QuadScheme,
    /// Cells per unit time; at least 8 cells are always used.
    pub nodes_per_unit: usize,
    /// Grading exponent `r` of the graded mesh.
    pub grading_exponent: f64,
}

impl Default for DuhamelQuadrature {
    fn default() -> Self {
        Self { scheme: QuadScheme::ProductLinear, nodes_per_unit: 64, grading_exponent: 2.0 }
    }
}

impl DuhamelQuadrature {
    /// Graded mesh with `r = 2 / rho`.
    pub fn graded(rho: f64, nodes_per_unit: usize) -> Self {
        Self { scheme: QuadScheme::GradedMesh, nodes_per_unit, grading_exponent: (2.0 / rho).max(1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_unit < 8 {
            return Err(Error::ParameterDomain(format!("nodes_per_unit = {} must be >= 8", self.nodes_per_unit)));
        }
        if !(self.grading_exponent >= 1.0 && self.grading_exponent.is_finite()) {
            return Err(Error::ParameterDomain(format!("grading exponent {} must be >= 1", self.grading_exponent)));
        }
        Ok(())
    }

    fn cells(&self, t: f64) -> usize {
        ((self.nodes_per_unit as f64 * t).ceil() as usize).max(8)
    }
}

/// `phi_n t^(rho-1) E_{rho,rho}(-lambda t^rho)`.
pub fn homogeneous_mode(phi_n: Complex64, lambda: f64, rho: f64, t: f64) -> Result<Complex64> {
    Ok(phi_n * propagator(rho, lambda, t)?)
}

/// `W(x) = x^rho E_{rho,rho+1}(-lambda x^rho)`, the integral of the kernel
/// over `[0, x]`.
fn kernel_primitive(rho: f64, lambda: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let xr = x.powf(rho);
    Ok(xr * ml_eval(MlParams { rho, mu: rho + 1.0 }, -lambda * xr)?)
}

/// `V(x) = x^(rho+1) E_{rho,rho+2}(-lambda x^rho)`, the integral of `W`.
fn kernel_second_primitive(rho: f64, lambda: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let xr = x.powf(rho);
    Ok(x * xr * ml_eval(MlParams { rho, mu: rho + 2.0 }, -lambda * xr)?)
}

/// Quadrature rule `int_0^t f(t - xi) K(xi) dxi ~ sum_j w_j f(t - xi_j)`.
#[derive(Debug, Clone)]
struct ConvolutionRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `int_0^t K`, used for constant signals.
    total: f64,
}

impl ConvolutionRule {
    fn new(rho: f64, lambda: f64, t: f64, quad: &DuhamelQuadrature) -> Result<Self> {
        let n = quad.cells(t);
        let total = kernel_primitive(rho, lambda, t)?;
        let mut weights = vec![0.0; n + 1];
        let nodes: Vec<f64>;
        match quad.scheme {
            QuadScheme::ProductLinear => {
                let h = t / n as f64;
                nodes = (0..=n).map(|j| if j == n { t } else { j as f64 * h }).collect();
                let w: Vec<f64> = nodes.iter().map(|&x| kernel_primitive(rho, lambda, x)).collect::<Result<_>>()?;
                let v: Vec<f64> =
                    nodes.iter().map(|&x| kernel_second_primitive(rho, lambda, x)).collect::<Result<_>>()?;
                for j in 0..n {
                    let m0 = w[j + 1] - w[j];
                    // int (xi - xi_j) K over the cell
                    let m1 = h * w[j + 1] - (v[j + 1] - v[j]);
                    weights[j] += m0 - m1 / h;
                    weights[j + 1] += m1 / h;
                }
            }
            QuadScheme::GradedMesh => {
                let r = quad.grading_exponent;
                nodes = (0..=n).map(|j| if j == n { t } else { t * (j as f64 / n as f64).powf(r) }).collect();
                let p = MlParams { rho, mu: rho };
                let e: Vec<f64> = nodes.iter().map(|&x| ml_eval(p, -lambda * x.powf(rho))).collect::<Result<_>>()?;
                for j in 0..n {
                    let (a, b) = (nodes[j], nodes[j + 1]);
                    let h = b - a;
                    let m0 = (b.powf(rho) - a.powf(rho)) / rho;
                    let m1 = (b.powf(rho + 1.0) - a.powf(rho + 1.0)) / (rho + 1.0) - a * m0;
                    weights[j] += e[j] * (m0 - m1 / h);
                    weights[j + 1] += e[j + 1] * m1 / h;
                }
            }
        }
        Ok(Self { nodes, weights, total })
    }

    fn apply(&self, f: &ModeSignal, t: f64, scheme: QuadScheme) -> Result<Complex64> {
        match f {
            ModeSignal::Zero => Ok(Complex64::default()),
            // product integration of a constant telescopes to the exact primitive
            ModeSignal::Constant(c) if scheme == QuadScheme::ProductLinear => Ok(c * self.total),
            _ => {
                f.check_covers(t)?;
                let mut acc = Complex64::default();
                for (x, w) in self.nodes.iter().zip(&self.weights) {
                    acc += f.at((t - x).max(0.0))? * *w;
                }
                Ok(acc)
            }
        }
    }
}

/// `int_0^t f_n(t - xi) xi^(rho-1) E_{rho,rho}(-lambda xi^rho) dxi`.
pub fn duhamel_mode(f: &ModeSignal, lambda: f64, rho: f64, t: f64, quad: &DuhamelQuadrature) -> Result<Complex64> {
    MlParams::new(rho, rho)?;
    quad.validate()?;
    check_time(t)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::ParameterDomain(format!("lambda = {lambda} must be >= 0")));
    }
    if *f == ModeSignal::Zero {
        return Ok(Complex64::default());
    }
    f.check_covers(t)?;
    ConvolutionRule::new(rho, lambda, t, quad)?.apply(f, t, quad.scheme)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t}: the solution is only defined for t > 0")));
    }
    Ok(())
}

/// Problem data: order, horizon, initial data and forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim_n: usize,
    pub rho: f64,
    pub horizon_t: f64,
    pub phi: SpectralField,
    pub forcing: Forcing,
}

impl ProblemSpec {
    pub fn new(rho: f64, horizon_t: f64, phi: SpectralField, forcing: Forcing) -> Result<Self> {
        let p = Self { dim_n: phi.dim(), rho, horizon_t, phi, forcing };
        p.validate()?;
        Ok(p)
    }

    pub fn band_k(&self) -> f64 {
        self.phi.band_k()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::ParameterDomain(format!("rho = {} not in (0, 1]", self.rho)));
        }
        if !(self.horizon_t > 0.0 && self.horizon_t.is_finite()) {
            return Err(Error::ParameterDomain(format!("horizon T = {} must be positive", self.horizon_t)));
        }
        if self.phi.dim() != self.dim_n {
            return Err(Error::Validation(format!("phi has dimension {} but dim_n = {}", self.phi.dim(), self.dim_n)));
        }
        for f in self.forcing.fields() {
            if f.dim() != self.dim_n || f.band_k() != self.phi.band_k() {
                return Err(Error::Validation("forcing and phi differ in dimension or band".into()));
            }
        }
        if let Forcing::Sampled { dt, frames } = &self.forcing {
            if !(*dt > 0.0 && dt.is_finite()) {
                return Err(Error::Validation(format!("forcing dt = {dt} must be positive")));
            }
            let end = dt * frames.len().saturating_sub(1) as f64;
            if frames.is_empty() || end < self.horizon_t * (1.0 - 1e-12) {
                return Err(Error::Coverage(format!(
                    "forcing frames end at t = {end}, before the horizon {}",
                    self.horizon_t
                )));
            }
        }
        Ok(())
    }

    /// Modes that can be nonzero in the solution.
    pub fn active_modes(&self) -> BTreeSet<Mode> {
        let mut m: BTreeSet<Mode> = self.phi.modes().cloned().collect();
        m.extend(self.forcing.modes());
        m
    }
}

/// `u(., t)` as coefficients, plus `t^(1-rho) u` and optional grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSnapshot {
    pub t: f64,
    pub field: SpectralField,
    /// `t^(1-rho) u(., t)`, which stays bounded as `t -> 0`.
    pub regularized: SpectralField,
    pub grid: Option<PhysicalGrid>,
}

impl SolutionSnapshot {
    /// Attach samples on an `M^N` grid.
    pub fn with_grid(mut self, grid_m: usize) -> Result<Self> {
        self.grid = Some(synthesize(&self.field, grid_m)?);
        Ok(self)
    }
}

fn check_eval_times(problem: &ProblemSpec, eval_times: &[f64]) -> Result<()> {
    for &t in eval_times {
        check_time(t)?;
        if t > problem.horizon_t * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("t = {t} is past the horizon {}", problem.horizon_t)));
        }
    }
    if eval_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("evaluation times must be strictly increasing".into()));
    }
    Ok(())
}

fn snapshot(problem: &ProblemSpec, t: f64, coeffs: Vec<(Mode, Complex64)>) -> Result<SolutionSnapshot> {
    let field = SpectralField::from_modes(problem.dim_n, problem.band_k(), coeffs)?;
    let s = t.powf(1.0 - problem.rho);
    let regularized = field.map(|_, c| c * s);
    Ok(SolutionSnapshot { t, field, regularized, grid: None })
}

/// Evaluate the series solution at each time.
///
/// Only modes present in `phi` or the forcing are computed; all others are
/// identically zero.
pub fn solve(problem: &ProblemSpec, eval_times: &[f64], quad: &DuhamelQuadrature) -> Result<Vec<SolutionSnapshot>> {
    problem.validate()?;
    quad.validate()?;
    check_eval_times(problem, eval_times)?;
    let rho = problem.rho;
    let modes: Vec<Mode> = problem.active_modes().into_iter().collect();
    let signals: Vec<ModeSignal> = modes.iter().map(|m| problem.forcing.mode_signal(m)).collect();

    // modes sharing |n|^2 share the kernel
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, m) in modes.iter().enumerate() {
        groups.entry(m.norm_sq()).or_default().push(i);
    }

    let mut out = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        let mut coeffs = vec![Complex64::default(); modes.len()];
        for (&nsq, idx) in &groups {
            let lambda = nsq as f64;
            let k = propagator(rho, lambda, t)?;
            let needs_rule = idx.iter().any(|&i| signals[i] != ModeSignal::Zero);
            let rule = if needs_rule { Some(ConvolutionRule::new(rho, lambda, t, quad)?) } else { None };
            for &i in idx {
                let mut v = problem.phi.get(&modes[i]) * k;
                if let Some(r) = &rule {
                    v += r.apply(&signals[i], t, quad.scheme)?;
                }
                coeffs[i] = v;
            }
        }
        out.push(snapshot(problem, t, modes.iter().cloned().zip(coeffs).collect())?);
    }
    Ok(out)
}

/// `(e^x - 1 - x) / x^2`.
fn phi2(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 3..30 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// The `rho = 1` solution through exponentials only:
/// `u_n = phi_n e^{-lambda t} + int_0^t f_n(t - s) e^{-lambda s} ds`.
pub fn solve_classical_limit(
    problem: &ProblemSpec,
    eval_times: &[f64],
    nodes_per_unit: usize,
) -> Result<Vec<SolutionSnapshot>> {
    problem.validate()?;
    if problem.rho != 1.0 {
        return Err(Error::ParameterDomain(format!("classical limit needs rho = 1, got {}", problem.rho)));
    }
    if nodes_per_unit < 8 {
        return Err(Error::ParameterDomain(format!("nodes_per_unit = {nodes_per_unit} must be >= 8")));
    }
    check_eval_times(problem, eval_times)?;
    let modes: Vec<Mode> = problem.active_modes().into_iter().collect();
    let signals: Vec<ModeSignal> = modes.iter().map(|m| problem.forcing.mode_signal(m)).collect();
    let mut out = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        let mut coeffs = Vec::with_capacity(modes.len());
        for (m, f) in modes.iter().zip(&signals) {
            let lambda = m.eigenvalue();
            // W(x) = int_0^x e^{-lambda s} ds, V(x) = int_0^x W
            let w = |x: f64| x * phi1(-lambda * x);
            let v = |x: f64| x * x * phi2(-lambda * x);
            let mut u = problem.phi.get(m) * (-lambda * t).exp();
            match f {
                ModeSignal::Zero => {}
                ModeSignal::Constant(c) => u += c * w(t),
                ModeSignal::Sampled { .. } => {
                    let n = ((nodes_per_unit as f64 * t).ceil() as usize).max(8);
                    let h = t / n as f64;
                    for j in 0..n {
                        let (a, b) = (j as f64 * h, if j + 1 == n { t } else { (j + 1) as f64 * h });
                        let m0 = w(b) - w(a);
                        let m1 = h * w(b) - (v(b) - v(a));
                        let fa = f.at((t - a).max(0.0))?;
                        let fb = f.at((t - b).max(0.0))?;
                        u += fa * (m0 - m1 / h) + fb * (m1 / h);
                    }
                }
            }
            coeffs.push((m.clone(), u));
        }
        out.push(snapshot(problem, t, coeffs)?);
    }
    Ok(out)
}

/// `(e^x - 1) / x`.
fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}
