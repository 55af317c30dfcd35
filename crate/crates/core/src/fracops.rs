//! Fractional integrals and derivatives of uniformly sampled signals.
//!
//! A [`TimeSignal`] stores `g(t_k)` on `t_k = k dt` and represents
//! `h(t) = t^beta g(t)`; `beta` (the leading power) is 0 for ordinary
//! signals and negative for signals with an integrable singularity at
//! `t = 0`, such as `t^(rho-1)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gamma::{gamma, rgamma};

/// Sample types a [`TimeSignal`] can carry (real or complex).
pub trait Sample:
    Copy
    + Default
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_real(x: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl Sample for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Sample for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Uniformly sampled signal `h(t0 + k dt) = t^beta g(t0 + k dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal<T = f64> {
    pub t0: f64,
    pub dt: f64,
    /// Samples of `g`; equal to the samples of `h` when `leading_power == 0`.
    pub values: Vec<T>,
    pub leading_power: f64,
}

impl<T: Sample> TimeSignal<T> {
    pub fn new(t0: f64, dt: f64, values: Vec<T>) -> Result<Self> {
        Self::with_leading_power(t0, dt, values, 0.0)
    }

    pub fn with_leading_power(t0: f64, dt: f64, values: Vec<T>, beta: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt = {dt} must be positive")));
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::Argument(format!("t0 = {t0} must be >= 0")));
        }
        if values.is_empty() {
            return Err(Error::Argument("signal has no samples".into()));
        }
        if !beta.is_finite() {
            return Err(Error::Argument(format!("leading power {beta} is not finite")));
        }
        Ok(Self { t0, dt, values, leading_power: beta })
    }

    /// Sample `f` at `t_k = k dt`, `k = 0..n`.
    pub fn from_fn(dt: f64, n: usize, f: impl Fn(f64) -> T) -> Result<Self> {
        Self::new(0.0, dt, (0..n).map(|k| f(k as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// `h(t_k)`; not finite at `t = 0` when the leading power is negative.
    pub fn sample(&self, k: usize) -> T {
        if self.leading_power == 0.0 {
            self.values[k]
        } else {
            self.values[k] * self.time(k).powf(self.leading_power)
        }
    }

    /// Samples of `h`.
    pub fn to_plain(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.sample(k)).collect()
    }

    fn is_singular(&self) -> bool {
        self.leading_power < 0.0
    }
}

/// Order parameter of a fractional operator.
///
/// Integrals use a negative order `sigma`; derivatives use `rho` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrderParam {
    pub order: f64,
}

impl FracOrderParam {
    pub fn integral(sigma: f64) -> Result<Self> {
        if !(sigma < 0.0 && sigma.is_finite()) {
            return Err(Error::ParameterDomain(format!("integral order {sigma} must be negative")));
        }
        Ok(Self { order: sigma })
    }

    pub fn derivative(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::ParameterDomain(format!("derivative order {rho} not in (0, 1]")));
        }
        Ok(Self { order: rho })
    }
}

fn require_origin<T: Sample>(h: &TimeSignal<T>) -> Result<()> {
    if h.t0 != 0.0 {
        return Err(Error::Unsupported(format!("signals must start at t = 0, got t0 = {}", h.t0)));
    }
    Ok(())
}

/// `sum_{j>=j0} C(p, j) x^j` (even `j` only if asked), for `|x| <= 1/4`.
fn binomial_tail(p: f64, x: f64, j0: usize, even_only: bool) -> f64 {
    let mut c = 1.0;
    let mut xp = 1.0;
    let mut sum = 0.0;
    for j in 1..200 {
        c *= (p - (j - 1) as f64) / j as f64;
        xp *= x;
        if j < j0 || (even_only && j % 2 == 1) {
            continue;
        }
        let t = c * xp;
        sum += t;
        if t.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `(k+1)^p - 2 k^p + (k-1)^p` without cancellation for large `k`.
fn second_difference_pow(p: f64, k: usize) -> f64 {
    let kf = k as f64;
    if k < 4 {
        return (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
    }
    // k^p [ (1+x)^p + (1-x)^p - 2 ],  x = 1/k
    2.0 * kf.powf(p) * binomial_tail(p, 1.0 / kf, 2, true)
}

/// `(m-1)^(a+1) - (m-1-a) m^a`, the weight of the first sample.
fn first_weight(a: f64, m: usize) -> f64 {
    let mf = m as f64;
    if m < 4 {
        return (mf - 1.0).powf(a + 1.0) - (mf - 1.0 - a) * mf.powf(a);
    }
    // m^(a+1) [ (1 - 1/m)^(a+1) - 1 + (a+1)/m ]
    mf.powf(a + 1.0) * binomial_tail(a + 1.0, -1.0 / mf, 2, false)
}

/// Product-trapezoidal fractional integral of order `alpha > 0` of plain
/// samples: exact for piecewise-linear data.
fn product_integral<T: Sample>(values: &[T], dt: f64, alpha: f64) -> Vec<T> {
    let n = values.len();
    let scale = dt.powf(alpha) * rgamma(alpha + 2.0);
    let inner: Vec<f64> = (0..n).map(|k| if k == 0 { 1.0 } else { second_difference_pow(alpha + 1.0, k) }).collect();
    let mut out = vec![T::default(); n];
    for m in 1..n {
        let mut acc = values[0] * first_weight(alpha, m);
        for j in 1..=m {
            acc = acc + values[j] * inner[m - j];
        }
        out[m] = acc * scale;
    }
    out
}

/// Riemann–Liouville fractional integral `(1/Gamma(-sigma)) int_0^t h(xi) (t-xi)^(-sigma-1) dxi`
/// on the sample grid.
///
/// With `h = t^beta g` and `alpha = -sigma`, the part `g(0) t^beta` is
/// integrated in closed form and the remainder `t^beta (g - g(0))`, which
/// vanishes at 0, by product-trapezoidal weights (exact moments of the kernel
/// against the piecewise-linear interpolant). The result is returned as
/// `t^(beta + alpha) G(t)` with `G` smooth when `g` is.
pub fn rl_integral<T: Sample>(h: &TimeSignal<T>, sigma: FracOrderParam) -> Result<TimeSignal<T>> {
    let sigma = FracOrderParam::integral(sigma.order)?.order;
    require_origin(h)?;
    let alpha = -sigma;
    let beta = h.leading_power;
    if beta <= -1.0 {
        return Err(Error::Argument(format!("leading power {beta} is not integrable at t = 0")));
    }
    let g0 = h.values[0];
    let c = g0 * (gamma(beta + 1.0) * rgamma(beta + 1.0 + alpha));
    let rest: Vec<T> =
        (0..h.len()).map(|k| if k == 0 { T::default() } else { (h.values[k] - g0) * h.time(k).powf(beta) }).collect();
    let p = product_integral(&rest, h.dt, alpha);
    let mut beta_out = beta + alpha;
    if beta_out.abs() < 1e-14 {
        // e.g. (rho - 1) + (1 - rho) up to rounding
        beta_out = 0.0;
    }
    let v = (0..h.len()).map(|k| if k == 0 { c } else { c + p[k] * h.time(k).powf(-beta_out) }).collect();
    TimeSignal::with_leading_power(0.0, h.dt, v, beta_out)
}

/// Second-order finite-difference derivative; central inside, one-sided
/// three-point stencils at both ends.
pub fn finite_difference<T: Sample>(v: &[T], dt: f64) -> Result<Vec<T>> {
    let n = v.len();
    if n < 3 {
        return Err(Error::Argument(format!("need at least 3 samples, got {n}")));
    }
    let inv2 = 0.5 / dt;
    let mut d = vec![T::default(); n];
    d[0] = (v[1] * 4.0 - v[0] * 3.0 - v[2]) * inv2;
    for k in 1..n - 1 {
        d[k] = (v[k + 1] - v[k - 1]) * inv2;
    }
    d[n - 1] = (v[n - 1] * 3.0 - v[n - 2] * 4.0 + v[n - 3]) * inv2;
    Ok(d)
}

/// Riemann–Liouville derivative `d/dt I^(1-rho) h`.
///
/// The `t = 0` output sample comes from a one-sided stencil and is not
/// accurate when `h` is singular or non-smooth at the origin.
pub fn rl_derivative<T: Sample>(h: &TimeSignal<T>, rho: FracOrderParam) -> Result<TimeSignal<T>> {
    let rho = FracOrderParam::derivative(rho.order)?.order;
    require_origin(h)?;
    if h.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 samples, got {}", h.len())));
    }
    let j = if rho == 1.0 { h.clone() } else { rl_integral(h, FracOrderParam { order: rho - 1.0 })? };
    let bj = j.leading_power;
    if bj == 0.0 {
        return TimeSignal::new(0.0, h.dt, finite_difference(&j.values, h.dt)?);
    }
    // d/dt [t^b G] = t^(b-1) (b G + t G')
    let dg = finite_difference(&j.values, h.dt)?;
    let v = (0..j.len()).map(|k| j.values[k] * bj + dg[k] * j.time(k)).collect();
    TimeSignal::with_leading_power(0.0, h.dt, v, bj - 1.0)
}

/// Caputo derivative `I^(1-rho) d/dt h` for plain signals.
pub fn caputo_derivative<T: Sample>(h: &TimeSignal<T>, rho: FracOrderParam) -> Result<TimeSignal<T>> {
    let rho = FracOrderParam::derivative(rho.order)?.order;
    require_origin(h)?;
    if h.leading_power != 0.0 {
        return Err(Error::Unsupported("Caputo derivative needs a plain signal".into()));
    }
    let d = TimeSignal::new(0.0, h.dt, finite_difference(&h.values, h.dt)?)?;
    if rho == 1.0 {
        return Ok(d);
    }
    rl_integral(&d, FracOrderParam { order: rho - 1.0 })
}

/// Grünwald–Letnikov weights `w_0 = 1`, `w_j = w_{j-1} (1 - (rho+1)/j)`.
pub fn gl_weights(rho: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut c = 1.0;
    for j in 0..n {
        if j > 0 {
            c *= 1.0 - (rho + 1.0) / j as f64;
        }
        w.push(c);
    }
    w
}

/// Grünwald–Letnikov derivative `dt^-rho sum_{j=0}^m w_j h(t_{m-j})`.
///
/// For singular signals the (infinite) `h(0)` term is left out and the
/// output at `t = 0` is NaN.
pub fn gl_derivative<T: Sample>(h: &TimeSignal<T>, rho: FracOrderParam) -> Result<TimeSignal<T>> {
    gl_derivative_corrected(h, rho, &[])
}

/// Grünwald–Letnikov derivative with starting weights that make it exact on
/// `t^gamma` for each listed exponent (taking `h(0) = 0` for those powers).
///
/// Correcting the negative exponents of a singular expansion
/// `sum c_q t^gamma_q` restores first-order accuracy away from `t = 0`.
pub fn gl_derivative_corrected<T: Sample>(
    h: &TimeSignal<T>,
    rho: FracOrderParam,
    exponents: &[f64],
) -> Result<TimeSignal<T>> {
    let rho = FracOrderParam::derivative(rho.order)?.order;
    require_origin(h)?;
    let n = h.len();
    let q = exponents.len();
    if q >= n {
        return Err(Error::Argument(format!("{q} starting weights need more than {n} samples")));
    }
    for &g in exponents {
        if !(g > -1.0) {
            return Err(Error::Argument(format!("correction exponent {g} must exceed -1")));
        }
    }
    let w = gl_weights(rho, n);
    let x: Vec<T> = (0..n).map(|k| if k == 0 && h.is_singular() { T::default() } else { h.sample(k) }).collect();
    let scale = h.dt.powf(-rho);

    // starting weights s_{m,i}: sum_i s_{m,i} i^g = exact(m) - gl(m) for each g
    let starting = if q > 0 { Some(starting_weights(rho, &w, exponents)?) } else { None };

    let mut out = vec![T::default(); n];
    out[0] = if h.is_singular() { T::from_real(f64::NAN) } else { x[0] * scale };
    for m in 1..n {
        let mut acc = T::default();
        for j in 0..=m {
            acc = acc + x[m - j] * w[j];
        }
        if let Some(s) = &starting {
            for i in 0..q {
                acc = acc + x[i + 1] * s[m][i];
            }
        }
        out[m] = acc * scale;
    }
    TimeSignal::new(0.0, h.dt, out)
}

/// Rows `m = 0..n` of starting weights for the given exponents (unit step).
fn starting_weights(rho: f64, w: &[f64], exponents: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = w.len();
    let q = exponents.len();
    // V[i][c] = (c+1)^gamma_i
    let lu = DMatrix::from_fn(q, q, |i, c| ((c + 1) as f64).powf(exponents[i])).lu();
    if !lu.is_invertible() {
        return Err(Error::Argument("starting-weight system is singular (repeated exponents?)".into()));
    }
    let mut rows = vec![vec![0.0; q]; n];
    let pows: Vec<Vec<f64>> =
        exponents.iter().map(|&g| (0..n).map(|k| if k == 0 { 0.0 } else { (k as f64).powf(g) }).collect()).collect();
    for (m, row) in rows.iter_mut().enumerate().skip(1) {
        let rhs: Vec<f64> = exponents
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let exact = gamma(g + 1.0) * rgamma(g + 1.0 - rho) * (m as f64).powf(g - rho);
                let gl: f64 = (0..m).map(|j| w[j] * pows[i][m - j]).sum();
                exact - gl
            })
            .collect();
        let x = lu.solve(&DVector::from_vec(rhs)).expect("invertible");
        *row = x.iter().copied().collect();
    }
    Ok(rows)
}
