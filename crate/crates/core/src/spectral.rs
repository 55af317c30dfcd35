//! Fourier analysis on the torus `(-pi, pi]^N`.
//!
//! Coefficients follow `g_n = (2 pi)^-N int g(x) e^{-i n.x} dx`, so that
//! `g(x) = sum_n g_n e^{i n.x}`. A band `K` holds the modes with `|n|^2 < K`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point `n` in `Z^N`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mode(pub Vec<i64>);

impl Mode {
    pub fn new(n: impl Into<Vec<i64>>) -> Self {
        Self(n.into())
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|n|^2`, the eigenvalue of `-Laplacian` on `e^{i n.x}`.
    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| c * c).sum()
    }

    pub fn eigenvalue(&self) -> f64 {
        self.norm_sq() as f64
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|&c| -c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn check_dim_band(dim: usize, band_k: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::Argument("dimension must be >= 1".into()));
    }
    if !(band_k > 0.0 && band_k.is_finite()) {
        return Err(Error::Argument(format!("band K = {band_k} must be positive")));
    }
    Ok(())
}

/// All modes with `|n|^2 < band_k`, in lexicographic order.
pub fn band_modes(dim: usize, band_k: f64) -> Result<Vec<Mode>> {
    check_dim_band(dim, band_k)?;
    let r = band_k.sqrt().ceil() as i64;
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        let m = Mode(cur.clone());
        if (m.norm_sq() as f64) < band_k {
            out.push(m);
        }
        let mut a = dim;
        loop {
            if a == 0 {
                out.sort();
                return Ok(out);
            }
            a -= 1;
            if cur[a] < r {
                cur[a] += 1;
                break;
            }
            cur[a] = -r;
        }
    }
}

/// Smallest points-per-axis count that represents band `K` without aliasing.
pub fn min_points_per_axis(band_k: f64) -> usize {
    2 * band_k.sqrt().ceil() as usize + 1
}

/// Band-limited set of Fourier coefficients; absent modes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dim_n: usize,
    band_k: f64,
    coeffs: BTreeMap<Mode, Complex64>,
}

impl SpectralField {
    pub fn new(dim_n: usize, band_k: f64) -> Result<Self> {
        check_dim_band(dim_n, band_k)?;
        Ok(Self { dim_n, band_k, coeffs: BTreeMap::new() })
    }

    pub fn from_modes(dim_n: usize, band_k: f64, modes: impl IntoIterator<Item = (Mode, Complex64)>) -> Result<Self> {
        let mut f = Self::new(dim_n, band_k)?;
        for (m, c) in modes {
            f.insert(m, c)?;
        }
        Ok(f)
    }

    /// The field `c e^{i n.x}`.
    pub fn single_mode(dim_n: usize, band_k: f64, mode: Mode, c: Complex64) -> Result<Self> {
        Self::from_modes(dim_n, band_k, [(mode, c)])
    }

    pub fn dim(&self) -> usize {
        self.dim_n
    }

    pub fn band_k(&self) -> f64 {
        self.band_k
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn in_band(&self, mode: &Mode) -> bool {
        (mode.norm_sq() as f64) < self.band_k
    }

    /// Set `g_n`; the mode must have the field's dimension and lie in the band.
    pub fn insert(&mut self, mode: Mode, c: Complex64) -> Result<()> {
        if mode.dim() != self.dim_n {
            return Err(Error::Argument(format!("mode {mode} does not have dimension {}", self.dim_n)));
        }
        if !self.in_band(&mode) {
            return Err(Error::Argument(format!("mode {mode} has |n|^2 >= K = {}", self.band_k)));
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::Argument(format!("coefficient of {mode} is not finite")));
        }
        self.coeffs.insert(mode, c);
        Ok(())
    }

    pub fn get(&self, mode: &Mode) -> Complex64 {
        self.coeffs.get(mode).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mode, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn modes(&self) -> impl Iterator<Item = &Mode> {
        self.coeffs.keys()
    }

    /// Apply `f` to every stored coefficient.
    pub fn map(&self, f: impl Fn(&Mode, Complex64) -> Complex64) -> Self {
        Self {
            dim_n: self.dim_n,
            band_k: self.band_k,
            coeffs: self.coeffs.iter().map(|(m, &c)| (m.clone(), f(m, c))).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|_, c| c * s)
    }

    /// Modes with `|n|^2 < band_k`, carried with the smaller band.
    pub fn restrict(&self, band_k: f64) -> Result<Self> {
        check_dim_band(self.dim_n, band_k)?;
        let k = band_k.min(self.band_k);
        Ok(Self {
            dim_n: self.dim_n,
            band_k: k,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(m, _)| (m.norm_sq() as f64) < k)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        })
    }

    /// Coefficient-wise sum over the union of stored modes.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim_n != other.dim_n || self.band_k != other.band_k {
            return Err(Error::Argument("fields differ in dimension or band".into()));
        }
        let mut out = self.clone();
        for (m, &c) in &other.coeffs {
            *out.coeffs.entry(m.clone()).or_default() += c;
        }
        Ok(out)
    }

    /// `max_n |g_n - conj(g_{-n})| <= tol`: the field is real-valued.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|(m, &c)| (c - self.get(&m.neg()).conj()).norm() <= tol)
    }

    /// `sum |g_n|^2`, the mean square of the field over the torus.
    pub fn l2_norm_sq(&self) -> f64 {
        neumaier(self.coeffs.values().map(|c| c.norm_sqr()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Serialise as `{"dim_n", "band_k", "coeffs": [[n, [re, im]], ...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FieldDoc::from(self)).expect("field serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FieldDoc = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        doc.try_into()
    }

    /// One row per mode: `n1,...,nN,re,im`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=self.dim_n).map(|i| format!("n{i}")).collect();
        header.extend(["re".into(), "im".into()]);
        w.write_record(&header).expect("in-memory write");
        for (m, c) in &self.coeffs {
            let mut row: Vec<String> = m.0.iter().map(|v| v.to_string()).collect();
            row.push(c.re.to_string());
            row.push(c.im.to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str, band_k: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Validation(e.to_string()))?.clone();
        let dim = headers
            .len()
            .checked_sub(2)
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Validation("field CSV needs columns n1..nN,re,im".into()))?;
        let mut f = Self::new(dim, band_k)?;
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Validation(format!("row {}: {e}", line + 2)))?;
            let bad = |what: &str| Error::Validation(format!("row {}: bad {what}", line + 2));
            let n: Vec<i64> =
                (0..dim).map(|i| rec[i].trim().parse().map_err(|_| bad("mode index"))).collect::<Result<_>>()?;
            let re: f64 = rec[dim].trim().parse().map_err(|_| bad("re"))?;
            let im: f64 = rec[dim + 1].trim().parse().map_err(|_| bad("im"))?;
            f.insert(Mode(n), Complex64::new(re, im))
                .map_err(|e| Error::Validation(format!("row {}: {e}", line + 2)))?;
        }
        Ok(f)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    dim_n: usize,
    band_k: f64,
    coeffs: Vec<(Vec<i64>, [f64; 2])>,
}

impl From<&SpectralField> for FieldDoc {
    fn from(f: &SpectralField) -> Self {
        Self {
            dim_n: f.dim_n,
            band_k: f.band_k,
            coeffs: f.coeffs.iter().map(|(m, c)| (m.0.clone(), [c.re, c.im])).collect(),
        }
    }
}

impl TryFrom<FieldDoc> for SpectralField {
    type Error = Error;
    fn try_from(d: FieldDoc) -> Result<Self> {
        SpectralField::from_modes(
            d.dim_n,
            d.band_k,
            d.coeffs.into_iter().map(|(n, [re, im])| (Mode(n), Complex64::new(re, im))),
        )
        .map_err(|e| Error::Validation(e.to_string()))
    }
}

impl Serialize for SpectralField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = FieldDoc::deserialize(d)?;
        doc.try_into().map_err(serde::de::Error::custom)
    }
}

/// Samples on the uniform grid `x_j = -pi + 2 pi (j + 1) / M` per axis,
/// stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGrid {
    pub dim_n: usize,
    pub points_per_axis: usize,
    pub samples: Vec<Complex64>,
}

impl PhysicalGrid {
    pub fn new(dim_n: usize, points_per_axis: usize, samples: Vec<Complex64>) -> Result<Self> {
        if dim_n == 0 || points_per_axis == 0 {
            return Err(Error::Argument("grid needs N >= 1 and M >= 1".into()));
        }
        let total =
            points_per_axis.checked_pow(dim_n as u32).ok_or_else(|| Error::Argument("grid too large".into()))?;
        if samples.len() != total {
            return Err(Error::Argument(format!("expected {total} samples, got {}", samples.len())));
        }
        Ok(Self { dim_n, points_per_axis, samples })
    }

    /// Sample `g` at every grid point.
    pub fn from_fn(dim_n: usize, points_per_axis: usize, g: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let total = points_per_axis.pow(dim_n as u32);
        let mut x = vec![0.0; dim_n];
        let samples = (0..total)
            .map(|i| {
                for (a, idx) in Self::split_index(i, dim_n, points_per_axis).into_iter().enumerate() {
                    x[a] = Self::coordinate(idx, points_per_axis);
                }
                g(&x)
            })
            .collect();
        Self::new(dim_n, points_per_axis, samples)
    }

    /// Grid coordinate `-pi + 2 pi (j + 1) / M`.
    pub fn coordinate(j: usize, m: usize) -> f64 {
        -PI + 2.0 * PI * (j + 1) as f64 / m as f64
    }

    fn split_index(mut i: usize, dim: usize, m: usize) -> Vec<usize> {
        let mut idx = vec![0; dim];
        for a in (0..dim).rev() {
            idx[a] = i % m;
            i /= m;
        }
        idx
    }

    /// Axis indices of flat sample `i`.
    pub fn indices(&self, i: usize) -> Vec<usize> {
        Self::split_index(i, self.dim_n, self.points_per_axis)
    }

    /// `(2 pi)^-N` times the grid quadrature of `|g|^2`, i.e. the mean square.
    pub fn l2_norm_sq(&self) -> f64 {
        neumaier(self.samples.iter().map(|c| c.norm_sqr())) / self.samples.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `i1,...,iN,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=self.dim_n).map(|i| format!("i{i}")).collect();
        header.extend(["re".into(), "im".into()]);
        w.write_record(&header).expect("in-memory write");
        for (i, c) in self.samples.iter().enumerate() {
            let mut row: Vec<String> = self.indices(i).iter().map(|v| v.to_string()).collect();
            row.push(c.re.to_string());
            row.push(c.im.to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn check_aliasing(m: usize, band_k: f64) -> Result<()> {
    let need = min_points_per_axis(band_k);
    if m < need {
        return Err(Error::Aliasing(format!("{m} points per axis cannot resolve band K = {band_k}; need {need}")));
    }
    Ok(())
}

/// `e^{i n.x_0}` with `x_0 = -pi + 2 pi / M`, computed from the exact
/// rational phase.
fn origin_phase(mode: &Mode, m: usize) -> Complex64 {
    let s: i64 = mode.0.iter().sum();
    let sign = if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let r = s.rem_euclid(m as i64) as f64 / m as f64;
    Complex64::from_polar(sign, 2.0 * PI * r)
}

fn flat_index(mode: &Mode, m: usize) -> usize {
    mode.0.iter().fold(0usize, |acc, &c| acc * m + c.rem_euclid(m as i64) as usize)
}

/// In-place unnormalised N-dimensional DFT.
fn fft_nd(data: &mut [Complex64], dim: usize, m: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(m, direction);
    let mut line = vec![Complex64::default(); m];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for k in 0..m {
                    line[k] = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for k in 0..m {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }
}

/// Fourier coefficients of the grid samples for every mode of the band.
pub fn analyze(grid: &PhysicalGrid, band_k: f64) -> Result<SpectralField> {
    check_dim_band(grid.dim_n, band_k)?;
    let m = grid.points_per_axis;
    check_aliasing(m, band_k)?;
    let mut data = grid.samples.clone();
    fft_nd(&mut data, grid.dim_n, m, FftDirection::Forward);
    let norm = 1.0 / data.len() as f64;
    let mut f = SpectralField::new(grid.dim_n, band_k)?;
    for mode in band_modes(grid.dim_n, band_k)? {
        let c = data[flat_index(&mode, m)] * origin_phase(&mode, m).conj() * norm;
        f.coeffs.insert(mode, c);
    }
    Ok(f)
}

/// Samples of `sum g_n e^{i n.x}` on an `M^N` grid.
pub fn synthesize(field: &SpectralField, grid_m: usize) -> Result<PhysicalGrid> {
    check_aliasing(grid_m, field.band_k)?;
    let total = grid_m.checked_pow(field.dim_n as u32).ok_or_else(|| Error::Argument("grid too large".into()))?;
    let mut data = vec![Complex64::default(); total];
    for (mode, &c) in &field.coeffs {
        data[flat_index(mode, grid_m)] += c * origin_phase(mode, grid_m);
    }
    fft_nd(&mut data, field.dim_n, grid_m, FftDirection::Inverse);
    PhysicalGrid::new(field.dim_n, grid_m, data)
}

/// `A g`: multiply `g_n` by `|n|^2`.
pub fn laplacian_apply(field: &SpectralField) -> SpectralField {
    field.map(|m, c| c * m.eigenvalue())
}

/// `A^tau g`: multiply `g_n` by `|n|^tau`.
///
/// For `tau < 0` the zero mode must vanish.
pub fn frac_power_apply(field: &SpectralField, tau: f64) -> Result<SpectralField> {
    if !tau.is_finite() {
        return Err(Error::Argument(format!("tau = {tau} is not finite")));
    }
    if tau < 0.0 {
        let g0 = field.get(&Mode::zero(field.dim_n));
        if g0 != Complex64::default() {
            return Err(Error::Domain(format!("|n|^{tau} is undefined at n = 0 and g_0 = {g0}")));
        }
    }
    Ok(field.map(|m, c| {
        if m.is_zero() {
            if tau == 0.0 {
                c
            } else {
                Complex64::default()
            }
        } else {
            c * m.eigenvalue().powf(0.5 * tau)
        }
    }))
}

/// Compensated summation in iteration order.
fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `( sum (1 + |n|^2)^a |g_n|^2 )^(1/2)` over the stored modes.
pub fn liouville_norm(field: &SpectralField, a: f64) -> f64 {
    neumaier(field.iter().map(|(m, c)| (1.0 + m.eigenvalue()).powf(a) * c.norm_sqr())).sqrt()
}

/// Weighted energy of one dyadic shell `2^j <= |n|^2 < 2^(j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellEnergy {
    pub j: u32,
    pub lower: f64,
    pub upper: f64,
    pub energy: f64,
}

/// Liouville-class diagnostics of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub dim_n: usize,
    pub a: f64,
    /// `a > N/2`.
    pub condition_holds: bool,
    pub norm: f64,
    /// Weighted energy of `n = 0`, which lies in no dyadic shell.
    pub zero_mode_energy: f64,
    pub shells: Vec<ShellEnergy>,
    /// Least-squares slope of `log2(energy)` against the shell index over
    /// the non-empty shells; negative when the tail decays.
    pub log2_decay_slope: Option<f64>,
}

pub fn membership_report(field: &SpectralField, a: f64, dim_n: usize) -> MembershipReport {
    let mut zero = 0.0;
    let mut shells: Vec<ShellEnergy> = Vec::new();
    let max_sq = field.modes().map(|m| m.norm_sq()).max().unwrap_or(0);
    let mut j = 0u32;
    while max_sq > 0 && (1i64 << j) <= max_sq {
        shells.push(ShellEnergy { j, lower: (1u64 << j) as f64, upper: (1u64 << (j + 1)) as f64, energy: 0.0 });
        j += 1;
    }
    for (m, c) in field.iter() {
        let s = m.norm_sq();
        let e = (1.0 + s as f64).powf(a) * c.norm_sqr();
        if s == 0 {
            zero += e;
        } else {
            let j = 63 - (s as u64).leading_zeros();
            shells[j as usize].energy += e;
        }
    }
    let pts: Vec<(f64, f64)> =
        shells.iter().filter(|s| s.energy > 0.0).map(|s| (s.j as f64, s.energy.log2())).collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    MembershipReport {
        dim_n,
        a,
        condition_holds: a > dim_n as f64 / 2.0,
        norm: liouville_norm(field, a),
        zero_mode_energy: zero,
        shells,
        log2_decay_slope: slope,
    }
}
