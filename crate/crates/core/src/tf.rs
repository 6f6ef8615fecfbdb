//! Rational transfer functions, polynomial evaluation, frequency response and roots.
//!
//! Coefficient vectors are stored highest power first throughout the crate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluates a real polynomial at a complex point with Horner's recurrence.
pub fn eval_poly(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn eval_poly_and_derivative(coeffs: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

fn strip_leading_zeros(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    match first {
        Some(i) => coeffs[i..].to_vec(),
        None => vec![0.0],
    }
}

/// Product of two polynomials.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Expands `lead * prod (s - r)` into real coefficients.
///
/// Complex roots are expected to appear in conjugate pairs; the residual
/// imaginary parts of the expansion are discarded.
pub fn poly_from_roots(roots: &[Complex64], lead: f64) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (k, &c) in acc.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re * lead).collect()
}

/// All complex roots of a real polynomial.
///
/// Exact zeros at the origin are deflated first; the remaining roots are the
/// eigenvalues of the companion matrix, polished with a few Newton steps.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let p = strip_leading_zeros(coeffs);
    if p.len() < 2 {
        return Err(Error::NoRoots);
    }
    let mut out = Vec::with_capacity(p.len() - 1);
    let mut end = p.len();
    while end > 1 && p[end - 1] == 0.0 {
        out.push(Complex64::new(0.0, 0.0));
        end -= 1;
    }
    let q = &p[..end];
    let deg = q.len() - 1;
    if deg == 0 {
        return Ok(out);
    }
    if deg == 1 {
        out.push(Complex64::new(-q[1] / q[0], 0.0));
        return Ok(out);
    }

    let lead = q[0];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -q[j + 1] / lead;
    }
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for z in companion.complex_eigenvalues().iter() {
        out.push(polish_root(q, *z));
    }
    Ok(out)
}

fn polish_root(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let mut best = eval_poly(coeffs, z).norm();
    for _ in 0..4 {
        let (p, dp) = eval_poly_and_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let r = eval_poly(coeffs, candidate).norm();
        if r < best {
            best = r;
            z = candidate;
        } else {
            break;
        }
    }
    z
}

/// Unwraps a phase sequence (radians) so that consecutive samples never
/// jump by more than pi. The first sample is kept as the anchor.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phase {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= TAU * ((d - PI) / TAU).ceil();
            } else if d < -PI {
                offset += TAU * ((-d - PI) / TAU).ceil();
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

/// Real-coefficient rational transfer function `num(s) / den(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf", into = "RawTf")]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTf> for RationalTF {
    type Error = Error;
    fn try_from(raw: RawTf) -> Result<Self> {
        RationalTF::new(raw.num, raw.den)
    }
}

impl From<RationalTF> for RawTf {
    fn from(tf: RationalTF) -> Self {
        RawTf {
            num: tf.num,
            den: tf.den,
        }
    }
}

impl RationalTF {
    /// Builds a proper transfer function, stripping leading zero coefficients.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.is_empty() || num.is_empty() {
            return Err(Error::InvalidTransferFunction(
                "coefficient lists must be non-empty".into(),
            ));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction(
                "coefficients must be finite".into(),
            ));
        }
        let num = strip_leading_zeros(&num);
        let den = strip_leading_zeros(&den);
        if den == [0.0] {
            return Err(Error::InvalidTransferFunction(
                "denominator is identically zero".into(),
            ));
        }
        if num.len() > den.len() {
            return Err(Error::InvalidTransferFunction(format!(
                "improper: numerator degree {} exceeds denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(RationalTF { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        eval_poly(&self.num, s) / eval_poly(&self.den, s)
    }

    /// Series connection `self * other`.
    pub fn series(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: strip_leading_zeros(&poly_mul(&self.num, &other.num)),
            den: poly_mul(&self.den, &other.den),
        }
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den_degree() == 0 {
            return Ok(Vec::new());
        }
        roots(&self.den)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num_degree() == 0 {
            return Ok(Vec::new());
        }
        roots(&self.num)
    }

    /// All poles strictly in the open left half-plane.
    pub fn is_stable(&self) -> bool {
        self.poles()
            .map(|p| p.iter().all(|z| z.re < 0.0))
            .unwrap_or(false)
    }

    /// Same transfer function with a monic denominator.
    pub fn normalized(&self) -> RationalTF {
        let lead = self.den[0];
        RationalTF {
            num: self.num.iter().map(|c| c / lead).collect(),
            den: self.den.iter().map(|c| c / lead).collect(),
        }
    }
}

/// Static gain `num(0) / den(0)`.
pub fn dc_gain(tf: &RationalTF) -> Result<f64> {
    let n0 = *tf.num.last().expect("non-empty");
    let d0 = *tf.den.last().expect("non-empty");
    if d0 == 0.0 {
        return Err(Error::PoleAtOrigin);
    }
    Ok(n0 / d0)
}

/// Strictly increasing set of positive angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::InvalidGrid("need at least two frequencies".into()));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidGrid("frequencies must be positive".into()));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid(omegas))
    }

    pub fn omegas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn lowest(&self) -> f64 {
        self.0[0]
    }

    pub fn highest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Geometric mean of the grid frequencies.
    pub fn geometric_mean(&self) -> f64 {
        (self.0.iter().map(|w| w.ln()).sum::<f64>() / self.0.len() as f64).exp()
    }
}

/// Complex samples of a frequency response on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("{} samples for {} frequencies", values.len(), grid.len()),
            });
        }
        Ok(FrequencyResponse { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Unwrapped phase in radians, anchored at the lowest grid frequency.
    pub fn phases(&self) -> Vec<f64> {
        unwrap_phase(&self.values.iter().map(|v| v.arg()).collect::<Vec<_>>())
    }

    pub fn phases_deg(&self) -> Vec<f64> {
        self.phases().into_iter().map(f64::to_degrees).collect()
    }
}

/// Evaluates `tf` at `s = j omega` for every grid frequency.
pub fn freq_response(tf: &RationalTF, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
    let values = grid
        .omegas()
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            let d = eval_poly(&tf.den, s);
            if d == Complex64::new(0.0, 0.0) {
                return Err(Error::PoleOnGrid(w));
            }
            Ok(eval_poly(&tf.num, s) / d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyResponse {
        grid: grid.clone(),
        values,
    })
}
