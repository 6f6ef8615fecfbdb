//! Rationalization of complex frequency-response samples into a low-order
//! transfer function by linear least squares.
//!
//! For `T(s) = (b0 + ... + bn s^n) / (a0 + ... + am s^m)` with `am = 1`, each
//! sample `T'(j w)` gives one complex equation
//!
//! ```text
//! a0 + a1 s + ... + a(m-1) s^(m-1) - (b0 + ... + bn s^n) / T' = -s^m
//! ```
//!
//! which is split into real and imaginary rows and solved in the
//! least-squares sense.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf::{freq_response, poly_from_roots, unwrap_phase, FrequencyResponse, RationalTF};

pub const DEFAULT_ZERO_TOL: f64 = 1e-3;
const MAX_CONDITION: f64 = 1e12;

/// Per-equation weight applied before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Equations as written, unweighted.
    Uniform,
    /// Each equation scaled by `|T'|`, which turns the residual into
    /// `|den(s) T'(s) - num(s)|`.
    #[default]
    DataMagnitude,
    /// Each equation scaled by `1 / |T'|`.
    InverseDataMagnitude,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub data: FrequencyResponse,
    pub num_degree: usize,
    pub den_degree: usize,
    pub weighting: Weighting,
}

impl FitProblem {
    pub fn new(data: FrequencyResponse, num_degree: usize, den_degree: usize) -> Result<Self> {
        if den_degree < 1 {
            return Err(Error::InvalidParameter {
                name: "poles",
                reason: "at least one pole is required".into(),
            });
        }
        if num_degree > den_degree {
            return Err(Error::InvalidParameter {
                name: "zeros",
                reason: format!("{num_degree} zeros exceed {den_degree} poles"),
            });
        }
        let unknowns = num_degree + den_degree + 1;
        if data.values().len() < unknowns {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("{} samples for {unknowns} unknowns", data.values().len()),
            });
        }
        Ok(FitProblem {
            data,
            num_degree,
            den_degree,
            weighting: Weighting::default(),
        })
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }
}

/// Fitted transfer function together with the least-squares residual of the
/// (normalized, weighted) linear system, relative to the right-hand side norm.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub tf: RationalTF,
    pub residual: f64,
}

pub fn fit(problem: &FitProblem) -> Result<RationalTF> {
    fit_with_residual(problem).map(|o| o.tf)
}

pub fn fit_with_residual(problem: &FitProblem) -> Result<FitOutcome> {
    let (n, m) = (problem.num_degree, problem.den_degree);
    let grid = problem.data.grid();
    let samples = problem.data.values();
    for (w, v) in grid.omegas().iter().zip(samples) {
        if v.norm() == 0.0 {
            return Err(Error::ZeroData(*w));
        }
    }

    // powers of j w / w0 stay O(1) around the middle of a log grid
    let w0 = grid.geometric_mean();
    let cols = m + n + 1;
    let rows = 2 * samples.len();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (k, (&w, &t)) in grid.omegas().iter().zip(samples).enumerate() {
        let s = Complex64::new(0.0, w / w0);
        let inv_t = t.inv();
        let weight = match problem.weighting {
            Weighting::Uniform => 1.0,
            Weighting::DataMagnitude => t.norm(),
            Weighting::InverseDataMagnitude => 1.0 / t.norm(),
        };
        let mut sp = Complex64::new(1.0, 0.0);
        let mut powers = Vec::with_capacity(m + 1);
        for _ in 0..=m {
            powers.push(sp);
            sp *= s;
        }
        let mut put = |col: usize, z: Complex64| {
            a[(2 * k, col)] = weight * z.re;
            a[(2 * k + 1, col)] = weight * z.im;
        };
        for (i, p) in powers.iter().take(m).enumerate() {
            put(i, *p);
        }
        for (i, p) in powers.iter().take(n + 1).enumerate() {
            put(m + i, -inv_t * p);
        }
        let b = -powers[m];
        rhs[2 * k] = weight * b.re;
        rhs[2 * k + 1] = weight * b.im;
    }

    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let norm = a.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, sc) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / sc);
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateFit(cond));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::DegenerateFit(cond))?;
    let residual = (&a * &x - &rhs).norm() / rhs.norm();
    let x: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();

    // coefficients are in powers of s / w0; rescale to s and make den monic
    let mut den: Vec<f64> = (0..=m)
        .map(|i| {
            let ai = if i == m { 1.0 } else { x[i] };
            ai * w0.powi((m - i) as i32)
        })
        .collect();
    let mut num: Vec<f64> = (0..=n)
        .map(|i| x[m + i] * w0.powi((m - i) as i32))
        .collect();
    den.reverse();
    num.reverse();
    Ok(FitOutcome {
        tf: RationalTF::new(num, den)?,
        residual,
    })
}

fn is_insignificant(r: Complex64, scale: f64, zero_tol: f64) -> bool {
    r.re > 0.0 || r.norm() < zero_tol * scale || r.norm() > scale / zero_tol
}

/// Removes right-half-plane roots, roots at (or numerically near) the
/// origin, and zeros far beyond the pole dynamics, then restores the
/// magnitude at `reference_omega`.
///
/// Root magnitudes are judged against the largest pole magnitude: anything
/// below `zero_tol` times it, or above it divided by `zero_tol`, is dropped.
pub fn cleanup(tf: &RationalTF, zero_tol: f64, reference_omega: f64) -> Result<RationalTF> {
    if !(zero_tol > 0.0 && zero_tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "zero_tol",
            reason: format!("must lie in (0,1), got {zero_tol}"),
        });
    }
    let poles = tf.poles()?;
    let zeros = tf.zeros()?;
    if poles.is_empty() {
        return Ok(tf.clone());
    }
    let scale = poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::AllPolesRemoved);
    }
    let keep = |roots: &[Complex64]| -> Vec<Complex64> {
        roots
            .iter()
            .copied()
            .filter(|&r| !is_insignificant(r, scale, zero_tol))
            .collect()
    };
    let kept_poles = keep(&poles);
    let kept_zeros = keep(&zeros);
    if kept_poles.len() == poles.len() && kept_zeros.len() == zeros.len() {
        return Ok(tf.clone());
    }
    if kept_poles.is_empty() {
        return Err(Error::AllPolesRemoved);
    }

    let shape = RationalTF::new(
        poly_from_roots(&kept_zeros, 1.0),
        poly_from_roots(&kept_poles, 1.0),
    )?;
    let s = Complex64::new(0.0, reference_omega);
    let ratio = tf.eval(s) / shape.eval(s);
    let gain = ratio.norm().copysign(ratio.re);
    let num = shape.num().iter().map(|c| c * gain).collect();
    RationalTF::new(num, shape.den().to_vec())
}

/// Scales the numerator so the static gain equals `target_dc`.
pub fn gain_adjust(tf: &RationalTF, target_dc: f64) -> Result<RationalTF> {
    let dc = crate::tf::dc_gain(tf)?;
    if dc == 0.0 {
        return Err(Error::InvalidParameter {
            name: "tf",
            reason: "static gain is zero".into(),
        });
    }
    let factor = target_dc / dc;
    RationalTF::new(
        tf.num().iter().map(|c| c * factor).collect(),
        tf.den().to_vec(),
    )
}

/// Magnitude and phase discrepancies between a fitted transfer function and
/// the data it approximates.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fitted: RationalTF,
    pub omegas: Vec<f64>,
    pub mag_data: Vec<f64>,
    pub mag_fit: Vec<f64>,
    /// `| |T| - |T'| |` per frequency.
    pub mag_error: Vec<f64>,
    pub phase_data_deg: Vec<f64>,
    pub phase_fit_deg: Vec<f64>,
    /// Data phase minus fitted phase, degrees.
    pub phase_error: Vec<f64>,
    pub max_mag_error: f64,
    /// Signed phase error of largest absolute value, degrees.
    pub max_phase_error: f64,
}

impl FitReport {
    /// `omega,mag_data,mag_fit,mag_err,phase_data_deg,phase_fit_deg,phase_err_deg` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "omega,mag_data,mag_fit,mag_err,phase_data_deg,phase_fit_deg,phase_err_deg\n",
        );
        for k in 0..self.omegas.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.omegas[k],
                self.mag_data[k],
                self.mag_fit[k],
                self.mag_error[k],
                self.phase_data_deg[k],
                self.phase_fit_deg[k],
                self.phase_error[k]
            )
            .expect("writing to a String");
        }
        out
    }
}

pub fn report(fitted: &RationalTF, data: &FrequencyResponse) -> Result<FitReport> {
    let model = freq_response(fitted, data.grid())?;
    let mag_data = data.magnitudes();
    let mag_fit = model.magnitudes();
    let phase_data_deg: Vec<f64> =
        unwrap_phase(&data.values().iter().map(|v| v.arg()).collect::<Vec<_>>())
            .into_iter()
            .map(f64::to_degrees)
            .collect();
    let phase_fit_deg = model.phases_deg();
    let mag_error: Vec<f64> = mag_fit
        .iter()
        .zip(&mag_data)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let phase_error: Vec<f64> = phase_data_deg
        .iter()
        .zip(&phase_fit_deg)
        .map(|(d, f)| d - f)
        .collect();
    let max_mag_error = mag_error.iter().cloned().fold(0.0, f64::max);
    let max_phase_error =
        phase_error
            .iter()
            .cloned()
            .fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
    Ok(FitReport {
        fitted: fitted.clone(),
        omegas: data.grid().omegas().to_vec(),
        mag_data,
        mag_fit,
        mag_error,
        phase_data_deg,
        phase_fit_deg,
        phase_error,
        max_mag_error,
        max_phase_error,
    })
}
