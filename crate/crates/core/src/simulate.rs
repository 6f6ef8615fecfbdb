//! Step-response simulation of arbitrary-order bound transfer functions and
//! extraction of the resulting time-domain parameters.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envelope::BoundPair;
use crate::error::{Error, Result};
use crate::family::Spec;
use crate::tf::{dc_gain, RationalTF};
use crate::timing::{extract_metrics, TimeDomainMetrics, ToleranceBand};

const MAX_EXTENSIONS: usize = 12;
const END_RESIDUAL: f64 = 0.01;

/// Uniformly sampled step response starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub step_size: f64,
}

impl StepTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y\n");
        for (t, y) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{y}").expect("writing to a String");
        }
        out
    }

    pub fn metrics(&self, band: ToleranceBand) -> Result<TimeDomainMetrics> {
        extract_metrics(&self.times, &self.values, band)
    }
}

/// Time-domain parameters measured on the upper and lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalTD {
    pub upper: TimeDomainMetrics,
    pub lower: TimeDomainMetrics,
}

/// Controllable canonical realization `x' = A x + B u`, `y = C x + D u`.
struct Realization {
    // first row of A; the rest is a shifted identity
    a_row: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl Realization {
    fn new(tf: &RationalTF) -> Self {
        let tf = tf.normalized();
        let m = tf.den_degree();
        let a: Vec<f64> = tf.den()[1..].to_vec();
        let mut b = vec![0.0; m + 1 - tf.num().len()];
        b.extend_from_slice(tf.num());
        let d = b[0];
        let c = (0..m).map(|i| b[i + 1] - a[i] * d).collect();
        Realization {
            a_row: a.iter().map(|v| -v).collect(),
            c,
            d,
        }
    }

    // unit step input
    fn deriv(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 + self.a_row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        out[1..].copy_from_slice(&x[..x.len() - 1]);
    }

    fn output(&self, x: &[f64]) -> f64 {
        self.d + self.c.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

fn pole_extent(tf: &RationalTF) -> Result<Option<(f64, f64)>> {
    let poles = tf.poles()?;
    if poles.is_empty() {
        return Ok(None);
    }
    if let Some(p) = poles.iter().find(|p| p.re >= 0.0) {
        return Err(Error::Unstable(format!(
            "pole at {p} is not in the open left half-plane"
        )));
    }
    let fastest = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let slowest_decay = poles.iter().map(|p| -p.re).fold(f64::INFINITY, f64::min);
    Ok(Some((fastest, slowest_decay)))
}

/// Default integration step: `min(0.05 / |fastest pole|, t_end / 1e4)`.
pub fn default_step(tf: &RationalTF, t_end: f64) -> Result<f64> {
    let by_length = t_end / 1e4;
    Ok(match pole_extent(tf)? {
        Some((fastest, _)) => (0.05 / fastest).min(by_length),
        None => by_length,
    })
}

/// Unit step response integrated with the classical fixed-step RK4 scheme.
pub fn step_response(tf: &RationalTF, t_end: f64, step_size: f64) -> Result<StepTrace> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be positive, got {t_end}"),
        });
    }
    if !(step_size > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step_size",
            reason: format!("must be positive, got {step_size}"),
        });
    }
    if let Some((fastest, _)) = pole_extent(tf)? {
        let limit = 0.1 / fastest;
        if step_size > limit {
            return Err(Error::StepTooLarge {
                step: step_size,
                limit,
            });
        }
    }

    let sys = Realization::new(tf);
    let n = sys.c.len();
    let steps = (t_end / step_size - 1e-9).ceil() as usize;
    let h = step_size;
    let mut x = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(sys.output(&x));
    for k in 1..=steps {
        if n > 0 {
            sys.deriv(&x, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            sys.deriv(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            sys.deriv(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            sys.deriv(&tmp, &mut k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        times.push(k as f64 * h);
        values.push(sys.output(&x));
    }
    Ok(StepTrace {
        times,
        values,
        step_size,
    })
}

/// Simulates `tf` over `t_end`, doubling the horizon until the trace settles,
/// and measures it against `band`.
pub fn simulate_settled(
    tf: &RationalTF,
    band: ToleranceBand,
    t_end: f64,
) -> Result<(StepTrace, TimeDomainMetrics)> {
    let dc = dc_gain(tf)?;
    let mut horizon = t_end;
    for _ in 0..MAX_EXTENSIONS {
        let trace = step_response(tf, horizon, default_step(tf, horizon)?)?;
        // a slow tail can look flat relative to its own mean; also require the
        // end of the trace to sit close to the true steady state
        let residual = (trace.values.last().expect("trace has t = 0") - dc).abs();
        if residual > END_RESIDUAL * band.dev() * dc.abs() {
            horizon *= 2.0;
            continue;
        }
        match trace.metrics(band) {
            Ok(m) => return Ok((trace, m)),
            Err(Error::UnsettledTrace) => horizon *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::UnsettledTrace)
}

/// Bound simulations used for the final time-domain parameters.
#[derive(Debug, Clone)]
pub struct BoundTraces {
    pub upper: StepTrace,
    pub lower: StepTrace,
    pub final_td: FinalTD,
}

pub fn simulate_bounds(bounds: &BoundPair, spec: &Spec) -> Result<BoundTraces> {
    let band = spec.band();
    let (upper, mu) = simulate_settled(&bounds.upper, band, 3.0 * spec.ts)?;
    let (lower, ml) = simulate_settled(&bounds.lower, band, 3.0 * spec.ts)?;
    Ok(BoundTraces {
        upper,
        lower,
        final_td: FinalTD {
            upper: mu,
            lower: ml,
        },
    })
}

pub fn final_td(bounds: &BoundPair, spec: &Spec) -> Result<FinalTD> {
    simulate_bounds(bounds, spec).map(|b| b.final_td)
}
