//! Time-domain characteristics of the second-order step response.
//!
//! Rise and settling times of the unit-`wn` system are found by inverse
//! interpolation of the closed-form step response with a 5th-order Newton
//! polynomial. Because `tr` and `ts` scale as `1 / wn` for a fixed damping
//! ratio, the natural frequency meeting a given specification is the ratio of
//! the unit-`wn` time to the required time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::second_order::{check_zeta, step_value, SecondOrderParams};

const INTERP_TOL: f64 = 1e-10;
const INTERP_MAX_ITER: usize = 100;
const REFINE_TOL: f64 = 1e-6;
const MAX_REFINEMENTS: usize = 16;

/// Half-width `dev` of the settling band `1 +/- dev`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBand(f64);

impl ToleranceBand {
    pub fn new(dev: f64) -> Result<Self> {
        if dev > 0.0 && dev < 1.0 {
            Ok(ToleranceBand(dev))
        } else {
            Err(Error::InvalidBand(dev))
        }
    }

    pub fn dev(&self) -> f64 {
        self.0
    }
}

/// Overshoot, 10-90% rise time and settling time measured on a step response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainMetrics {
    pub mp: f64,
    pub tr: f64,
    pub ts: f64,
    pub final_value: f64,
}

/// Solves `p(t) = target` where `p` is the 5th-order Newton forward
/// polynomial through six equally spaced samples.
///
/// The difference table is built from whichever end of the window lies
/// closer to the target (ascending or descending differences) and the
/// normalized abscissa is found by successive substitution.
pub fn newton_inverse_interp(samples: &[(f64, f64); 6], target: f64) -> Result<f64> {
    let h = samples[1].0 - samples[0].0;
    if !(h.is_finite() && h != 0.0) {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "abscissae must be distinct".into(),
        });
    }
    for w in samples.windows(2) {
        if ((w[1].0 - w[0].0) - h).abs() > 1e-9 * h.abs() {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "abscissae must be equally spaced".into(),
            });
        }
    }
    let rising = samples[5].1 > samples[0].1;
    if samples.windows(2).any(|w| {
        if rising {
            w[1].1 <= w[0].1
        } else {
            w[1].1 >= w[0].1
        }
    }) {
        return Err(Error::NotMonotone);
    }
    let (lo, hi) = if rising {
        (samples[0].1, samples[5].1)
    } else {
        (samples[5].1, samples[0].1)
    };
    if !(target >= lo && target <= hi) {
        return Err(Error::NotBracketed { target, lo, hi });
    }

    let j = samples
        .windows(2)
        .position(|w| (target - w[0].1) * (target - w[1].1) <= 0.0)
        .expect("bracketed target lies in some interval");

    let mut ordered = *samples;
    let mut start = j as f64 + (target - samples[j].1) / (samples[j + 1].1 - samples[j].1);
    let mut bracket = (j as f64, j as f64 + 1.0);
    if j >= 3 {
        ordered.reverse();
        start = 5.0 - start;
        bracket = (5.0 - bracket.1, 5.0 - bracket.0);
    }
    let u = solve_forward(&ordered, target, start, bracket)?;
    Ok(ordered[0].0 + u * (ordered[1].0 - ordered[0].0))
}

fn forward_differences(samples: &[(f64, f64); 6]) -> [f64; 6] {
    let mut row: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut diffs = [0.0; 6];
    for d in diffs.iter_mut() {
        *d = row[0];
        row = row.windows(2).map(|w| w[1] - w[0]).collect();
        if row.is_empty() {
            break;
        }
    }
    diffs
}

fn solve_forward(
    samples: &[(f64, f64); 6],
    target: f64,
    start: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let d = forward_differences(samples);
    let higher = |u: f64| {
        // sum_{k=2..5} C(u, k) * delta^k f0
        let mut binom = u;
        let mut acc = 0.0;
        for (k, dk) in d.iter().enumerate().skip(2) {
            binom *= (u - (k as f64 - 1.0)) / k as f64;
            acc += binom * dk;
        }
        acc
    };
    let mut u = start;
    for _ in 0..INTERP_MAX_ITER {
        let next = (target - d[0] - higher(u)) / d[1];
        if !next.is_finite() {
            break;
        }
        let step = (next - u).abs();
        u = next;
        if step < INTERP_TOL {
            return Ok(u);
        }
    }

    // Substitution only contracts while the curvature terms are small next to
    // the first difference; otherwise bisect the same polynomial, which passes
    // through the two samples that bracket the target.
    let residual = |u: f64| d[0] + u * d[1] + higher(u) - target;
    let (mut a, mut b) = bracket;
    let ra = residual(a);
    if !(ra * residual(b) <= 0.0) {
        return Err(Error::Diverged);
    }
    while b - a > INTERP_TOL * 1e-3 {
        let m = 0.5 * (a + b);
        if (residual(m) > 0.0) == (ra > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, level: f64) -> f64 {
    let mut fa = f(a) - level;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m) - level;
        if fm == 0.0 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Locates `f(t) = level` on a segment `[a, b]` where `f` is strictly
/// monotone, refining the sampling until two successive halvings agree.
pub fn solve_crossing<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, level: f64) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    if (fa - level) * (fb - level) > 0.0 {
        return Err(Error::NotBracketed {
            target: level,
            lo: fa.min(fb),
            hi: fa.max(fb),
        });
    }
    let mut prev: Option<f64> = None;
    let mut n = 8usize;
    for _ in 0..MAX_REFINEMENTS {
        let h = (b - a) / n as f64;
        let values: Vec<f64> = (0..=n).map(|k| f(a + k as f64 * h)).collect();
        let j = values
            .windows(2)
            .position(|w| (level - w[0]) * (level - w[1]) <= 0.0)
            .expect("endpoint values bracket the level");
        let first = j.saturating_sub(2).min(n - 5);
        let mut window = [(0.0, 0.0); 6];
        for (k, slot) in window.iter_mut().enumerate() {
            let i = first + k;
            *slot = (a + i as f64 * h, values[i]);
        }
        let t = match newton_inverse_interp(&window, level) {
            Ok(t) if t >= a + j as f64 * h - h * 1e-9 && t <= a + (j + 1) as f64 * h + h * 1e-9 => {
                t
            }
            _ => bisect(f, a + j as f64 * h, a + (j + 1) as f64 * h, level),
        };
        if let Some(p) = prev {
            if (t - p).abs() < REFINE_TOL {
                return Ok(t);
            }
        }
        prev = Some(t);
        n *= 2;
    }
    Err(Error::Diverged)
}

fn unit_params(zeta: f64) -> Result<SecondOrderParams> {
    check_zeta(zeta)?;
    SecondOrderParams::new(1.0, zeta)
}

/// 10%-90% rise time of the step response with `wn = 1`.
pub fn unit_rise_time(zeta: f64) -> Result<f64> {
    let p = unit_params(zeta)?;
    let f = |t: f64| step_value(p, t);
    // the response rises monotonically up to the first peak at pi / wd
    let peak = PI / p.omega_d();
    let t10 = solve_crossing(&f, 0.0, peak, 0.1)?;
    let t90 = solve_crossing(&f, 0.0, peak, 0.9)?;
    Ok(t90 - t10)
}

/// Settling time (last exit from `1 +/- dev`) of the step response with `wn = 1`.
///
/// The response extrema sit at `k pi / wd` with deviation exactly
/// `exp(-zeta k pi / wd)`, so the last lobe leaving the band is known in
/// closed form and only the final crossing needs a numerical solve.
pub fn unit_settling_time(zeta: f64, band: ToleranceBand) -> Result<f64> {
    let p = unit_params(zeta)?;
    let dev = band.dev();
    let wd = p.omega_d();
    let x = (1.0 / dev).ln() * wd / (zeta * PI);
    let k = (x.ceil() - 1.0).max(0.0);
    let a = k * PI / wd;
    let b = (k + 1.0) * PI / wd;
    // f(t_k) - 1 = -(-1)^k exp(...)
    let sign = if (k as u64).is_multiple_of(2) {
        -1.0
    } else {
        1.0
    };
    let f = |t: f64| step_value(p, t);
    solve_crossing(&f, a, b, 1.0 + sign * dev)
}

/// Natural frequency at which the most restrictive of the rise-time and
/// settling-time requirements is met with equality.
pub fn omega_n_for(zeta: f64, tr_spec: f64, ts_spec: f64, band: ToleranceBand) -> Result<f64> {
    if !(tr_spec > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tr",
            reason: format!("rise time must be positive, got {tr_spec}"),
        });
    }
    if !(ts_spec > 0.0) {
        return Err(Error::InvalidParameter {
            name: "ts",
            reason: format!("settling time must be positive, got {ts_spec}"),
        });
    }
    let wn_rise = unit_rise_time(zeta)? / tr_spec;
    let wn_settle = unit_settling_time(zeta, band)? / ts_spec;
    Ok(wn_rise.max(wn_settle))
}

fn first_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let k = values.iter().position(|&y| y >= level)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (y0, y1) = (values[k - 1], values[k]);
    Some(times[k - 1] + (level - y0) / (y1 - y0) * (times[k] - times[k - 1]))
}

/// Measures overshoot, rise time and settling time on a sampled step response.
pub fn extract_metrics(
    times: &[f64],
    values: &[f64],
    band: ToleranceBand,
) -> Result<TimeDomainMetrics> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: "need at least two (t, y) samples of equal length".into(),
        });
    }
    let n = values.len();
    let tail = ((n as f64 * 0.05).ceil() as usize).max(1);
    let final_value = values[n - tail..].iter().sum::<f64>() / tail as f64;
    if !(final_value > 0.0) {
        return Err(Error::DegenerateFinalValue(final_value));
    }
    let width = band.dev() * final_value;
    let settled_from = n - ((n as f64 * 0.1).ceil() as usize).max(1);
    if values[settled_from..]
        .iter()
        .any(|y| (y - final_value).abs() > width)
    {
        return Err(Error::UnsettledTrace);
    }

    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mp = ((peak - final_value) / final_value).max(0.0);

    let t10 = first_crossing(times, values, 0.1 * final_value).ok_or(Error::NoRise)?;
    let t90 = first_crossing(times, values, 0.9 * final_value).ok_or(Error::NoRise)?;

    let ts = match values.iter().rposition(|y| (y - final_value).abs() > width) {
        None => times[0],
        Some(k) => {
            let (y0, y1) = (values[k], values[k + 1]);
            let level = if y0 > final_value {
                final_value + width
            } else {
                final_value - width
            };
            times[k] + (level - y0) / (y1 - y0) * (times[k + 1] - times[k])
        }
    };

    Ok(TimeDomainMetrics {
        mp,
        tr: t90 - t10,
        ts,
        final_value,
    })
}
