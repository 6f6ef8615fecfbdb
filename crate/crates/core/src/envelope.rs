//! Pointwise envelopes of curve families and the restriction criteria that
//! collapse the families into single lower/upper bound transfer functions.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{family_tfs, WdTable};
use crate::tf::{freq_response, FrequencyGrid, FrequencyResponse, RationalTF};

pub const DEFAULT_W_MIN: f64 = 0.01;
pub const DEFAULT_W_MAX: f64 = 100.0;
pub const DEFAULT_POINTS: usize = 200;

const TIE_RTOL: f64 = 1e-12;

/// Logarithmically spaced grid with both endpoints included.
pub fn make_grid(w_min: f64, w_max: f64, points: usize) -> Result<FrequencyGrid> {
    if !(w_min > 0.0 && w_max > w_min && w_max.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "need 0 < w_min < w_max, got [{w_min}, {w_max}]"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 points, got {points}"
        )));
    }
    let (a, b) = (w_min.log10(), w_max.log10());
    let step = (b - a) / (points - 1) as f64;
    let mut omegas: Vec<f64> = (0..points)
        .map(|k| 10f64.powf(a + k as f64 * step))
        .collect();
    omegas[0] = w_min;
    omegas[points - 1] = w_max;
    FrequencyGrid::new(omegas)
}

pub fn default_grid() -> FrequencyGrid {
    make_grid(DEFAULT_W_MIN, DEFAULT_W_MAX, DEFAULT_POINTS).expect("default grid is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// How magnitude and phase extrema are combined at each frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeRule {
    /// Magnitude and phase extrema are taken independently, possibly from
    /// different member curves.
    #[default]
    Independent,
    /// The phase is taken from the curve attaining the magnitude extremum.
    DominantCurve,
}

/// Magnitude and unwrapped phase (radians) sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCurve {
    grid: FrequencyGrid,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
}

impl EnvelopeCurve {
    pub fn new(grid: FrequencyGrid, magnitude: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if magnitude.len() != grid.len() || phase.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "envelope",
                reason: "magnitude, phase and grid lengths differ".into(),
            });
        }
        if magnitude.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "envelope",
                reason: "magnitudes must be strictly positive".into(),
            });
        }
        Ok(EnvelopeCurve {
            grid,
            magnitude,
            phase,
        })
    }

    pub fn from_response(resp: &FrequencyResponse) -> Result<Self> {
        Self::new(resp.grid().clone(), resp.magnitudes(), resp.phases())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// `omega,mag,phase_deg` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,mag,phase_deg\n");
        for ((w, m), p) in self
            .grid
            .omegas()
            .iter()
            .zip(&self.magnitude)
            .zip(&self.phase)
        {
            writeln!(out, "{},{},{}", w, m, p.to_degrees()).expect("writing to a String");
        }
        out
    }
}

pub fn envelope_of(tfs: &[RationalTF], grid: &FrequencyGrid, side: Side) -> Result<EnvelopeCurve> {
    envelope_with_rule(tfs, grid, side, EnvelopeRule::Independent)
}

/// Pointwise minimum (lower) or maximum (upper) over a family of curves.
pub fn envelope_with_rule(
    tfs: &[RationalTF],
    grid: &FrequencyGrid,
    side: Side,
    rule: EnvelopeRule,
) -> Result<EnvelopeCurve> {
    if tfs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "tfs",
            reason: "envelope of an empty family".into(),
        });
    }
    let curves = tfs
        .iter()
        .map(|tf| freq_response(tf, grid).map(|r| (r.magnitudes(), r.phases())))
        .collect::<Result<Vec<_>>>()?;
    let better = |a: f64, b: f64| match side {
        Side::Lower => a < b,
        Side::Upper => a > b,
    };
    let n = grid.len();
    let mut magnitude = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    for k in 0..n {
        let mut mag_idx = 0;
        let mut ph = curves[0].1[k];
        for (j, (m, p)) in curves.iter().enumerate().skip(1) {
            if better(m[k], curves[mag_idx].0[k]) {
                mag_idx = j;
            }
            if better(p[k], ph) {
                ph = p[k];
            }
        }
        magnitude.push(curves[mag_idx].0[k]);
        phase.push(match rule {
            EnvelopeRule::Independent => ph,
            EnvelopeRule::DominantCurve => curves[mag_idx].1[k],
        });
    }
    EnvelopeCurve::new(grid.clone(), magnitude, phase)
}

/// Recombines an envelope into complex samples `mag * exp(j phase)`.
pub fn complex_envelope(curve: &EnvelopeCurve) -> FrequencyResponse {
    let values = curve
        .magnitude
        .iter()
        .zip(&curve.phase)
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    FrequencyResponse::new(curve.grid.clone(), values).expect("lengths checked at construction")
}

/// Which end of the working band a restriction is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandEnd {
    Low,
    High,
}

/// Criterion used to build a bound pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    LowFreq,
    HighFreq,
    Envelope,
}

impl BoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMode::LowFreq => "low",
            BoundMode::HighFreq => "high",
            BoundMode::Envelope => "envelope",
        }
    }
}

/// Lower and upper frequency-domain bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: RationalTF,
    pub upper: RationalTF,
    pub mode: BoundMode,
}

impl BoundPair {
    pub fn new(lower: RationalTF, upper: RationalTF, mode: BoundMode) -> Result<Self> {
        for (name, tf) in [("lower", &lower), ("upper", &upper)] {
            if !tf.is_stable() {
                return Err(Error::Unstable(format!(
                    "{name} bound has poles outside the open left half-plane"
                )));
            }
        }
        Ok(BoundPair { lower, upper, mode })
    }
}

fn pick(tfs: Vec<RationalTF>, omega: f64, side: Side) -> Result<RationalTF> {
    let s = Complex64::new(0.0, omega);
    let mut best: Option<(f64, RationalTF)> = None;
    for tf in tfs {
        let m = tf.eval(s).norm();
        if !m.is_finite() {
            return Err(Error::PoleOnGrid(omega));
        }
        let replace = match &best {
            None => true,
            Some((b, _)) => {
                let margin = TIE_RTOL * b.abs();
                match side {
                    Side::Lower => m < b - margin,
                    Side::Upper => m > b + margin,
                }
            }
        };
        if replace {
            best = Some((m, tf));
        }
    }
    Ok(best.expect("non-empty table").1)
}

/// Low/high-frequency restriction: the lower bound is the unscaled member of
/// least magnitude and the upper bound the `wi`-scaled member of greatest
/// magnitude, both evaluated at the chosen end of the grid. Ties go to the
/// member with the smaller damping ratio.
pub fn select_restricted(
    table: &WdTable,
    wi: u32,
    grid: &FrequencyGrid,
    end: BandEnd,
) -> Result<BoundPair> {
    let (omega, mode) = match end {
        BandEnd::Low => (grid.lowest(), BoundMode::LowFreq),
        BandEnd::High => (grid.highest(), BoundMode::HighFreq),
    };
    let lower = pick(family_tfs(table, 1)?, omega, Side::Lower)?;
    let upper = pick(family_tfs(table, wi)?, omega, Side::Upper)?;
    BoundPair::new(lower, upper, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::second_order::{make_tf, SecondOrderParams};
    use proptest::prelude::*;

    fn tf(num: &[f64], den: &[f64]) -> RationalTF {
        RationalTF::new(num.to_vec(), den.to_vec()).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(0.01, 100.0, 5).unwrap();
        for (a, b) in g.omegas().iter().zip([0.01, 0.1, 1.0, 10.0, 100.0]) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        assert!(make_grid(1.0, 1.0, 10).is_err());
        assert!(make_grid(0.0, 1.0, 10).is_err());
        assert!(make_grid(0.1, 1.0, 1).is_err());
        let d = default_grid();
        assert_eq!(d.len(), 200);
        assert_eq!((d.lowest(), d.highest()), (0.01, 100.0));
    }

    #[test]
    fn single_member_envelope() {
        let a = tf(&[2.0], &[1.0, 0.7, 2.0]);
        let g = default_grid();
        let r = freq_response(&a, &g).unwrap();
        for side in [Side::Lower, Side::Upper] {
            let e = envelope_of(std::slice::from_ref(&a), &g, side).unwrap();
            assert_eq!(e.magnitude(), r.magnitudes().as_slice());
            assert_eq!(e.phase(), r.phases().as_slice());
            let back = complex_envelope(&e);
            for (x, y) in back.values().iter().zip(r.values()) {
                assert!((x - y).norm() <= 1e-12 * y.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn dominated_member() {
        let big = tf(&[2.0], &[1.0, 1.0]);
        let small = tf(&[1.0], &[1.0, 1.0]);
        let g = default_grid();
        let e = envelope_of(&[big.clone(), small.clone()], &g, Side::Lower).unwrap();
        assert_eq!(
            e.magnitude(),
            freq_response(&small, &g).unwrap().magnitudes().as_slice()
        );
        let e = envelope_of(&[big.clone(), small], &g, Side::Upper).unwrap();
        assert_eq!(
            e.magnitude(),
            freq_response(&big, &g).unwrap().magnitudes().as_slice()
        );
    }

    #[test]
    fn unit_complex_envelope() {
        let g = make_grid(0.1, 10.0, 4).unwrap();
        let e = EnvelopeCurve::new(g, vec![1.0; 4], vec![0.0; 4]).unwrap();
        assert!(complex_envelope(&e)
            .values()
            .iter()
            .all(|v| *v == Complex64::new(1.0, 0.0)));
        assert!(EnvelopeCurve::new(
            make_grid(0.1, 1.0, 2).unwrap(),
            vec![0.0, 1.0],
            vec![0.0, 0.0]
        )
        .is_err());
    }

    #[test]
    fn dominant_curve_rule_takes_matching_phase() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        let b = tf(&[4.0], &[1.0, 0.4, 4.0]);
        let g = default_grid();
        let e = envelope_with_rule(
            &[a.clone(), b.clone()],
            &g,
            Side::Lower,
            EnvelopeRule::DominantCurve,
        )
        .unwrap();
        let ra = freq_response(&a, &g).unwrap();
        let rb = freq_response(&b, &g).unwrap();
        for k in 0..g.len() {
            let expect = if ra.magnitudes()[k] <= rb.magnitudes()[k] {
                ra.phases()[k]
            } else {
                rb.phases()[k]
            };
            assert_eq!(e.phase()[k], expect);
        }
    }

    #[test]
    fn single_member_restriction() {
        let p = SecondOrderParams::new(0.7, 0.6).unwrap();
        let t = WdTable::new(vec![p]).unwrap();
        let b = select_restricted(&t, 1, &default_grid(), BandEnd::Low).unwrap();
        assert_eq!(b.lower, make_tf(p));
        assert_eq!(b.upper, make_tf(p));
        assert_eq!(b.mode, BoundMode::LowFreq);
    }

    #[test]
    fn tie_goes_to_lower_zeta() {
        // identical magnitude everywhere is impossible for distinct zeta, so
        // feed two curves that agree at the evaluation frequency to 1e-15
        let tfs = vec![tf(&[1.0], &[1.0, 1.0]), tf(&[1.0 + 1e-15], &[1.0, 1.0])];
        let chosen = pick(tfs.clone(), 0.01, Side::Upper).unwrap();
        assert_eq!(chosen, tfs[0]);
    }

    #[test]
    fn unstable_bounds_rejected() {
        let good = tf(&[1.0], &[1.0, 1.0]);
        let bad = tf(&[1.0], &[1.0, -1.0]);
        assert!(BoundPair::new(good.clone(), bad, BoundMode::Envelope).is_err());
        assert!(BoundPair::new(good.clone(), good, BoundMode::Envelope).is_ok());
    }

    fn table_strategy() -> impl Strategy<Value = WdTable> {
        prop::collection::vec((0.1f64..5.0, 0.001f64..0.05), 1..8).prop_map(|v| {
            let mut z = 0.05;
            let pairs = v
                .into_iter()
                .map(|(w, dz)| {
                    z += dz;
                    SecondOrderParams::new(w, z).unwrap()
                })
                .collect();
            WdTable::new(pairs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn envelope_bounds_members(table in table_strategy(), i in 1u32..5) {
            let g = make_grid(0.01, 100.0, 60).unwrap();
            let tfs = family_tfs(&table, i).unwrap();
            let lo = envelope_of(&tfs, &g, Side::Lower).unwrap();
            let hi = envelope_of(&tfs, &g, Side::Upper).unwrap();
            for t in &tfs {
                let r = freq_response(t, &g).unwrap();
                for (k, (m, p)) in r.magnitudes().iter().zip(r.phases()).enumerate() {
                    prop_assert!(lo.magnitude()[k] <= *m && hi.magnitude()[k] >= *m);
                    prop_assert!(lo.phase()[k] <= p && hi.phase()[k] >= p);
                }
            }
        }

        #[test]
        fn envelope_idempotent(table in table_strategy()) {
            let g = make_grid(0.01, 100.0, 60).unwrap();
            let tfs = family_tfs(&table, 1).unwrap();
            for side in [Side::Lower, Side::Upper] {
                let e = envelope_of(&tfs, &g, side).unwrap();
                // an envelope given as the only member: rebuild via its complex samples
                let resp = complex_envelope(&e);
                let again = EnvelopeCurve::from_response(&resp).unwrap();
                for k in 0..g.len() {
                    prop_assert!((again.magnitude()[k] - e.magnitude()[k]).abs() <= 1e-12 * e.magnitude()[k]);
                    prop_assert!((again.phase()[k] - e.phase()[k]).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn high_end_lower_has_smallest_wn(table in table_strategy()) {
            let b = select_restricted(&table, 3, &default_grid(), BandEnd::High).unwrap();
            let wn_min = table.pairs().iter().map(|p| p.omega_n()).fold(f64::INFINITY, f64::min);
            let distinct = table.pairs().iter().filter(|p| p.omega_n() < wn_min * 1.01).count() == 1;
            if distinct {
                prop_assert!((b.lower.den()[2] - wn_min * wn_min).abs() <= 1e-12 * wn_min * wn_min);
            }
        }

        #[test]
        fn low_end_follows_second_order_expansion(ws in prop::collection::vec(0.3f64..3.0, 2..6)) {
            let pairs: Vec<SecondOrderParams> = ws.iter().enumerate()
                .map(|(k, &w)| SecondOrderParams::new(w, 0.72 + 0.05 * k as f64).unwrap())
                .collect();
            let table = WdTable::new(pairs.clone()).unwrap();
            let score: Vec<f64> = pairs.iter().map(|p| (4.0 * p.zeta().powi(2) - 2.0) / p.omega_n().powi(2)).collect();
            let mut sorted = score.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assume!(sorted[0] - sorted[1] > 0.02 * sorted[0].abs());
            let best = score.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            let b = select_restricted(&table, 1, &default_grid(), BandEnd::Low).unwrap();
            prop_assert_eq!(b.lower, make_tf(pairs[best]));
            // brute force at the lowest grid frequency
            let s = Complex64::new(0.0, default_grid().lowest());
            let brute = pairs.iter().enumerate()
                .min_by(|a, b| make_tf(*a.1).eval(s).norm().partial_cmp(&make_tf(*b.1).eval(s).norm()).unwrap())
                .unwrap().0;
            prop_assert_eq!(brute, best);
        }
    }
}
