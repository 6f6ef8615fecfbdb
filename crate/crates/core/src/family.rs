//! The `(wn, zeta)` sweep and the families of second-order curves built from it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::second_order::{make_tf, scale_omega, zeta_min, SecondOrderParams};
use crate::tf::RationalTF;
use crate::timing::{omega_n_for, ToleranceBand};

pub const DEFAULT_ZETA_STEP: f64 = 0.05;

/// Time-domain tracking requirement: maximum overshoot, rise time and
/// settling time, settling band, and the upper-bound frequency multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spec {
    pub mp: f64,
    pub tr: f64,
    pub ts: f64,
    pub dev: f64,
    pub wi: u32,
}

impl Spec {
    pub fn new(mp: f64, tr: f64, ts: f64, dev: f64, wi: u32) -> Result<Self> {
        let spec = Spec {
            mp,
            tr,
            ts,
            dev,
            wi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        zeta_min(self.mp)?;
        ToleranceBand::new(self.dev)?;
        for (name, v) in [("tr", self.tr), ("ts", self.ts)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a positive time, got {v}"),
                });
            }
        }
        if self.wi < 1 {
            return Err(Error::InvalidParameter {
                name: "wi",
                reason: "multiplier must be an integer >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn band(&self) -> ToleranceBand {
        ToleranceBand::new(self.dev).expect("validated at construction")
    }
}

/// Ordered `(wn, zeta)` pairs, strictly ascending in damping ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SecondOrderParams>", into = "Vec<SecondOrderParams>")]
pub struct WdTable(Vec<SecondOrderParams>);

impl TryFrom<Vec<SecondOrderParams>> for WdTable {
    type Error = Error;
    fn try_from(pairs: Vec<SecondOrderParams>) -> Result<Self> {
        WdTable::new(pairs)
    }
}

impl From<WdTable> for Vec<SecondOrderParams> {
    fn from(t: WdTable) -> Self {
        t.0
    }
}

impl WdTable {
    pub fn new(pairs: Vec<SecondOrderParams>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyTable);
        }
        if pairs.windows(2).any(|w| w[1].zeta() <= w[0].zeta()) {
            return Err(Error::InvalidParameter {
                name: "wd table",
                reason: "damping ratios must be strictly increasing".into(),
            });
        }
        Ok(WdTable(pairs))
    }

    pub fn pairs(&self) -> &[SecondOrderParams] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes the table as `zeta,omega_n` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zeta,omega_n\n");
        for p in &self.0 {
            writeln!(out, "{},{}", p.zeta(), p.omega_n()).expect("writing to a String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim().eq_ignore_ascii_case("zeta,omega_n") => {}
            Some((_, h)) => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("expected header 'zeta,omega_n', found '{}'", h.trim()),
                })
            }
            None => return Err(Error::EmptyTable),
        }
        let mut pairs = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected 2 columns, found {}",
                    fields.len()
                )));
            }
            let zeta: f64 = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("zeta: {e}")))?;
            let omega_n: f64 = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("omega_n: {e}")))?;
            let p = SecondOrderParams::new(omega_n, zeta).map_err(|e| parse_err(e.to_string()))?;
            if pairs
                .last()
                .is_some_and(|q: &SecondOrderParams| zeta <= q.zeta())
            {
                return Err(parse_err(
                    "damping ratios must be strictly increasing".into(),
                ));
            }
            pairs.push(p);
        }
        WdTable::new(pairs)
    }
}

/// Sweeps the damping ratio from `zeta_min(spec.mp)` in steps of `zeta_step`
/// (strictly below 1) and pairs each value with the natural frequency that
/// meets the rise/settling requirement with equality.
pub fn build_wd(spec: &Spec, zeta_step: f64) -> Result<WdTable> {
    spec.validate()?;
    let z0 = zeta_min(spec.mp)?;
    if !(zeta_step > 0.0 && zeta_step < 1.0 - z0) {
        return Err(Error::InvalidParameter {
            name: "zeta_step",
            reason: format!("must lie in (0, {}), got {zeta_step}", 1.0 - z0),
        });
    }
    let band = spec.band();
    let mut pairs = Vec::new();
    for k in 0.. {
        let zeta = z0 + k as f64 * zeta_step;
        if zeta >= 1.0 {
            break;
        }
        let wn = omega_n_for(zeta, spec.tr, spec.ts, band)?;
        pairs.push(SecondOrderParams::new(wn, zeta)?);
    }
    WdTable::new(pairs)
}

/// Second-order curves of every table entry with natural frequency scaled by `multiplier`.
pub fn family_tfs(table: &WdTable, multiplier: u32) -> Result<Vec<RationalTF>> {
    table
        .pairs()
        .iter()
        .map(|&p| scale_omega(p, multiplier).map(make_tf))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_spec() -> Spec {
        Spec::new(0.15, 5.0, 30.0, 0.03, 5).unwrap()
    }

    #[test]
    fn sweep_counts() {
        let t = build_wd(&example_spec(), 0.05).unwrap();
        assert_eq!(t.len(), 10);
        assert!((t.pairs()[0].zeta() - 0.5170).abs() < 1e-3);
        assert!((t.pairs()[9].zeta() - 0.9670).abs() < 1e-3);

        let t = build_wd(&example_spec(), 0.25).unwrap();
        let z: Vec<f64> = t.pairs().iter().map(|p| p.zeta()).collect();
        assert_eq!(z.len(), 2);
        assert!((z[0] - 0.517).abs() < 1e-3 && (z[1] - 0.767).abs() < 1e-3);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        assert!(Spec::new(1.2, 5.0, 30.0, 0.03, 5).is_err());
        assert!(Spec::new(0.15, 0.0, 30.0, 0.03, 5).is_err());
        assert!(Spec::new(0.15, 5.0, 30.0, 1.5, 5).is_err());
        assert!(Spec::new(0.15, 5.0, 30.0, 0.03, 0).is_err());
        let bad = Spec {
            mp: 1.2,
            ..example_spec()
        };
        assert_eq!(build_wd(&bad, 0.05), Err(Error::InvalidOvershoot(1.2)));
        assert!(build_wd(&example_spec(), 0.6).is_err());
        assert!(build_wd(&example_spec(), 0.0).is_err());
    }

    #[test]
    fn family_members_meet_overshoot() {
        let spec = example_spec();
        let t = build_wd(&spec, 0.05).unwrap();
        for p in t.pairs() {
            assert!(crate::second_order::overshoot(p.zeta()).unwrap() <= spec.mp + 1e-3);
        }
    }

    #[test]
    fn single_pair_family() {
        let p = SecondOrderParams::new(0.5, 0.6).unwrap();
        let t = WdTable::new(vec![p]).unwrap();
        assert_eq!(family_tfs(&t, 1).unwrap(), vec![make_tf(p)]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let t = build_wd(&example_spec(), 0.05).unwrap();
        let back = WdTable::from_csv(&t.to_csv()).unwrap();
        for (a, b) in t.pairs().iter().zip(back.pairs()) {
            assert!((a.zeta() - b.zeta()).abs() < 1e-12);
            assert!((a.omega_n() - b.omega_n()).abs() < 1e-12);
        }
        let err = WdTable::from_csv("zeta,omega_n\n0.5,1.0\n1.5,2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = WdTable::from_csv("zeta,omega_n\n0.5,1.0\nabc,2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = WdTable::from_csv("zeta,omega_n\n0.6,1.0\n0.5,2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(WdTable::from_csv("z,w\n0.5,1\n").is_err());
        assert_eq!(WdTable::from_csv("zeta,omega_n\n"), Err(Error::EmptyTable));
    }

    proptest! {
        #[test]
        fn scaling_commutes_with_construction(wns in prop::collection::vec(0.05f64..5.0, 1..6), i in 1u32..7) {
            let pairs: Vec<SecondOrderParams> = wns.iter().enumerate()
                .map(|(k, &w)| SecondOrderParams::new(w, 0.1 + 0.1 * k as f64).unwrap())
                .collect();
            let table = WdTable::new(pairs.clone()).unwrap();
            let pre = WdTable::new(pairs.iter().map(|p| SecondOrderParams::new(p.omega_n() * i as f64, p.zeta()).unwrap()).collect()).unwrap();
            prop_assert_eq!(family_tfs(&table, i).unwrap(), family_tfs(&pre, 1).unwrap());
        }

        #[test]
        fn csv_round_trip_is_lossless(zs in prop::collection::btree_set(1u32..999, 1..12), w in 0.001f64..1000.0) {
            let pairs: Vec<SecondOrderParams> = zs.iter().map(|&z| SecondOrderParams::new(w * z as f64, z as f64 / 1000.0).unwrap()).collect();
            let t = WdTable::new(pairs).unwrap();
            prop_assert_eq!(WdTable::from_csv(&t.to_csv()).unwrap(), t);
        }
    }
}
