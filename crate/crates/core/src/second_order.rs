//! Closed-form machinery for subcritically damped second-order systems
//! `wn^2 / (s^2 + 2 zeta wn s + wn^2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf::RationalTF;

/// Natural frequency and damping ratio of an underdamped second-order system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderParams {
    omega_n: f64,
    zeta: f64,
}

impl SecondOrderParams {
    pub fn new(omega_n: f64, zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        if !(omega_n.is_finite() && omega_n > 0.0) {
            return Err(Error::InvalidNaturalFrequency(omega_n));
        }
        Ok(SecondOrderParams { omega_n, zeta })
    }

    pub fn omega_n(&self) -> f64 {
        self.omega_n
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Damped natural frequency `wn * sqrt(1 - zeta^2)`.
    pub fn omega_d(&self) -> f64 {
        self.omega_n * (1.0 - self.zeta * self.zeta).sqrt()
    }
}

pub(crate) fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDamping(zeta))
    }
}

/// Smallest damping ratio whose step overshoot does not exceed `mp`.
pub fn zeta_min(mp: f64) -> Result<f64> {
    if !(mp > 0.0 && mp < 1.0) {
        return Err(Error::InvalidOvershoot(mp));
    }
    let l = mp.ln() / PI;
    let l2 = l * l;
    Ok((l2 / (1.0 + l2)).sqrt())
}

/// Peak overshoot fraction of the unit step response.
pub fn overshoot(zeta: f64) -> Result<f64> {
    check_zeta(zeta)?;
    Ok((-zeta * PI / (1.0 - zeta * zeta).sqrt()).exp())
}

/// Unit step response at time `t`.
pub fn step_value(params: SecondOrderParams, t: f64) -> f64 {
    let z = params.zeta;
    let root = (1.0 - z * z).sqrt();
    1.0 - (-z * params.omega_n * t).exp() / root * (params.omega_d() * t + z.acos()).sin()
}

pub fn make_tf(params: SecondOrderParams) -> RationalTF {
    let wn = params.omega_n;
    RationalTF::new(vec![wn * wn], vec![1.0, 2.0 * params.zeta * wn, wn * wn])
        .expect("second-order template is always proper")
}

/// Multiplies the natural frequency by an integer factor, keeping the damping.
pub fn scale_omega(params: SecondOrderParams, multiplier: u32) -> Result<SecondOrderParams> {
    if multiplier < 1 {
        return Err(Error::InvalidParameter {
            name: "multiplier",
            reason: "must be at least 1".into(),
        });
    }
    Ok(SecondOrderParams {
        omega_n: params.omega_n * multiplier as f64,
        zeta: params.zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::dc_gain;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zeta_min_examples() {
        assert!((zeta_min(0.15).unwrap() - 0.51696).abs() < 1e-4);
        // the worked-example first member: 0.3486 / (2 sqrt(0.1137))
        let from_coeffs = 0.3486 / (2.0 * 0.1137f64.sqrt());
        assert!((zeta_min(0.15).unwrap() - from_coeffs).abs() < 1e-4);
        assert!(zeta_min(1.0 - 1e-12).unwrap() < 1e-5);
        assert!((zeta_min((-PI).exp()).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(zeta_min(0.0), Err(Error::InvalidOvershoot(0.0)));
        assert_eq!(zeta_min(1.0), Err(Error::InvalidOvershoot(1.0)));
        assert!(zeta_min(1.2).is_err());
    }

    #[test]
    fn overshoot_examples() {
        assert!((overshoot(0.51696).unwrap() - 0.15).abs() < 1e-4);
        assert!((overshoot(1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!((overshoot(std::f64::consts::FRAC_1_SQRT_2).unwrap() - (-PI).exp()).abs() < 1e-12);
        assert!(overshoot(0.0).is_err());
        assert!(overshoot(1.0).is_err());
    }

    #[test]
    fn step_value_examples() {
        let p = SecondOrderParams::new(1.0, 0.51696).unwrap();
        assert!(step_value(p, 0.0).abs() < 1e-15);
        assert!((step_value(p, 200.0) - 1.0).abs() < 1e-12);
        let tp = PI / (1.0 - 0.51696f64.powi(2)).sqrt();
        assert!((tp - 3.670).abs() < 1e-3);
        assert!((step_value(p, tp) - 1.15).abs() < 1e-3);
    }

    #[test]
    fn make_tf_examples() {
        let tf = make_tf(SecondOrderParams::new(0.33719, 0.51692).unwrap());
        assert!(rel(tf.num()[0], 0.1137) < 5e-3);
        assert!(rel(tf.den()[1], 0.3486) < 5e-3);
        assert!(rel(tf.den()[2], 0.1137) < 5e-3);

        let tf = make_tf(SecondOrderParams::new(1.0, 0.5).unwrap());
        assert_eq!(tf.num(), &[1.0]);
        assert_eq!(tf.den(), &[1.0, 1.0, 1.0]);

        let tf = make_tf(SecondOrderParams::new(0.62634, 0.91723).unwrap());
        assert!(rel(tf.num()[0], 0.3923) < 5e-3);
        assert!(rel(tf.den()[1], 1.149) < 5e-3);
    }

    #[test]
    fn scale_omega_examples() {
        let p = SecondOrderParams::new(0.33719, 0.51692).unwrap();
        let q = scale_omega(p, 5).unwrap();
        assert!((q.omega_n() - 1.68595).abs() < 1e-12);
        assert_eq!(q.zeta(), p.zeta());
        let tf = make_tf(q);
        assert!(rel(tf.num()[0], 2.843) < 5e-3);
        assert!(rel(tf.den()[1], 1.743) < 5e-3);

        assert_eq!(scale_omega(p, 1).unwrap(), p);
        assert!(scale_omega(p, 0).is_err());

        let tf =
            make_tf(scale_omega(SecondOrderParams::new(0.73743, 0.96687).unwrap(), 5).unwrap());
        assert!(rel(tf.num()[0], 13.59) < 5e-3);
        assert!(rel(tf.den()[1], 7.13) < 5e-3);
    }

    #[test]
    fn params_validate() {
        assert!(SecondOrderParams::new(1.0, 0.0).is_err());
        assert!(SecondOrderParams::new(1.0, 1.0).is_err());
        assert!(SecondOrderParams::new(0.0, 0.5).is_err());
        assert!(SecondOrderParams::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn zeta_roundtrip_dense_grid() {
        for k in 0..=980 {
            let z = 0.01 + k as f64 * 0.001;
            let back = zeta_min(overshoot(z).unwrap()).unwrap();
            assert!((back - z).abs() < 1e-10, "zeta {z}: {back}");
        }
    }

    proptest! {
        #[test]
        fn time_compression(wn in 0.1f64..10.0, z in 0.02f64..0.98, i in 1u32..8, t in 0.0f64..20.0) {
            let p = SecondOrderParams::new(wn, z).unwrap();
            let q = scale_omega(p, i).unwrap();
            prop_assert!((step_value(q, t) - step_value(p, i as f64 * t)).abs() < 1e-12);
        }

        #[test]
        fn overshoot_decreasing(a in 0.01f64..0.98, d in 1e-4f64..0.01) {
            prop_assert!(overshoot(a + d).unwrap() < overshoot(a).unwrap());
            let mp = overshoot(a).unwrap();
            let mp2 = overshoot(a + d).unwrap();
            prop_assert!(zeta_min(mp2).unwrap() > zeta_min(mp).unwrap());
        }

        #[test]
        fn template_has_unit_dc_and_stable_poles(wn in 0.01f64..100.0, z in 0.01f64..0.99) {
            let tf = make_tf(SecondOrderParams::new(wn, z).unwrap());
            prop_assert_eq!(dc_gain(&tf).unwrap(), 1.0);
            for p in tf.poles().unwrap() {
                prop_assert!(p.re < 0.0);
            }
        }
    }
}
