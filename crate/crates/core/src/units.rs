//! dB / dBm conversions.
//!
//! All physical quantities are held in linear SI units internally; dB and
//! dBm appear only at the config and report boundaries.

use crate::scalar::Scalar;

/// dBm to watts: `10^((p - 30) / 10)`.
#[inline]
pub fn dbm_to_watts<T: Scalar>(p_dbm: T) -> T {
    let ten = T::of(10.0);
    ten.powf((p_dbm - T::of(30.0)) / ten)
}

/// Watts to dBm.
#[inline]
pub fn watts_to_dbm<T: Scalar>(w: T) -> T {
    let ten = T::of(10.0);
    ten * w.log10() + T::of(30.0)
}

/// dB to linear ratio: `10^(x / 10)`.
#[inline]
pub fn db_to_linear<T: Scalar>(x_db: T) -> T {
    let ten = T::of(10.0);
    ten.powf(x_db / ten)
}

/// Linear ratio to dB.
#[inline]
pub fn linear_to_db<T: Scalar>(r: T) -> T {
    T::of(10.0) * r.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_anchors() {
        assert_eq!(dbm_to_watts(30.0_f64), 1.0);
        assert!((dbm_to_watts(16.0_f64) - 0.039810717055349734).abs() < 1e-15);
        assert!((dbm_to_watts(0.0_f64) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn db_anchors() {
        assert_eq!(db_to_linear(0.0_f64), 1.0);
        assert_eq!(db_to_linear(10.0_f64), 10.0);
        let v = db_to_linear(-131.4_f64);
        assert!((v - 7.244359600749912e-14).abs() / v < 1e-12);
    }

    #[test]
    fn works_at_f32() {
        assert!((dbm_to_watts(30.0_f32) - 1.0).abs() < 1e-6);
        assert!((db_to_linear(10.0_f32) - 10.0).abs() < 1e-5);
    }

    #[test]
    fn round_trip_wide_range() {
        // r in [1e-20, 1e20]
        for k in -20..=20 {
            for m in [1.0, 2.5, 7.3] {
                let r = m * 10f64.powi(k);
                let back = db_to_linear(linear_to_db(r));
                assert!(
                    ((back - r) / r).abs() < 1e-12,
                    "round trip failed for {r}: {back}"
                );
            }
        }
    }

    #[test]
    fn dbm_watts_round_trip() {
        for p in [-60.0, -10.0, 0.0, 8.0, 16.0, 23.0, 30.0] {
            let back = watts_to_dbm(dbm_to_watts(p));
            assert!((back - p).abs() < 1e-10);
        }
    }
}
