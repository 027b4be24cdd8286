//! Small vector kernels shared across the simulator.
//!
//! Models, gradients and signals are plain slices; these helpers keep the
//! entrywise and reduction operations in one place with fixed summation
//! order (left to right) for reproducibility.

use num_complex::Complex;

use crate::scalar::Scalar;

pub type Cplx<T> = Complex<T>;

/// Entrywise clamp to `[-bound, bound]`.
pub fn box_clip<T: Scalar>(x: &[T], bound: T) -> Vec<T> {
    x.iter().map(|&v| clamp_sym(v, bound)).collect()
}

#[inline]
pub fn clamp_sym<T: Scalar>(v: T, bound: T) -> T {
    v.min(bound).max(-bound)
}

pub fn l2_norm_sq<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

pub fn l2_norm<T: Scalar>(x: &[T]) -> T {
    l2_norm_sq(x).sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// `a - step * g`.
pub fn step_from<T: Scalar>(a: &[T], g: &[T], step: T) -> Vec<T> {
    debug_assert_eq!(a.len(), g.len());
    a.iter().zip(g).map(|(&x, &d)| x - step * d).collect()
}

/// Mean of N equal-length vectors, accumulated in the given order.
pub fn mean_vectors<T: Scalar>(vs: &[Vec<T>]) -> Vec<T> {
    assert!(!vs.is_empty());
    let d = vs[0].len();
    let mut acc = vec![T::zero(); d];
    for v in vs {
        debug_assert_eq!(v.len(), d);
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let inv = T::one() / T::of(vs.len() as f64);
    for a in acc.iter_mut() {
        *a *= inv;
    }
    acc
}

/// Sum of squared complex moduli, `sum_i |z_i|^2`.
pub fn cnorm_sq<T: Scalar>(z: &[Cplx<T>]) -> T {
    z.iter().map(|c| c.norm_sqr()).sum()
}

pub fn all_finite<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_interior_fixed() {
        assert_eq!(box_clip(&[0.5, -0.2], 1.0), vec![0.5, -0.2]);
    }

    #[test]
    fn clip_saturates() {
        assert_eq!(box_clip(&[12.0, -15.0], 10.0), vec![10.0, -10.0]);
    }

    #[test]
    fn clip_at_f32() {
        assert_eq!(box_clip(&[2.0_f32, -0.25], 1.0), vec![1.0_f32, -0.25]);
    }

    proptest! {
        #[test]
        fn clip_idempotent(x in proptest::collection::vec(-100.0f64..100.0, 1..16), b in 0.01f64..20.0) {
            let once = box_clip(&x, b);
            let twice = box_clip(&once, b);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.iter().all(|v| v.abs() <= b));
        }

        #[test]
        fn clip_nonexpansive(
            a in proptest::collection::vec(-50.0f64..50.0, 4),
            b in proptest::collection::vec(-50.0f64..50.0, 4),
            bound in 0.1f64..10.0,
        ) {
            let ca = box_clip(&a, bound);
            let cb = box_clip(&b, bound);
            prop_assert!(dist(&ca, &cb) <= dist(&a, &b) + 1e-12);
        }
    }
}
