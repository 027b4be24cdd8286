//! Multinomial logistic regression with cross-entropy loss.
//!
//! The model is bias-free: a flat weight vector of length `10 * 784 = 7840`
//! laid out row-major by class, scoring normalized pixels.

use crate::losses::mnist::{MnistData, IMAGE_DIM};
use crate::scalar::Scalar;

pub const NUM_CLASSES: usize = 10;
pub const PARAM_DIM: usize = NUM_CLASSES * IMAGE_DIM;

const PIXEL_SCALE: f64 = 1.0 / 255.0;

fn logits<T: Scalar>(weights: &[T], image: &[u8]) -> [T; NUM_CLASSES] {
    debug_assert_eq!(weights.len(), PARAM_DIM);
    let scale = T::of(PIXEL_SCALE);
    let mut out = [T::zero(); NUM_CLASSES];
    for (k, slot) in out.iter_mut().enumerate() {
        let row = &weights[k * IMAGE_DIM..(k + 1) * IMAGE_DIM];
        let mut acc = T::zero();
        for (w, &p) in row.iter().zip(image) {
            if p != 0 {
                acc += *w * T::of(p as f64);
            }
        }
        *slot = acc * scale;
    }
    out
}

fn softmax<T: Scalar>(logits: &[T; NUM_CLASSES]) -> ([T; NUM_CLASSES], T) {
    let max = logits.iter().fold(logits[0], |m, &v| m.max(v));
    let mut exps = [T::zero(); NUM_CLASSES];
    let mut sum = T::zero();
    for (e, &l) in exps.iter_mut().zip(logits.iter()) {
        *e = (l - max).exp();
        sum += *e;
    }
    let inv = T::one() / sum;
    for e in exps.iter_mut() {
        *e *= inv;
    }
    // log-sum-exp for the stable cross-entropy
    (exps, max + sum.ln())
}

/// Average cross-entropy and its exact gradient over the batch given by
/// `indices`.
pub fn loss_and_grad<T: Scalar>(weights: &[T], data: &MnistData, indices: &[u32]) -> (T, Vec<T>) {
    assert!(!indices.is_empty());
    let mut grad = vec![T::zero(); PARAM_DIM];
    let mut loss = T::zero();
    let inv_batch = T::one() / T::of(indices.len() as f64);
    let scale = T::of(PIXEL_SCALE) * inv_batch;
    for &idx in indices {
        let image = data.image(idx as usize);
        let label = data.label(idx as usize) as usize;
        let l = logits(weights, image);
        let (probs, lse) = softmax(&l);
        loss += (lse - l[label]) * inv_batch;
        for (k, &p) in probs.iter().enumerate() {
            let coeff = if k == label { p - T::one() } else { p } * scale;
            if coeff.is_zero() {
                continue;
            }
            let row = &mut grad[k * IMAGE_DIM..(k + 1) * IMAGE_DIM];
            for (g, &px) in row.iter_mut().zip(image) {
                if px != 0 {
                    *g += coeff * T::of(px as f64);
                }
            }
        }
    }
    (loss, grad)
}

pub fn loss<T: Scalar>(weights: &[T], data: &MnistData, indices: &[u32]) -> T {
    let mut total = T::zero();
    for &idx in indices {
        let image = data.image(idx as usize);
        let label = data.label(idx as usize) as usize;
        let l = logits(weights, image);
        let (_, lse) = softmax(&l);
        total += lse - l[label];
    }
    total / T::of(indices.len() as f64)
}

pub fn predict<T: Scalar>(weights: &[T], image: &[u8]) -> usize {
    let l = logits(weights, image);
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if l[k] > l[best] {
            best = k;
        }
    }
    best
}

/// Fraction of correct argmax predictions over the whole set.
pub fn accuracy<T: Scalar>(weights: &[T], data: &MnistData) -> f64 {
    let correct = (0..data.len())
        .filter(|&i| predict(weights, data.image(i)) == data.label(i) as usize)
        .count();
    correct as f64 / data.len() as f64
}

/// Upper bound on the Hessian spectral norm of the batch loss:
/// `0.5 * mean ||x||^2` over the batch's normalized images.
pub fn curvature_bound(data: &MnistData, indices: &[u32]) -> f64 {
    let mean_sq: f64 = indices
        .iter()
        .map(|&i| {
            data.normalized_image(i as usize)
                .map(|v| v * v)
                .sum::<f64>()
        })
        .sum::<f64>()
        / indices.len() as f64;
    0.5 * mean_sq
}
