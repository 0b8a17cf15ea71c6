//! Small dense-vector helpers shared by clustering and retrieval.

use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let denom = norm(a) * norm(b);
    if denom == T::zero() {
        T::zero()
    } else {
        dot(a, b) / denom
    }
}

/// Scales `v` to unit length in place. Returns false for a zero vector, which
/// is left untouched.
pub fn l2_normalize<T: Real>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n == T::zero() || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x = *x / n);
    true
}

pub fn mean<T: Real>(vectors: &[&[T]], dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    for v in vectors {
        for (o, &x) in out.iter_mut().zip(v.iter()) {
            *o = *o + x;
        }
    }
    let count = T::from_usize(vectors.len().max(1)).unwrap();
    out.iter_mut().for_each(|x| *x = *x / count);
    out
}
