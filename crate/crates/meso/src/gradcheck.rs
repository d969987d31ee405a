//! Finite-difference gradient checking support.
//!
//! These helpers only ever call *forward* code, so they stay independent of
//! the backward implementations they are used to verify. Checks should run
//! on `f64` tensors: the layer math is generic over the element type, and
//! central differences at `h = 1e-5` are meaningless in `f32`.

use rand::Rng;

use crate::rng::Stream;
use crate::tensor::{Element, Tensor};

/// Central finite differences of a scalar function at `x`:
/// `g[i] = (f(x + h·e_i) − f(x − h·e_i)) / 2h`.
pub fn central_diff<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Largest elementwise relative error, with an absolute floor of 1e-6 in the
/// denominator so near-zero pairs compare absolutely.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Scalar functional Σ w∘y used to reduce a tensor-valued map for checking:
/// its gradient w.r.t. the map's inputs is exactly `backward(cache, w)`.
pub fn weighted_sum<T: Element>(y: &Tensor<T>, weights: &Tensor<T>) -> f64 {
    assert_eq!(y.shape(), weights.shape(), "cotangent shape mismatch");
    y.data()
        .iter()
        .zip(weights.data())
        .map(|(&a, &b)| (a * b).to_f64().unwrap())
        .sum()
}

/// Uniformly random tensor from a deterministic stream.
pub fn uniform_tensor<T: Element>(shape: &[usize], rng: &mut Stream, lo: f64, hi: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from(rng.gen_range(lo..hi)).unwrap())
        .collect();
    Tensor::from_vec(shape, data).expect("valid shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_of_quadratic() {
        // f(x) = Σ x², gradient 2x
        let x = vec![0.5, -1.25, 2.0];
        let g = central_diff(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5);
        let want: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(max_rel_err(&g, &want) <= 1e-8);
    }
}
