//! Support reduction preserving a weighted mean.

use crate::error::{Error, Result};
use crate::linalg::null_vector;
use crate::point::norm;

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    /// Indices into the input, in increasing order.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// The null-space step was numerically degenerate; the input support is returned.
    pub degenerate: bool,
}

/// Reduces a convex combination of vectors in ℝ^k to at most k+1 of them with
/// the same weighted mean.
///
/// Each step takes k+2 active points, finds λ ≠ 0 with Σλ_i v_i = 0 and
/// Σλ_i = 0, and moves the weights along −λ until one hits zero.
pub fn caratheodory_reduce(vectors: &[Vec<f64>], weights: &[f64]) -> Result<Reduction> {
    if vectors.len() != weights.len() || vectors.is_empty() {
        return Err(Error::invalid("support and weights must be non-empty and of equal length"));
    }
    let k = vectors[0].len();
    for v in vectors {
        Error::check_dim(k, v.len())?;
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights sum to {total}")));
    }
    let mut w = weights.to_vec();
    let mut active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let original_mean = mean(vectors, weights);
    let scale = vectors.iter().map(|v| norm(v)).fold(1.0, f64::max);

    let fallback = || Reduction {
        indices: (0..weights.len()).filter(|&i| weights[i] > 0.0).collect(),
        weights: weights.iter().copied().filter(|w| *w > 0.0).collect(),
        degenerate: true,
    };

    while active.len() > k + 1 {
        let cols = k + 2;
        let rows = k + 1;
        let pick = &active[..cols];
        let mut a = vec![0.0; rows * cols];
        for (c, &i) in pick.iter().enumerate() {
            for r in 0..k {
                a[r * cols + c] = vectors[i][r];
            }
            a[k * cols + c] = 1.0;
        }
        let Some(mut lambda) = null_vector(&a, rows, cols) else {
            return Ok(fallback());
        };
        if !lambda.iter().any(|l| *l > 1e-12) {
            lambda.iter_mut().for_each(|l| *l = -*l);
        }
        let mut alpha = f64::INFINITY;
        let mut hit = usize::MAX;
        for (c, &i) in pick.iter().enumerate() {
            if lambda[c] > 1e-12 {
                let q = w[i] / lambda[c];
                if q < alpha {
                    alpha = q;
                    hit = c;
                }
            }
        }
        if hit == usize::MAX {
            return Ok(fallback());
        }
        for (c, &i) in pick.iter().enumerate() {
            w[i] = (w[i] - alpha * lambda[c]).max(0.0);
        }
        w[pick[hit]] = 0.0;
        active.retain(|&i| w[i] > 1e-16);
    }
    let total: f64 = active.iter().map(|&i| w[i]).sum();
    let reduced_w: Vec<f64> = active.iter().map(|&i| w[i] / total).collect();
    let reduced_v: Vec<Vec<f64>> = active.iter().map(|&i| vectors[i].clone()).collect();
    let new_mean = mean(&reduced_v, &reduced_w);
    let err = original_mean.iter().zip(&new_mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if err > 1e-10 * scale {
        log::warn!("support reduction drifted the mean by {err:.2e}; keeping the full support");
        return Ok(fallback());
    }
    Ok(Reduction { indices: active, weights: reduced_w, degenerate: false })
}

fn mean(vectors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; vectors[0].len()];
    for (v, w) in vectors.iter().zip(weights) {
        crate::point::axpy(&mut m, *w, v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(vectors: &[Vec<f64>], weights: &[f64], max_len: usize) -> Reduction {
        let r = caratheodory_reduce(vectors, weights).unwrap();
        assert!(!r.degenerate);
        assert!(r.indices.len() <= max_len);
        assert!(r.weights.iter().all(|w| *w >= 0.0));
        let a = mean(vectors, weights);
        let sel: Vec<Vec<f64>> = r.indices.iter().map(|&i| vectors[i].clone()).collect();
        let b = mean(&sel, &r.weights);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9, "{a:?} vs {b:?}");
        }
        r
    }

    #[test]
    fn two_points_unchanged() {
        let r = check(&[vec![0.0], vec![1.0]], &[0.3, 0.7], 2);
        assert_eq!(r.indices, vec![0, 1]);
        assert_eq!(r.weights, vec![0.3, 0.7]);
    }

    #[test]
    fn four_collinear_points() {
        let v = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        check(&v, &[0.1, 0.2, 0.3, 0.4], 2);
    }

    #[test]
    fn square_corners() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        check(&v, &[0.25; 4], 3);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(caratheodory_reduce(&[vec![0.0]], &[0.5]).is_err());
        assert!(caratheodory_reduce(&[vec![0.0], vec![1.0]], &[1.5, -0.5]).is_err());
    }

    proptest! {
        #[test]
        fn random_reductions(k in 1usize..5, n in 1usize..30, seed in prop::collection::vec(0.0f64..1.0, 200)) {
            let vectors: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|j| seed[(i * 7 + j * 3) % 200] * 4.0 - 2.0).collect()).collect();
            let raw: Vec<f64> = (0..n).map(|i| seed[(i * 11 + 5) % 200] + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / s).collect();
            let r = caratheodory_reduce(&vectors, &weights).unwrap();
            prop_assert!(r.indices.len() <= n);
            if !r.degenerate {
                prop_assert!(r.indices.len() <= k + 1);
            }
            let a = mean(&vectors, &weights);
            let sel: Vec<Vec<f64>> = r.indices.iter().map(|&i| vectors[i].clone()).collect();
            let b = mean(&sel, &r.weights);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
