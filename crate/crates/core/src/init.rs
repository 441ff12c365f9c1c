//! Orthogonal weight initialization.
//!
//! A seeded Gaussian matrix is orthonormalized by modified Gram-Schmidt in
//! double precision, then cast to the working precision.

use crate::error::{Error, Result};
use crate::rng::{rng_for, standard_normal};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Orthogonal `rows x cols` matrix, deterministic per seed.
/// Satisfies `Q^T Q = I` when `cols <= rows`, `Q Q^T = I` otherwise.
pub fn orthogonal_init<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<Tensor<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "orthogonal_init needs positive dims, got {rows}x{cols}"
        )));
    }
    let tall = cols <= rows;
    let (r, c) = if tall { (rows, cols) } else { (cols, rows) };

    let mut rng = rng_for(seed, 0x6f72_7468); // "orth"
    // column-major storage of the r x c working matrix
    let mut q: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..r).map(|_| standard_normal(&mut rng)).collect())
        .collect();

    for j in 0..c {
        // two MGS passes keep the residual near machine epsilon
        for _ in 0..2 {
            for i in 0..j {
                let proj: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                let qi = q[i].clone();
                for (vj, vi) in q[j].iter_mut().zip(&qi) {
                    *vj -= proj * vi;
                }
            }
        }
        let norm: f64 = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::invalid(
                "degenerate random matrix during orthogonalization".to_string(),
            ));
        }
        for v in &mut q[j] {
            *v /= norm;
        }
    }

    let mut out = vec![T::zero(); rows * cols];
    for (j, col) in q.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            // tall: element (i, j) of rows x cols; wide: transposed
            let idx = if tall { i * cols + j } else { j * cols + i };
            out[idx] = T::from_f64(v);
        }
    }
    Tensor::from_vec(vec![rows, cols], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_residual(q: &Tensor<f64>) -> f64 {
        let (rows, cols) = (q.shape()[0], q.shape()[1]);
        let mut worst = 0.0f64;
        let (n, outer) = if cols <= rows { (cols, false) } else { (rows, true) };
        for i in 0..n {
            for j in 0..n {
                let mut dot = 0.0;
                if outer {
                    for k in 0..cols {
                        dot += q.data()[i * cols + k] * q.data()[j * cols + k];
                    }
                } else {
                    for k in 0..rows {
                        dot += q.data()[k * cols + i] * q.data()[k * cols + j];
                    }
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn one_by_one_is_sign() {
        let q: Tensor<f64> = orthogonal_init(1, 1, 3).unwrap();
        assert!((q.data()[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_is_orthogonal() {
        let q: Tensor<f64> = orthogonal_init(4, 4, 9).unwrap();
        assert!(gram_residual(&q) < 1e-5);
    }

    #[test]
    fn tall_and_wide_satisfy_their_identity() {
        let tall: Tensor<f64> = orthogonal_init(8, 3, 1).unwrap();
        assert!(gram_residual(&tall) < 1e-5);
        let wide: Tensor<f64> = orthogonal_init(3, 8, 1).unwrap();
        assert!(gram_residual(&wide) < 1e-5);
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Tensor<f32> = orthogonal_init(1024, 512, 42).unwrap();
        let b: Tensor<f32> = orthogonal_init(1024, 512, 42).unwrap();
        assert_eq!(a, b);
        let c: Tensor<f32> = orthogonal_init(1024, 512, 43).unwrap();
        assert_ne!(a, c);
    }
}
