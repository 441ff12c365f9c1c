//! Dense n-dimensional tensor with row-major storage.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::invalid(format!("zero extent in shape {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} implies {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); numel],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; numel],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    /// Matrix product. `self` is `[.., k]` with leading dims flattened to rows,
    /// `rhs` must be a `k x n` matrix; output is `[.., n]`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.ndim() < 1 || rhs.ndim() != 2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let k = *self.shape.last().unwrap();
        if k != rhs.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let m = self.numel() / k;
        let n = rhs.shape[1];
        let mut out = vec![T::zero(); m * n];
        unsafe {
            T::gemm(
                m,
                k,
                n,
                T::one(),
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                n as isize,
                1,
                T::zero(),
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = n;
        Ok(Tensor { shape, data: out })
    }

    /// Broadcast add of a vector over the last axis: `[.., d] + [d]`.
    pub fn add_vec(&self, v: &Self) -> Result<Self> {
        let d = *self.shape.last().unwrap();
        if v.ndim() != 1 || v.shape[0] != d {
            return Err(Error::ShapeMismatch {
                op: "add_vec",
                lhs: self.shape.clone(),
                rhs: v.shape.clone(),
            });
        }
        let mut out = self.clone();
        for row in out.data.chunks_mut(d) {
            for (o, &b) in row.iter_mut().zip(&v.data) {
                *o = *o + b;
            }
        }
        Ok(out)
    }

    fn reduce_axis_shape(&self, axis: usize) -> Result<(Vec<usize>, usize, usize, usize)> {
        if axis >= self.ndim() {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut shape: Vec<usize> = self
            .shape
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &e)| e)
            .collect();
        if shape.is_empty() {
            shape.push(1);
        }
        Ok((shape, outer, len, inner))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let (shape, outer, len, inner) = self.reduce_axis_shape(axis)?;
        let inv = T::one() / T::from_f64(len as f64);
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    out[o * inner + i] = out[o * inner + i] + self.data[base + i];
                }
            }
        }
        for v in &mut out {
            *v = *v * inv;
        }
        Tensor::from_vec(shape, out)
    }

    /// Max over an axis; also returns the winning index along the axis per
    /// output element (used for gradient routing).
    pub fn max_axis(&self, axis: usize) -> Result<(Self, Vec<usize>)> {
        let (shape, outer, len, inner) = self.reduce_axis_shape(axis)?;
        let mut out = vec![T::neg_infinity(); outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    let v = self.data[base + i];
                    if v > out[o * inner + i] {
                        out[o * inner + i] = v;
                        arg[o * inner + i] = l;
                    }
                }
            }
        }
        Ok((Tensor::from_vec(shape, out)?, arg))
    }

    /// Stack equally-shaped tensors along a new leading axis.
    pub fn stack0(parts: &[&Self]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("stack0 of zero tensors"));
        }
        let base = parts[0].shape.clone();
        let mut data = Vec::with_capacity(parts.len() * parts[0].numel());
        for p in parts {
            if p.shape != base {
                return Err(Error::ShapeMismatch {
                    op: "stack0",
                    lhs: base,
                    rhs: p.shape.clone(),
                });
            }
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&base);
        Ok(Tensor { shape, data })
    }

    /// Slice index `i` of the leading axis: `[n, ..] -> [..]`.
    pub fn index0(&self, i: usize) -> Result<Self> {
        if self.ndim() < 2 {
            return Err(Error::invalid(format!(
                "index0 needs ndim >= 2, got shape {:?}",
                self.shape
            )));
        }
        let n = self.shape[0];
        if i >= n {
            return Err(Error::invalid(format!(
                "index {i} out of range for leading extent {n}"
            )));
        }
        let chunk = self.numel() / n;
        Ok(Tensor {
            shape: self.shape[1..].to_vec(),
            data: self.data[i * chunk..(i + 1) * chunk].to_vec(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }
}
