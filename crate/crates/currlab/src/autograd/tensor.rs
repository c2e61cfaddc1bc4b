//! Dense row-major `f64` tensors.
//!
//! Everything in this crate is desk-scale, so the representation is the
//! simplest thing that works: a shape vector plus a flat `Vec<f64>`. Scalars
//! are tensors of shape `[1]`. Shape *checking* with recoverable errors lives
//! in the graph layer; the methods here assert, because by the time a tensor
//! operation runs the graph has already validated the operands.

/// A dense tensor of `f64` values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and a flat row-major buffer.
    ///
    /// Panics if the buffer length does not match the shape's element count.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "tensor shape {:?} needs {} elements, got {}",
            shape,
            numel,
            data.len()
        );
        Tensor { shape, data }
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    /// Tensor of the given shape with every entry set to `value`.
    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; numel],
        }
    }

    /// A scalar, represented as shape `[1]`.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// True when the tensor holds exactly one element.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a scalar tensor. Panics on non-scalars.
    pub fn scalar_value(&self) -> f64 {
        assert!(
            self.is_scalar(),
            "scalar_value on tensor of shape {:?}",
            self.shape
        );
        self.data[0]
    }

    /// Interprets the tensor as a matrix, returning `(rows, cols)`.
    ///
    /// Panics unless the tensor is 2-D.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "expected 2-D, got {:?}", self.shape);
        (self.shape[0], self.shape[1])
    }

    /// Euclidean (l2) norm over all entries.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// True when every entry is finite (no NaN, no ±inf).
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Elementwise map into a new tensor of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(
            self.shape, other.shape,
            "zip_map shapes differ: {:?} vs {:?}",
            self.shape, other.shape
        );
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Matrix product of two 2-D tensors, `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (m, k) = self.dims2();
        let (k2, n) = other.dims2();
        assert_eq!(k, k2, "matmul inner dims differ: {} vs {}", k, k2);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[p * n..(p + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Tensor::from_vec(vec![m, n], out)
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose2(&self) -> Tensor {
        let (m, n) = self.dims2();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::from_vec(vec![n, m], out)
    }

    /// Adds a length-`n` row vector to every row of an `[m,n]` matrix.
    pub fn add_row_vec(&self, row: &Tensor) -> Tensor {
        let (m, n) = self.dims2();
        assert_eq!(row.shape, vec![n], "row vector shape {:?}", row.shape);
        let mut out = self.data.clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += row.data[j];
            }
        }
        Tensor::from_vec(vec![m, n], out)
    }

    /// Column sums of an `[m,n]` matrix, producing a length-`n` vector.
    pub fn col_sum(&self) -> Tensor {
        let (m, n) = self.dims2();
        let mut out = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                out[j] += self.data[i * n + j];
            }
        }
        Tensor::from_vec(vec![n], out)
    }

    /// Scales row `i` of an `[m,n]` matrix by `scale[i]`.
    pub fn row_scale(&self, scale: &Tensor) -> Tensor {
        let (m, n) = self.dims2();
        assert_eq!(scale.shape, vec![m], "row scale shape {:?}", scale.shape);
        let mut out = self.data.clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] *= scale.data[i];
            }
        }
        Tensor::from_vec(vec![m, n], out)
    }

    /// Sum of all entries as a scalar tensor.
    pub fn sum(&self) -> Tensor {
        Tensor::scalar(self.data.iter().sum())
    }

    /// Mean of all entries as a scalar tensor.
    pub fn mean(&self) -> Tensor {
        Tensor::scalar(self.data.iter().sum::<f64>() / self.data.len() as f64)
    }

    /// Dot product of two same-length 1-D tensors as a scalar tensor.
    pub fn dot(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape.len(), 1, "dot expects 1-D, got {:?}", self.shape);
        assert_eq!(
            self.shape, other.shape,
            "dot shapes differ: {:?} vs {:?}",
            self.shape, other.shape
        );
        Tensor::scalar(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Same data viewed under a new shape with the same element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Tensor {
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Repeats a scalar into the given shape.
    pub fn broadcast_scalar(&self, shape: Vec<usize>) -> Tensor {
        Tensor::filled(shape, self.scalar_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_2x3_3x2() {
        let a = Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.shape(), &[2, 2]);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let a = Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.transpose2().transpose2(), a);
        assert_eq!(a.transpose2().data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn row_ops() {
        let m = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let r = Tensor::from_vec(vec![2], vec![10.0, 20.0]);
        assert_eq!(m.add_row_vec(&r).data(), &[11.0, 22.0, 13.0, 24.0]);
        assert_eq!(m.col_sum().data(), &[4.0, 6.0]);
        let s = Tensor::from_vec(vec![2], vec![2.0, 0.5]);
        assert_eq!(m.row_scale(&s).data(), &[2.0, 4.0, 1.5, 2.0]);
    }

    #[test]
    fn norms_and_reductions() {
        let v = Tensor::from_vec(vec![2], vec![3.0, 4.0]);
        assert_eq!(v.l2_norm(), 5.0);
        assert_eq!(v.sum().scalar_value(), 7.0);
        assert_eq!(v.mean().scalar_value(), 3.5);
        assert_eq!(v.dot(&v).scalar_value(), 25.0);
    }

    #[test]
    #[should_panic(expected = "needs")]
    fn bad_buffer_length_panics() {
        Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0]);
    }
}
