//! Dense order-3 tensors and their multilinear operations.
//!
//! Storage is row-major: element `(i1, i2, i3)` lives at offset
//! `(i1·d2 + i2)·d3 + i3`. Vectorization returns the buffer in that order,
//! so the covariance of `vec(X)` for a tensor normal variable is
//! `Σ1 ⊗ Σ2 ⊗ Σ3` with the factors in mode order.
//!
//! The mode-`n` matricization puts index `i_n` on the rows. Its columns
//! enumerate the two remaining indices in ascending mode order with the later
//! mode varying fastest.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{arg_err, Result};
use crate::matrix::DenseMatrix;

/// Dense order-3 tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

pub(crate) fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(arg_err!("mode must be 1, 2 or 3, got {mode}"))
    }
}

fn checked_len(dims: [usize; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(arg_err!("tensor dimensions must be positive, got {dims:?}"));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| arg_err!("tensor dimensions {dims:?} overflow"))
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len = checked_len(dims)?;
        if data.len() != len {
            return Err(arg_err!(
                "tensor {dims:?} needs {len} elements, got {}",
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        let len = checked_len(dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; len],
        })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut k = 0;
        for i1 in 0..dims[0] {
            for i2 in 0..dims[1] {
                for i3 in 0..dims[2] {
                    t.data[k] = f(i1, i2, i3);
                    k += 1;
                }
            }
        }
        Ok(t)
    }

    /// Rebuilds a tensor from its vectorization.
    pub fn from_vec(dims: [usize; 3], v: Vec<f64>) -> Result<Self> {
        Self::new(dims, v)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode - 1]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.dims[1] + i2) * self.dims[2] + i3
    }

    /// The buffer in storage order (`i1` slowest, `i3` fastest).
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(arg_err!(
                "tensor dims differ: {:?} vs {:?}",
                self.dims,
                other.dims
            ));
        }
        Ok(Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Stride of `mode` in the storage buffer.
    #[inline]
    fn stride(&self, mode: usize) -> usize {
        match mode {
            1 => self.dims[1] * self.dims[2],
            2 => self.dims[2],
            _ => 1,
        }
    }

    /// Starting offsets of every mode-`mode` fiber, ordered like the columns
    /// of the mode-`mode` matricization.
    fn fiber_starts(&self, mode: usize) -> Vec<usize> {
        let [d1, d2, d3] = self.dims;
        let mut starts = Vec::with_capacity(self.len() / self.dims[mode - 1]);
        match mode {
            1 => {
                for i2 in 0..d2 {
                    for i3 in 0..d3 {
                        starts.push(self.offset(0, i2, i3));
                    }
                }
            }
            2 => {
                for i1 in 0..d1 {
                    for i3 in 0..d3 {
                        starts.push(self.offset(i1, 0, i3));
                    }
                }
            }
            _ => {
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        starts.push(self.offset(i1, i2, 0));
                    }
                }
            }
        }
        starts
    }

    /// Applies `f` to every mode-`mode` fiber, writing the result back.
    ///
    /// `f` receives the fiber in a scratch buffer and must leave the
    /// transformed fiber (same length) in place.
    pub(crate) fn map_fibers(&mut self, mode: usize, mut f: impl FnMut(&mut [f64])) {
        let n = self.dims[mode - 1];
        let stride = self.stride(mode);
        let mut buf = vec![0.0; n];
        for start in self.fiber_starts(mode) {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = self.data[start + k * stride];
            }
            f(&mut buf);
            for (k, b) in buf.iter().enumerate() {
                self.data[start + k * stride] = *b;
            }
        }
    }

    /// Mode-`mode` matricization: a `d_mode × (d / d_mode)` matrix.
    pub fn matricize(&self, mode: usize) -> Result<DenseMatrix> {
        check_mode(mode)?;
        let n = self.dims[mode - 1];
        let cols = self.len() / n;
        let stride = self.stride(mode);
        let mut out = DenseMatrix::zeros(n, cols);
        for (c, start) in self.fiber_starts(mode).into_iter().enumerate() {
            for r in 0..n {
                out[(r, c)] = self.data[start + r * stride];
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor3::matricize`].
    pub fn fold(m: &DenseMatrix, mode: usize, dims: [usize; 3]) -> Result<Self> {
        check_mode(mode)?;
        let mut t = Self::zeros(dims)?;
        let n = dims[mode - 1];
        if m.rows() != n || m.cols() != t.len() / n {
            return Err(arg_err!(
                "cannot fold a {}x{} matrix along mode {mode} into {dims:?}",
                m.rows(),
                m.cols()
            ));
        }
        let stride = t.stride(mode);
        for (c, start) in t.fiber_starts(mode).into_iter().enumerate() {
            for r in 0..n {
                t.data[start + r * stride] = m[(r, c)];
            }
        }
        Ok(t)
    }

    /// Mode-`mode` product `t ×_mode m`: every mode fiber `x` becomes `m·x`.
    pub fn mode_product(&self, m: &DenseMatrix, mode: usize) -> Result<Self> {
        check_mode(mode)?;
        let n = self.dims[mode - 1];
        if m.cols() != n {
            return Err(arg_err!(
                "mode-{mode} product needs a matrix with {n} columns, got {}x{}",
                m.rows(),
                m.cols()
            ));
        }
        let mut dims = self.dims;
        dims[mode - 1] = m.rows();
        let mut out = Self::zeros(dims)?;
        let in_stride = self.stride(mode);
        let out_stride = out.stride(mode);
        let in_starts = self.fiber_starts(mode);
        let out_starts = out.fiber_starts(mode);
        let mut fiber = vec![0.0; n];
        for (&si, &so) in in_starts.iter().zip(&out_starts) {
            for (k, f) in fiber.iter_mut().enumerate() {
                *f = self.data[si + k * in_stride];
            }
            for r in 0..m.rows() {
                out.data[so + r * out_stride] =
                    m.row(r).iter().zip(&fiber).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    /// Mode-3 slice `t` as a `d1 × d2` matrix.
    pub fn slice3(&self, t: usize) -> Result<DenseMatrix> {
        let [d1, d2, d3] = self.dims;
        if t >= d3 {
            return Err(arg_err!("slice {t} out of range for mode-3 size {d3}"));
        }
        Ok(DenseMatrix::from_fn(d1, d2, |i, j| self[(i, j, t)]))
    }

    pub fn set_slice3(&mut self, t: usize, m: &DenseMatrix) -> Result<()> {
        let [d1, d2, d3] = self.dims;
        if t >= d3 || m.rows() != d1 || m.cols() != d2 {
            return Err(arg_err!(
                "cannot write a {}x{} slice at {t} into {:?}",
                m.rows(),
                m.cols(),
                self.dims
            ));
        }
        for i in 0..d1 {
            for j in 0..d2 {
                self[(i, j, t)] = m[(i, j)];
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i1, i2, i3): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i1, i2, i3)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i1, i2, i3): (usize, usize, usize)) -> &mut f64 {
        let k = self.offset(i1, i2, i3);
        &mut self.data[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(dims: [usize; 3]) -> Tensor3 {
        let n = dims.iter().product::<usize>();
        Tensor3::new(dims, (0..n).map(|x| x as f64).collect()).unwrap()
    }

    #[test]
    fn mode1_rows_are_storage_slabs() {
        let t = iota([2, 2, 2]);
        let m = t.matricize(1).unwrap();
        assert_eq!(m.row(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn mode2_and_mode3_column_order() {
        let t = iota([2, 2, 2]);
        // columns (i1, i3), i3 fastest
        let m2 = t.matricize(2).unwrap();
        assert_eq!(m2.row(0), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(m2.row(1), &[2.0, 3.0, 6.0, 7.0]);
        // columns (i1, i2), i2 fastest
        let m3 = t.matricize(3).unwrap();
        assert_eq!(m3.row(0), &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(m3.row(1), &[1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn vectorize_is_storage_order() {
        assert_eq!(
            iota([2, 2, 2]).vectorize(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
        );
        let v: Vec<f64> = (0..12).map(|x| x as f64 * 0.5).collect();
        assert_eq!(Tensor3::from_vec([3, 2, 2], v.clone()).unwrap().vectorize(), v);
    }

    #[test]
    fn unit_tensor_round_trips() {
        let t = Tensor3::new([1, 1, 1], vec![4.25]).unwrap();
        for mode in 1..=3 {
            let m = t.matricize(mode).unwrap();
            assert_eq!(Tensor3::fold(&m, mode, t.dims()).unwrap(), t);
        }
    }

    #[test]
    fn invalid_mode_and_fold_shape() {
        let t = iota([2, 3, 4]);
        assert!(t.matricize(0).is_err());
        assert!(t.matricize(4).is_err());
        let m = t.matricize(2).unwrap();
        assert!(Tensor3::fold(&m, 1, t.dims()).is_err());
        assert!(Tensor3::fold(&m, 2, [3, 2, 4]).is_err());
    }

    #[test]
    fn identity_mode_product() {
        let t = iota([2, 3, 4]);
        for mode in 1..=3 {
            let id = DenseMatrix::identity(t.dim(mode));
            assert_eq!(t.mode_product(&id, mode).unwrap(), t);
        }
        assert!(t.mode_product(&DenseMatrix::identity(5), 1).is_err());
    }

    #[test]
    fn mode_product_changes_dims() {
        let t = iota([2, 3, 4]);
        let m = DenseMatrix::zeros(5, 3);
        assert_eq!(t.mode_product(&m, 2).unwrap().dims(), [2, 5, 4]);
    }

    #[test]
    fn slices_round_trip() {
        let mut t = iota([2, 3, 4]);
        let s = t.slice3(2).unwrap();
        assert_eq!(s[(1, 2)], t[(1, 2, 2)]);
        let z = DenseMatrix::zeros(2, 3);
        t.set_slice3(2, &z).unwrap();
        assert_eq!(t.slice3(2).unwrap(), z);
        assert!(t.slice3(4).is_err());
    }
}
