use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor2<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// A 1×n tensor.
    pub fn row_vector(values: Vec<S>) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
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
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Converts to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Tensor2<T> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| T::lit(x.as_f64())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "matmul {:?} x {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        S::gemm(
            self.rows,
            self.cols,
            rhs.cols,
            &self.data,
            (self.cols, 1),
            &rhs.data,
            (rhs.cols, 1),
            false,
            &mut out.data,
        );
        Ok(out)
    }

    /// `selfᵀ · rhs`, accumulated into `out`.
    pub fn tr_matmul_acc(&self, rhs: &Self, out: &mut Self) -> Result<()> {
        if self.rows != rhs.rows || out.shape() != (self.cols, rhs.cols) {
            return Err(Error::Shape(format!(
                "tr_matmul {:?}ᵀ x {:?} into {:?}",
                self.shape(),
                rhs.shape(),
                out.shape()
            )));
        }
        S::gemm(
            self.cols,
            self.rows,
            rhs.cols,
            &self.data,
            (1, self.cols),
            &rhs.data,
            (rhs.cols, 1),
            true,
            &mut out.data,
        );
        Ok(())
    }

    /// `self · rhsᵀ`.
    pub fn matmul_tr(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "matmul_tr {:?} x {:?}ᵀ",
                self.shape(),
                rhs.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.rows);
        S::gemm(
            self.rows,
            self.cols,
            rhs.rows,
            &self.data,
            (self.cols, 1),
            &rhs.data,
            (1, rhs.cols),
            false,
            &mut out.data,
        );
        Ok(out)
    }

    /// Reorders rows and columns of a square tensor: `out[i][j] = self[p[i]][p[j]]`.
    pub fn permute_square(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        out
    }

    /// Reorders rows: `out[i] = self[p[i]]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        out
    }
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor2::<f64>::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor2::from_rows(&[vec![1.0, 2.0, 0.0], vec![-1.0, 0.5, 3.0]]).unwrap();
        let b = Tensor2::from_rows(&[vec![2.0, 1.0], vec![0.0, -1.0], vec![4.0, 0.25]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[2.0, -1.0, 10.0, -0.75]);

        // aᵀ·c with c = ab
        let mut out = Tensor2::zeros(3, 2);
        a.tr_matmul_acc(&ab, &mut out).unwrap();
        assert_eq!(out.get(0, 0), 1.0 * 2.0 + -1.0 * 10.0);
        assert_eq!(out.get(2, 1), 3.0 * -0.75);

        let bt = Tensor2::from_rows(&[vec![2.0, 0.0, 4.0], vec![1.0, -1.0, 0.25]]).unwrap();
        assert_eq!(a.matmul_tr(&bt).unwrap(), ab);
        assert!(a.matmul(&a).is_err());
    }
}
