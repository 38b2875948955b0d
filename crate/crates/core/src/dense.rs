//! Small dense matrices: LU with partial pivoting and the Padé
//! scaling-and-squaring exponential used by the Arnoldi backend.
//!
//! Everything here is desk-scale (n ≲ 1400). The production matvec never
//! forms a dense matrix.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(columns: &[Vec<S>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    /// `Aᵀ x`
    pub fn matvec_transpose(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.rows, "matvec dimension mismatch");
        let mut y = vec![S::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            crate::scalar::axpy(xi, self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                crate::scalar::axpy(a, src, dst);
            }
        }
        out
    }

    pub fn scaled(&self, a: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * a).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-S::one()))
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> S {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<S>())
            .fold(S::zero(), S::max)
    }

    /// `max |A − Aᵀ|`, zero for symmetric matrices.
    pub fn asymmetry(&self) -> S {
        assert!(self.is_square());
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn lu(&self) -> Result<Lu<S>> {
        Lu::factor(self)
    }

    /// Matrix exponential by degree-13 Padé approximation with scaling and squaring.
    pub fn expm(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA_13: f64 = 5.371920351148152;

        let norm = self.norm_one().to_f64_lossy();
        let squarings = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as i32
        } else {
            0
        };
        let a = self.scaled(S::lit(2f64.powi(-squarings)));
        let ident = Self::identity(n);
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let b = |k: usize| S::lit(B[k]);

        let u_inner = a6
            .scaled(b(13))
            .add(&a4.scaled(b(11)))
            .add(&a2.scaled(b(9)));
        let u_tail = a6
            .scaled(b(7))
            .add(&a4.scaled(b(5)))
            .add(&a2.scaled(b(3)))
            .add(&ident.scaled(b(1)));
        let u = a.matmul(&a6.matmul(&u_inner).add(&u_tail));

        let v_inner = a6
            .scaled(b(12))
            .add(&a4.scaled(b(10)))
            .add(&a2.scaled(b(8)));
        let v = a6
            .matmul(&v_inner)
            .add(&a6.scaled(b(6)))
            .add(&a4.scaled(b(4)))
            .add(&a2.scaled(b(2)))
            .add(&ident.scaled(b(0)));

        let lu = v.sub(&u).lu()?;
        let mut r = lu.solve_matrix(&v.add(&u));
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        Ok(r)
    }
}

impl<S> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for DenseMatrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<S> {
    n: usize,
    factors: DenseMatrix<S>,
    perm: Vec<usize>,
}

impl<S: Real> Lu<S> {
    pub fn factor(a: &DenseMatrix<S>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = a.max_abs() * S::epsilon() * S::from_count(n.max(1));
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, f[(i, k)].abs()))
                .fold((k, -S::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > tiny) {
                return Err(Error::Singular { row: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = f[(k, j)];
                    f[(k, j)] = f[(p, j)];
                    f[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = f[(k, k)];
            for i in (k + 1)..n {
                let m = f[(i, k)] / pivot;
                f[(i, k)] = m;
                if m != S::zero() {
                    for j in (k + 1)..n {
                        let fkj = f[(k, j)];
                        f[(i, j)] -= m * fkj;
                    }
                }
            }
        }
        Ok(Self { n, factors: f, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        assert_eq!(b.len(), self.n);
        let f = &self.factors;
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..self.n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= f[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..self.n {
                acc -= f[(i, j)] * x[j];
            }
            x[i] = acc / f[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        assert_eq!(b.len(), self.n);
        let f = &self.factors;
        // Uᵀ z = b
        let mut z = b.to_vec();
        for i in 0..self.n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= f[(j, i)] * z[j];
            }
            z[i] = acc / f[(i, i)];
        }
        // Lᵀ w = z
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for j in (i + 1)..self.n {
                acc -= f[(j, i)] * z[j];
            }
            z[i] = acc;
        }
        let mut x = vec![S::zero(); self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DenseMatrix<S>) -> DenseMatrix<S> {
        let cols: Vec<Vec<S>> = (0..b.cols())
            .map(|j| {
                let col: Vec<S> = (0..b.rows()).map(|i| b[(i, j)]).collect();
                self.solve(&col)
            })
            .collect();
        DenseMatrix::from_columns(&cols)
    }
}
