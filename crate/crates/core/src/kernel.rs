//! Dense primitives shared by every trainable component.
//!
//! Each differentiable op has a matching `*_backward` that maps an upstream
//! gradient to input gradients. `checks` exercises all of them against
//! central differences.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.rows, other.cols)
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
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn sq_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `y = W x` where `x` has `cols` entries.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = dot_unchecked(self.row(r), x);
        }
    }

    /// `y += Wᵀ g` where `g` has `rows` entries.
    pub fn matvec_t_acc(&self, g: &[T], y: &mut [T]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            axpy(gr, self.row(r), y);
        }
    }

    /// `W += g xᵀ`.
    pub fn outer_acc(&mut self, g: &[T], x: &[T]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            axpy(gr, x, self.row_mut(r));
        }
    }
}

#[inline]
pub(crate) fn dot_unchecked<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `y += a x`.
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn ensure_finite<T: Real>(what: &str, xs: &[T]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn same_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape {
            op,
            expected: a,
            got: b,
        })
    }
}

/// Xavier/Glorot uniform initialization: U[-b, b] with b = sqrt(6 / (fan_in + fan_out)).
///
/// `fan_out` is the row count and `fan_in` the column count. Draws are made in
/// 64-bit and rounded, so `f32` and `f64` tables share the same stream.
pub fn xavier_init<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("xavier_init"));
    }
    let bound = libm_sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols)
        .map(|_| T::of(rng.gen_range(-bound..=bound)))
        .collect();
    Ok(Matrix { rows, cols, data })
}

fn libm_sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

#[inline]
pub fn leaky<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_grad<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        slope
    }
}

pub fn leaky_relu<T: Real>(x: &[T], slope: T) -> Vec<T> {
    x.iter().map(|&v| leaky(v, slope)).collect()
}

/// Gradient of `leaky_relu` at `x` applied to upstream `g`.
pub fn leaky_relu_backward<T: Real>(x: &[T], g: &[T], slope: T) -> Vec<T> {
    x.iter()
        .zip(g)
        .map(|(&v, &gi)| gi * leaky_grad(v, slope))
        .collect()
}

/// Softmax with max subtraction.
pub fn stable_softmax<T: Real>(logits: &[T]) -> Result<Vec<T>> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out)?;
    Ok(out)
}

pub fn softmax_in_place<T: Real>(xs: &mut [T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Empty("stable_softmax"));
    }
    ensure_finite("stable_softmax logits", xs)?;
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

/// Softmax Jacobian-vector product: `dz_i = p_i (g_i - Σ_j p_j g_j)`.
pub fn softmax_backward<T: Real>(probs: &[T], g: &[T]) -> Vec<T> {
    let inner = dot_unchecked(probs, g);
    probs.iter().zip(g).map(|(&p, &gi)| p * (gi - inner)).collect()
}

pub fn hadamard<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    same_len("hadamard", a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(&x, &y)| x * y).collect())
}

/// `y = W x`.
pub fn affine<T: Real>(w: &Matrix<T>, x: &[T]) -> Result<Vec<T>> {
    same_len("affine", w.cols(), x.len())?;
    let mut y = vec![T::zero(); w.rows()];
    w.matvec(x, &mut y);
    Ok(y)
}

/// Returns `(dL/dW, dL/dx) = (g xᵀ, Wᵀ g)`.
pub fn affine_backward<T: Real>(w: &Matrix<T>, x: &[T], g: &[T]) -> Result<(Matrix<T>, Vec<T>)> {
    same_len("affine_backward x", w.cols(), x.len())?;
    same_len("affine_backward g", w.rows(), g.len())?;
    let mut dw = Matrix::zeros_like(w);
    dw.outer_acc(g, x);
    let mut dx = vec![T::zero(); x.len()];
    w.matvec_t_acc(g, &mut dx);
    Ok((dw, dx))
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    same_len("dot", a.len(), b.len())?;
    Ok(dot_unchecked(a, b))
}
