//! Scalar precision and the row-major dense matrix used for feature rows,
//! weights and partial-sum buffers.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Run-wide floating point precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn elem_bytes(self) -> u64 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

pub trait Real: Float + Sum + Default + Debug + Send + Sync + 'static {
    const PRECISION: Precision;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major `rows x cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> crate::Result<Self> {
        if data.len() != rows * cols {
            return Err(crate::error::invalid!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

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

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Dense<U> {
        Dense {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Dense<U> {
        self.map(|v| U::from_f64(v.to_f64()))
    }

    /// Columns `[start, start + width)` of every row.
    pub fn column_block(&self, start: usize, width: usize) -> Dense<T> {
        Dense::from_fn(self.rows, width, |r, c| self.get(r, start + c))
    }

    /// Concatenate along columns. All parts must have the same row count.
    pub fn hcat(parts: &[&Dense<T>]) -> crate::Result<Dense<T>> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if parts.iter().any(|p| p.rows != rows) {
            return Err(crate::error::invalid!("cannot concatenate matrices with different row counts"));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Ok(Dense { rows, cols, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product accumulated left to right from zero. Every executor funnels its
/// per-offset inner products through this so rounding is identical across
/// dataflows.
#[inline]
pub(crate) fn dot_strided<T: Real>(x: &[T], w: &[T], stride: usize) -> T {
    let mut acc = T::zero();
    for (c, &xv) in x.iter().enumerate() {
        acc = acc + xv * w[c * stride];
    }
    acc
}

/// `t[i] += Σ_c x[c] * w[c * stride + i]` for every `i < t.len()`, each sum
/// taken in channel order. Columns go through fixed-width blocks so the
/// compiler unrolls and vectorizes them.
#[inline]
pub(crate) fn madd_columns<T: Real>(t: &mut [T], x: &[T], w: &[T], stride: usize) {
    let mut o = 0;
    while o < t.len() {
        let step = match t.len() - o {
            r if r >= 16 => 16,
            r if r >= 8 => 8,
            r if r >= 4 => 4,
            r => r,
        };
        let (t, w) = (&mut t[o..o + step], &w[o..]);
        match step {
            16 => madd_block::<T, 16>(t, x, w, stride),
            8 => madd_block::<T, 8>(t, x, w, stride),
            4 => madd_block::<T, 4>(t, x, w, stride),
            _ => {
                for (c, &xv) in x.iter().enumerate() {
                    for (a, &b) in t.iter_mut().zip(&w[c * stride..]) {
                        *a = *a + xv * b;
                    }
                }
            }
        }
        o += step;
    }
}

#[inline(always)]
fn madd_block<T: Real, const N: usize>(t: &mut [T], x: &[T], w: &[T], stride: usize) {
    let t: &mut [T; N] = t.try_into().expect("block width");
    for (c, &xv) in x.iter().enumerate() {
        let w_c: &[T; N] = w[c * stride..c * stride + N].try_into().expect("block width");
        for i in 0..N {
            t[i] = t[i] + xv * w_c[i];
        }
    }
}

/// `emit(o0, t)` receives, chunk by chunk, `t[o - o0]` equal to
/// [`dot_strided`] of `x` with column `o` of the row-major `C_in x c_out`
/// matrix `w`. Channels run in the outer loop so the inner loop is contiguous
/// and vectorizes, while each `t[o]` still starts at zero and adds its
/// products in channel order: the bits match `dot_strided`.
#[inline]
pub(crate) fn row_products<T: Real>(x: &[T], w: &[T], c_out: usize, mut emit: impl FnMut(usize, &[T])) {
    const CHUNK: usize = 64;
    let mut buf = [T::zero(); CHUNK];
    for o0 in (0..c_out).step_by(CHUNK) {
        let n = CHUNK.min(c_out - o0);
        let t = &mut buf[..n];
        t.fill(T::zero());
        madd_columns(t, x, &w[o0..], c_out);
        emit(o0, t);
    }
}
