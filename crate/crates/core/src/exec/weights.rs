use rand::Rng;

use crate::error::invalid;
use crate::real::Real;
use crate::Result;

/// Per-offset weight matrices, row-major `[offset][c_in][c_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor<T> {
    volume: usize,
    c_in: usize,
    c_out: usize,
    data: Vec<T>,
}

impl<T: Real> WeightTensor<T> {
    pub fn new(volume: usize, c_in: usize, c_out: usize, data: Vec<T>) -> Result<Self> {
        if c_in == 0 || c_out == 0 || volume == 0 {
            return Err(invalid!("weight dimensions must be positive"));
        }
        if data.len() != volume * c_in * c_out {
            return Err(invalid!(
                "weight data has {} values, expected {volume}x{c_in}x{c_out}",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("weights must be finite"));
        }
        Ok(Self { volume, c_in, c_out, data })
    }

    pub fn zeros(volume: usize, c_in: usize, c_out: usize) -> Self {
        Self {
            volume,
            c_in,
            c_out,
            data: vec![T::zero(); volume * c_in * c_out],
        }
    }

    pub fn from_fn(volume: usize, c_in: usize, c_out: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(volume * c_in * c_out);
        for k in 0..volume {
            for c in 0..c_in {
                for o in 0..c_out {
                    data.push(f(k, c, o));
                }
            }
        }
        Self { volume, c_in, c_out, data }
    }

    /// Identity at offset `center`, zero elsewhere. Requires `c_in == c_out`.
    pub fn identity(volume: usize, channels: usize, center: usize) -> Self {
        Self::from_fn(volume, channels, channels, |k, c, o| {
            if k == center && c == o {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Uniform in `[-scale, scale)`.
    pub fn random(volume: usize, c_in: usize, c_out: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self::from_fn(volume, c_in, c_out, |_, _, _| T::from_f64(rng.random_range(-scale..scale)))
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// `c_in x c_out` block of offset `k`.
    #[inline]
    pub fn offset(&self, k: usize) -> &[T] {
        let n = self.c_in * self.c_out;
        &self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn offset_mut(&mut self, k: usize) -> &mut [T] {
        let n = self.c_in * self.c_out;
        &mut self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn get(&self, k: usize, c: usize, o: usize) -> T {
        self.data[(k * self.c_in + c) * self.c_out + o]
    }

    /// Weights of the transposed convolution: offset `k` moves to its mirror
    /// `volume - 1 - k` and each block is transposed. Graph weights
    /// (relations, not offsets) must not be mirrored; see
    /// [`transposed_blocks`](Self::transposed_blocks).
    pub fn transposed(&self) -> Self {
        let v = self.volume;
        Self::from_fn(v, self.c_out, self.c_in, |k, o, c| self.get(v - 1 - k, c, o))
    }

    /// Transposes each block in place of its index.
    pub fn transposed_blocks(&self) -> Self {
        Self::from_fn(self.volume, self.c_out, self.c_in, |k, o, c| self.get(k, c, o))
    }

    pub fn cast<U: Real>(&self) -> WeightTensor<U> {
        WeightTensor {
            volume: self.volume,
            c_in: self.c_in,
            c_out: self.c_out,
            data: self.data.iter().map(|v| U::from_f64(Real::to_f64(*v))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_mirrors_and_swaps() {
        let w = WeightTensor::<f64>::from_fn(9, 2, 3, |k, c, o| (k * 100 + c * 10 + o) as f64);
        let t = w.transposed();
        assert_eq!((t.c_in(), t.c_out()), (3, 2));
        assert_eq!(t.get(0, 2, 1), w.get(8, 1, 2));
        assert_eq!(t.transposed(), w);
        assert_eq!(w.transposed_blocks().get(3, 2, 1), w.get(3, 1, 2));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(WeightTensor::<f32>::new(9, 2, 2, vec![0.0; 35]).is_err());
        assert!(WeightTensor::<f32>::new(1, 1, 1, vec![f32::NAN]).is_err());
    }
}
