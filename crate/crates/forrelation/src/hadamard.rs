//! Dense kernels over vectors of length `2^n`: the Walsh-Hadamard transform
//! and pointwise phase multiplication.
//!
//! The unitary convention `H[x][y] = (-1)^(x.y) / sqrt(N)` is the default.
//! [`fwht_raw`] skips the normalization.

use crate::error::{Error, Result};

/// Returns `n` such that `len == 2^n`.
pub fn log2_len(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

/// A real vector indexed by `{0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector {
    n: u32,
    values: Vec<f64>,
}

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = log2_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("entry {i} is not finite")));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: u32) -> Self {
        Self { n, values: vec![0.0; 1 << n] }
    }

    /// The computational basis vector `|index>`.
    pub fn basis(n: u32, index: usize) -> Self {
        let mut v = Self::zeros(n);
        v.values[index] = 1.0;
        v
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn dot(&self, other: &RealVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(dot(&self.values, &other.values))
    }
}

impl AsRef<[f64]> for RealVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unnormalized butterfly. Panics if the length is not a power of two;
/// use [`fwht_raw`] for a checked entry point.
pub fn fwht_raw_in_place(v: &mut [f64]) {
    assert!(v.len().is_power_of_two(), "length must be a power of two");
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Unitary transform in place.
pub fn fwht_in_place(v: &mut [f64]) {
    fwht_raw_in_place(v);
    let scale = 1.0 / (v.len() as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
}

pub fn fwht(v: &RealVector) -> RealVector {
    let mut values = v.values.clone();
    fwht_in_place(&mut values);
    RealVector { n: v.n, values }
}

pub fn fwht_raw(v: &RealVector) -> RealVector {
    let mut values = v.values.clone();
    fwht_raw_in_place(&mut values);
    RealVector { n: v.n, values }
}

/// Multiplies `v[x]` by `f[x]` for every `x`.
pub fn apply_phase(v: &RealVector, f: &[f64]) -> Result<RealVector> {
    check_len(v.len(), f.len())?;
    let values = v.values.iter().zip(f).map(|(a, b)| a * b).collect();
    Ok(RealVector { n: v.n, values })
}

pub fn apply_phase_in_place(v: &mut [f64], f: &[f64]) -> Result<()> {
    check_len(v.len(), f.len())?;
    v.iter_mut().zip(f).for_each(|(a, b)| *a *= b);
    Ok(())
}

/// Parity of `x & y`, as a sign.
#[inline]
pub fn character(x: usize, y: usize) -> f64 {
    if (x & y).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
