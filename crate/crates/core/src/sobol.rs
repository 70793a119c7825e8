//! Scrambled Sobol' low-discrepancy sequence.
//!
//! Direction numbers are the Joe–Kuo `new-joe-kuo-6.21201` set for the first
//! 40 dimensions. Points are generated in Gray-code order with 32-bit
//! precision. Scrambling is a random digital shift: every coordinate is
//! XOR-ed with a per-dimension 32-bit word drawn from the seed, which keeps
//! points in `[0, 1)` and preserves the elementary-interval stratification of
//! each dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const BITS: usize = 32;

/// Highest supported dimension.
pub const MAX_DIM: usize = 1 + DIRECTIONS.len();

// (degree s, coefficients a, initial direction numbers m_1..m_s), dims 2..=40
const DIRECTIONS: [(u32, u32, &[u32]); 39] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SobolError {
    #[error("Sobol dimension {0} is not supported (1..={MAX_DIM})")]
    UnsupportedDimension(usize),
}

fn direction_vectors(dim: usize) -> Vec<[u32; BITS]> {
    let mut out = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (k, v) in first.iter_mut().enumerate() {
        *v = 1 << (BITS - 1 - k);
    }
    out.push(first);
    for &(s, a, m) in DIRECTIONS.iter().take(dim.saturating_sub(1)) {
        let s = s as usize;
        let mut v = [0u32; BITS];
        for k in 0..s.min(BITS) {
            v[k] = m[k] << (BITS - 1 - k);
        }
        for k in s..BITS {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for i in 1..s {
                if (a >> (s - 1 - i)) & 1 == 1 {
                    x ^= v[k - i];
                }
            }
            v[k] = x;
        }
        out.push(v);
    }
    out
}

/// A reproducible stream of Sobol' points.
///
/// Cloning a stream yields an independent, identical continuation.
#[derive(Debug, Clone)]
pub struct SobolStream {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    index: u64,
}

impl SobolStream {
    /// A digitally shifted stream. The shift is derived from `seed`; the
    /// stream starts at index 0.
    pub fn new(dim: usize, seed: u64) -> Result<Self, SobolError> {
        let directions = Self::checked(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<u32>()).collect();
        Ok(Self { directions, shift, index: 0 })
    }

    /// The plain sequence. Starts at index 1, skipping the all-zero point.
    pub fn unscrambled(dim: usize) -> Result<Self, SobolError> {
        let directions = Self::checked(dim)?;
        Ok(Self { directions, shift: vec![0; dim], index: 1 })
    }

    fn checked(dim: usize) -> Result<Vec<[u32; BITS]>, SobolError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(SobolError::UnsupportedDimension(dim));
        }
        Ok(direction_vectors(dim))
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Index of the point the next call to [`next_point`](Self::next_point)
    /// returns.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// The point at an arbitrary index, without advancing the stream.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        self.directions
            .iter()
            .zip(&self.shift)
            .map(|(v, &shift)| {
                let mut x = shift;
                let mut bits = gray;
                let mut k = 0;
                while bits != 0 && k < BITS {
                    if bits & 1 == 1 {
                        x ^= v[k];
                    }
                    bits >>= 1;
                    k += 1;
                }
                x as f64 / (1u64 << BITS) as f64
            })
            .collect()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let p = self.point(self.index);
        self.index += 1;
        p
    }

    pub fn take_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

impl Iterator for SobolStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_point())
    }
}
