//! Bit codes, permutations, and binomial bookkeeping for column indexing.
//!
//! Columns of an order-k field are addressed by k-bit codes, most significant
//! bit first, so column `j` encodes which of the two difference directions
//! was taken at each of the k derivative steps. The symmetric group acts on
//! code positions; two columns are interchangeable exactly when their codes
//! have the same bit sum, which is what the projector in
//! [`crate::operators`] averages over.

use itertools::Itertools;

use crate::error::{Result, TgvError};

/// Largest order for which the symmetric group is enumerated explicitly.
/// `k!` grows fast; the orbit route in [`crate::operators`] stays available
/// well beyond this.
pub const MAX_ENUM_ORDER: usize = 8;

/// Largest order accepted by index-set helpers that walk all `2^k` columns.
pub const MAX_CODE_ORDER: usize = 24;

/// Exact binomial coefficient; zero outside `0 <= r <= k`.
pub fn binom(k: usize, r: isize) -> u128 {
    if r < 0 || r as usize > k {
        return 0;
    }
    let r = (r as usize).min(k - r as usize);
    let mut acc: u128 = 1;
    for i in 0..r {
        // The running product of i+1 consecutive integers is divisible by
        // (i+1)!, so this division is exact at every step.
        acc = acc * (k - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// [`binom`] as `f64`, for weight computations.
pub fn binom_f64(k: usize, r: isize) -> f64 {
    binom(k, r) as f64
}

/// A k-bit column code, most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitCode {
    bits: Vec<u8>,
}

impl BitCode {
    /// Wraps raw bits, rejecting entries other than 0 and 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(TgvError::InvalidArgument(format!(
                "bit code entry at position {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of bits, i.e. the order of the field the code indexes into.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn check_code_range(j: usize, k: usize) -> Result<()> {
    if k > MAX_CODE_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "code order {k} exceeds the supported maximum {MAX_CODE_ORDER}"
        )));
    }
    if j >= 1usize << k {
        return Err(TgvError::InvalidArgument(format!(
            "column index {j} out of range for {k}-bit codes"
        )));
    }
    Ok(())
}

/// Encodes column index `j` as a k-bit code, most significant bit first:
/// `binary_code(5, 3)` yields bits `[1, 0, 1]`.
pub fn binary_code(j: usize, k: usize) -> Result<BitCode> {
    check_code_range(j, k)?;
    let bits = (0..k).map(|i| ((j >> (k - 1 - i)) & 1) as u8).collect();
    Ok(BitCode { bits })
}

/// Decodes a most-significant-bit-first code back to its column index:
/// `binary_decode(&[0, 1, 1])` yields 3.
pub fn binary_decode(bits: &[u8]) -> Result<usize> {
    if bits.is_empty() {
        return Err(TgvError::InvalidArgument("empty bit code".into()));
    }
    if bits.len() > MAX_CODE_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "code length {} exceeds the supported maximum {MAX_CODE_ORDER}",
            bits.len()
        )));
    }
    let mut j = 0usize;
    for (pos, &b) in bits.iter().enumerate() {
        if b > 1 {
            return Err(TgvError::InvalidArgument(format!(
                "bit code entry at position {pos} is {b}, expected 0 or 1"
            )));
        }
        j = (j << 1) | b as usize;
    }
    Ok(j)
}

/// A bijection on positions `1..=k`, stored as its image list
/// `(pi(1), ..., pi(k))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Validates that `images` lists each of `1..=k` exactly once.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &v in &images {
            if v < 1 || v > k {
                return Err(TgvError::InvalidArgument(format!(
                    "permutation image {v} out of range 1..={k}"
                )));
            }
            if seen[v - 1] {
                return Err(TgvError::InvalidArgument(format!(
                    "permutation image {v} repeats"
                )));
            }
            seen[v - 1] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            images: (1..=k).collect(),
        }
    }

    /// Number of positions acted on.
    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `pi(pos)` for a 1-based position.
    pub fn image(&self, pos: usize) -> usize {
        self.images[pos - 1]
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (pos, &img) in self.images.iter().enumerate() {
            images[img - 1] = pos + 1;
        }
        Permutation { images }
    }
}

/// Reorders `v` so position `l` takes the value at `pi(l)`:
/// the result is `(v[pi(1)], ..., v[pi(k)])` in 1-based terms.
pub fn apply_permutation<T: Copy>(perm: &Permutation, v: &[T]) -> Result<Vec<T>> {
    if v.len() != perm.degree() {
        return Err(TgvError::ShapeMismatch(format!(
            "sequence of length {} under a permutation of degree {}",
            v.len(),
            perm.degree()
        )));
    }
    Ok(perm.images.iter().map(|&p| v[p - 1]).collect())
}

/// All permutations of `1..=k` in lexicographic order of their image lists.
pub fn enumerate_permutations(k: usize) -> Result<Vec<Permutation>> {
    if k == 0 {
        return Err(TgvError::InvalidArgument(
            "permutation degree must be at least 1".into(),
        ));
    }
    if k > MAX_ENUM_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "enumerating S_{k} ({k}! elements) exceeds the cap of {MAX_ENUM_ORDER}"
        )));
    }
    Ok((1..=k)
        .permutations(k)
        .map(|images| Permutation { images })
        .collect())
}

/// The symmetric index vector of column `j` at order `k`: entry `m` is the
/// column whose code is the code of `j` permuted by the m-th permutation of
/// [`enumerate_permutations`]. Example: order 2, column 2 gives `[2, 1]`.
pub fn sym_index_vector(j: usize, k: usize) -> Result<Vec<usize>> {
    let code = binary_code(j, k)?;
    enumerate_permutations(k)?
        .iter()
        .map(|perm| binary_decode(&apply_permutation(perm, code.bits())?))
        .collect()
}

/// Number of set bits in the k-bit code of `j`.
pub fn bit_sum(j: usize, k: usize) -> Result<u32> {
    check_code_range(j, k)?;
    Ok(j.count_ones())
}

/// All column indices sharing `j`'s bit sum, ascending. This is exactly the
/// set of values of `sym_index_vector(j, k)` without multiplicity, and it has
/// `binom(k, bit_sum)` elements.
pub fn orbit(j: usize, k: usize) -> Result<Vec<usize>> {
    let s = bit_sum(j, k)?;
    Ok((0..1usize << k).filter(|m| m.count_ones() == s).collect())
}
