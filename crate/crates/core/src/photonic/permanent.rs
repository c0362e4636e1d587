//! Matrix permanents by Ryser's inclusion-exclusion formula.
//!
//! `perm(A) = (-1)^k * sum_{S ⊆ cols} (-1)^{|S|} prod_i sum_{j ∈ S} A[i][j]`,
//! visiting subsets in Gray-code order so each step updates the row sums
//! with a single column, for `O(2^k k)` work.

use super::matrix::{CMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

pub const MAX_PERMANENT_ORDER: usize = 20;

fn check(a: &CMatrix) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "permanent of a non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() > MAX_PERMANENT_ORDER {
        return Err(Error::Argument(format!(
            "permanent order {} exceeds {MAX_PERMANENT_ORDER}",
            a.rows()
        )));
    }
    Ok(a.rows())
}

pub fn permanent(a: &CMatrix) -> Result<C64> {
    let k = check(a)?;
    if k == 0 {
        return Ok(ONE);
    }
    let mut row_sums = vec![ZERO; k];
    let mut total = ZERO;
    let mut odd = false;
    for g in 1u32..(1 << k) {
        let j = g.trailing_zeros() as usize;
        // Gray code g ^ (g >> 1) flips bit j at step g.
        let adding = (g ^ (g >> 1)) & (1 << j) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if adding {
                *s += a[(i, j)];
            } else {
                *s -= a[(i, j)];
            }
        }
        odd = !odd;
        let prod = row_sums.iter().fold(ONE, |p, s| p * s);
        if odd {
            total -= prod;
        } else {
            total += prod;
        }
    }
    Ok(if k % 2 == 1 { -total } else { total })
}

/// All partial derivatives `d perm(A) / d A[r][c]`, i.e. the permanents of
/// the `(r, c)` minors, as a `k x k` matrix.
pub fn permanent_gradient(a: &CMatrix) -> Result<CMatrix> {
    let k = check(a)?;
    let mut grad = CMatrix::zeros(k, k);
    if k == 0 {
        return Ok(grad);
    }
    let mut row_sums = vec![ZERO; k];
    let mut members = 0u32;
    let mut prefix = vec![ONE; k + 1];
    let mut suffix = vec![ONE; k + 1];
    for g in 1u32..(1 << k) {
        let j = g.trailing_zeros() as usize;
        members ^= 1 << j;
        let adding = members & (1 << j) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if adding {
                *s += a[(i, j)];
            } else {
                *s -= a[(i, j)];
            }
        }
        for i in 0..k {
            prefix[i + 1] = prefix[i] * row_sums[i];
            suffix[k - 1 - i] = suffix[k - i] * row_sums[k - 1 - i];
        }
        let negative = (members.count_ones() as usize + k) % 2 == 1;
        for r in 0..k {
            let mut excl = prefix[r] * suffix[r + 1];
            if negative {
                excl = -excl;
            }
            let mut bits = members;
            while bits != 0 {
                let c = bits.trailing_zeros() as usize;
                grad[(r, c)] += excl;
                bits &= bits - 1;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(k: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_vec(k, k, v.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn identity_and_ones() {
        assert!((permanent(&CMatrix::identity(3)).unwrap() - ONE).norm() < 1e-15);
        let ones = real(3, &[1.0; 9]);
        assert!((permanent(&ones).unwrap() - C64::new(6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = real(2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((permanent(&m).unwrap().re - 10.0).abs() < 1e-12);
        let g = permanent_gradient(&m).unwrap();
        // d/dA00 = A11, d/dA01 = A10, ...
        assert!((g[(0, 0)].re - 4.0).abs() < 1e-12);
        assert!((g[(0, 1)].re - 3.0).abs() < 1e-12);
        assert!((g[(1, 0)].re - 2.0).abs() < 1e-12);
        assert!((g[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            permanent(&CMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn empty_matrix() {
        assert_eq!(permanent(&CMatrix::zeros(0, 0)).unwrap(), ONE);
    }
}
