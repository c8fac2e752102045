//! Exact rank of matrices whose entries are short dyadic rationals.

use super::Matrix;

const PRIMES: [u64; 2] = [2_305_843_009_213_693_951, 4_611_686_018_427_387_847];
const MAX_MANTISSA_BITS: u32 = 40;
const MAX_EXPONENT_SPREAD: i32 = 256;

/// `v = mant * 2^exp` with `mant` odd, or `None` for zero.
fn dyadic(v: f64) -> Option<(i64, i32)> {
    if v == 0.0 {
        return None;
    }
    let bits = v.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if raw_exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), raw_exp - 1075) };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    let signed = if v < 0.0 { -(mant as i64) } else { mant as i64 };
    Some((signed, exp))
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    r
}

fn rank_mod(rows: &[Vec<u64>], ncols: usize, p: u64) -> usize {
    let mut m = rows.to_vec();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(piv) = (rank..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = pow_mod(m[rank][c], p - 2, p);
        for i in rank + 1..m.len() {
            if m[i][c] == 0 {
                continue;
            }
            let f = mul_mod(m[i][c], inv, p);
            for j in c..ncols {
                let sub = mul_mod(f, m[rank][j], p);
                m[i][j] = (m[i][j] + p - sub) % p;
            }
        }
        rank += 1;
    }
    rank
}

/// Rank over the rationals when every entry is `mant * 2^exp` with a short
/// mantissa. Entries with long binary expansions (typical of rounded decimal
/// data) give `None`.
pub fn exact_rank(m: &Matrix) -> Option<usize> {
    if m.is_empty() {
        return Some(0);
    }
    let mut parts = Vec::with_capacity(m.len());
    let mut min_exp = i32::MAX;
    let mut max_exp = i32::MIN;
    for &v in m.iter() {
        if !v.is_finite() {
            return None;
        }
        let d = dyadic(v);
        if let Some((mant, exp)) = d {
            if 64 - mant.unsigned_abs().leading_zeros() > MAX_MANTISSA_BITS {
                return None;
            }
            min_exp = min_exp.min(exp);
            max_exp = max_exp.max(exp);
        }
        parts.push(d);
    }
    if min_exp == i32::MAX {
        return Some(0);
    }
    if max_exp - min_exp > MAX_EXPONENT_SPREAD {
        return None;
    }
    let (nr, nc) = m.shape();
    let rank = PRIMES
        .iter()
        .map(|&p| {
            let rows: Vec<Vec<u64>> = (0..nr)
                .map(|i| {
                    (0..nc)
                        .map(|j| match parts[i + j * nr] {
                            None => 0,
                            Some((mant, exp)) => {
                                let scale = pow_mod(2, (exp - min_exp) as u64, p);
                                let mag = mul_mod(mant.unsigned_abs() % p, scale, p);
                                if mant < 0 && mag != 0 {
                                    p - mag
                                } else {
                                    mag
                                }
                            }
                        })
                        .collect()
                })
                .collect();
            rank_mod(&rows, nc, p)
        })
        .max()
        .unwrap_or(0);
    Some(rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_rank() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, 0.5, 0.25]);
        assert_eq!(exact_rank(&m), Some(2));
        assert_eq!(exact_rank(&Matrix::zeros(2, 3)), Some(0));
        assert_eq!(exact_rank(&Matrix::identity(4, 4)), Some(4));
    }

    #[test]
    fn sees_below_rounding() {
        let eps = 2f64.powi(-39);
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + eps]);
        assert_eq!(exact_rank(&m), Some(2));
    }

    #[test]
    fn decimals_are_declined() {
        let m = Matrix::from_row_slice(2, 2, &[0.1, 0.3, 0.2, 0.6]);
        assert_eq!(exact_rank(&m), None);
    }
}
