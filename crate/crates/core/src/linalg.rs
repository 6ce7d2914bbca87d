//! Exact rank computations over ℚ by fraction-free (Bareiss) elimination.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::coeffs::Rational;

/// Rank of a rational matrix given as rows.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows.iter().map(|r| clear_denominators(r)).collect();
    bareiss_rank(&mut m)
}

fn clear_denominators(row: &[Rational]) -> Vec<BigInt> {
    let l = row
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    row.iter().map(|x| x.numer() * (&l / x.denom())).collect()
}

/// Fraction-free Gaussian elimination; every intermediate division is exact.
fn bareiss_rank(m: &mut [Vec<BigInt>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][c].clone();
        for i in rank + 1..rows {
            let factor = m[i][c].clone();
            for j in c..cols {
                let v = &pivot * &m[i][j] - &factor * &m[rank][j];
                m[i][j] = v / &prev;
            }
        }
        prev = pivot.abs();
        if prev.is_zero() {
            prev = BigInt::one();
        }
        rank += 1;
    }
    rank
}

/// Assembles the matrix of a linear map from the coordinate images of a
/// basis; rows are codomain coordinates, columns basis elements.
pub fn matrix_of<K: Ord + Clone>(images: &[BTreeMap<K, Rational>]) -> Vec<Vec<Rational>> {
    let mut keys: BTreeMap<K, usize> = BTreeMap::new();
    for img in images {
        for k in img.keys() {
            let next = keys.len();
            keys.entry(k.clone()).or_insert(next);
        }
    }
    let mut rows = vec![vec![Rational::zero(); images.len()]; keys.len()];
    for (col, img) in images.iter().enumerate() {
        for (k, v) in img {
            rows[keys[k]][col] = v.clone();
        }
    }
    rows
}

/// Rank of a map given by coordinate images.
pub fn rank_of_images<K: Ord + Clone>(images: &[BTreeMap<K, Rational>]) -> usize {
    rank(&matrix_of(images))
}

/// Whether `v` lies in the span of `images`.
pub fn in_span<K: Ord + Clone>(images: &[BTreeMap<K, Rational>], v: &BTreeMap<K, Rational>) -> bool {
    let r0 = rank_of_images(images);
    let mut all = images.to_vec();
    all.push(v.clone());
    rank_of_images(&all) == r0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{frac, rat};

    #[test]
    fn small_ranks() {
        assert_eq!(rank(&[]), 0);
        assert_eq!(rank(&[vec![rat(0), rat(0)]]), 0);
        let m = vec![
            vec![rat(1), rat(2), rat(3)],
            vec![rat(2), rat(4), rat(6)],
            vec![frac(1, 2), rat(0), rat(1)],
        ];
        assert_eq!(rank(&m), 2);
        let id: Vec<Vec<Rational>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { rat(1) } else { rat(0) }).collect())
            .collect();
        assert_eq!(rank(&id), 4);
    }
}
