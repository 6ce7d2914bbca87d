//! Brute-force rank oracles shared by the integration tests and the
//! acceptance harness. They share no code with the library's complexes.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fedpair_core::coeffs::{rat, Poly, Rational};
use fedpair_core::liepair::Adapted;
use num_traits::Zero;

fn sign(odd: bool) -> Rational {
    if odd {
        rat(-1)
    } else {
        rat(1)
    }
}

/// Dense CE cochain oracle: cochains are maps from increasing `p`-tuples of
/// `A`-indices to `Λ^{q+1} B`, and `d` is the textbook formula.
pub fn oracle_blocks(ad: &Adapted) -> BTreeMap<(u32, i32), usize> {
    let (a, r) = (ad.a(), ad.r());
    let cst = |p: &Poly| p.as_constant().unwrap_or_else(Rational::zero);
    let subsets = |n: usize, k: usize| -> Vec<Vec<usize>> {
        (0..1u32 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
            .collect()
    };
    // action of ê_i on the wedge monomial `w` of Λ B, as coordinates
    let act = |i: usize, w: &[usize]| -> BTreeMap<Vec<usize>, Rational> {
        let mut out = BTreeMap::new();
        for (s, &k) in w.iter().enumerate() {
            for j in 0..r {
                let g = cst(&ad.gamma[i][k][j]);
                if g.is_zero() {
                    continue;
                }
                let mut v = w.to_vec();
                v[s] = j;
                if let Some((sign, sorted)) = sort_word(&v) {
                    *out.entry(sorted).or_insert_with(Rational::zero) += g * sign;
                }
            }
        }
        out
    };
    let mut ranks = BTreeMap::new();
    let mut dims = BTreeMap::new();
    for q in -1..r as i32 {
        let wedges = subsets(r, (q + 1) as usize);
        for p in 0..=a {
            let src = subsets(a, p);
            let dst = subsets(a, p + 1);
            dims.insert((p as u32, q), src.len() * wedges.len());
            // column for each (tuple, wedge) basis cochain
            let mut cols: Vec<Vec<Rational>> = Vec::new();
            for s in &src {
                for w in &wedges {
                    let omega = |t: &[usize]| -> BTreeMap<Vec<usize>, Rational> {
                        let mut m = BTreeMap::new();
                        if let Some((sign, sorted)) = sort_word(t) {
                            if &sorted == s {
                                m.insert(w.clone(), sign);
                            }
                        }
                        m
                    };
                    let mut col = Vec::new();
                    for tup in &dst {
                        let mut val: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
                        for (si, &i) in tup.iter().enumerate() {
                            let rest: Vec<usize> = tup.iter().enumerate().filter(|x| x.0 != si).map(|x| *x.1).collect();
                            for (wv, c) in omega(&rest) {
                                for (wk, c2) in act(i, &wv) {
                                    *val.entry(wk).or_insert_with(Rational::zero) += sign(si % 2 == 1) * &c * c2;
                                }
                            }
                        }
                        for si in 0..tup.len() {
                            for ti in si + 1..tup.len() {
                                for k in 0..a {
                                    let ck = cst(&ad.c[tup[si]][tup[ti]][k]);
                                    if ck.is_zero() {
                                        continue;
                                    }
                                    let mut args = vec![k];
                                    args.extend(tup.iter().enumerate().filter(|x| x.0 != si && x.0 != ti).map(|x| *x.1));
                                    for (wv, c) in omega(&args) {
                                        *val.entry(wv).or_insert_with(Rational::zero) +=
                                            sign((si + ti) % 2 == 1) * &ck * c;
                                    }
                                }
                            }
                        }
                        for w2 in &wedges {
                            col.push(val.get(w2).cloned().unwrap_or_else(Rational::zero));
                        }
                    }
                    cols.push(col);
                }
            }
            ranks.insert((p as u32, q), dense_rank(cols));
        }
    }
    let mut out = BTreeMap::new();
    for (&(p, q), &dim) in &dims {
        let prev = if p == 0 { 0 } else { ranks[&(p - 1, q)] };
        out.insert((p, q), dim - ranks[&(p, q)] - prev);
    }
    out
}

pub fn sort_word(w: &[usize]) -> Option<(Rational, Vec<usize>)> {
    let mut v = w.to_vec();
    let mut sign = rat(1);
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] == v[j + 1] {
                return None;
            }
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if v.windows(2).any(|x| x[0] == x[1]) {
        return None;
    }
    Some((sign, v))
}

/// Plain Gaussian elimination over ℚ.
pub fn dense_rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let mut rank = 0;
    let cols = rows.first().map_or(0, |r| r.len());
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let piv = rows[rank][c].clone();
        for i in 0..rows.len() {
            if i != rank && !rows[i][c].is_zero() {
                let f = &rows[i][c] / &piv;
                for j in 0..cols {
                    let v = &rows[rank][j] * &f;
                    rows[i][j] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

// Dense oracle for the cobar complex of S(V) with V of dimension r: each
// slot is an exponent vector, Δ splits exponents with binomial weights.
fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn oracle_tuples(r: usize, slots: usize, filt: u32) -> Vec<Vec<Vec<u32>>> {
    fn rec(r: usize, left: usize, budget: u32, cur: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        fn monos(r: usize, budget: u32) -> Vec<Vec<u32>> {
            if r == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for e in 0..=budget {
                for mut rest in monos(r - 1, budget - e) {
                    rest.insert(0, e);
                    out.push(rest);
                }
            }
            out
        }
        for m in monos(r, budget) {
            let used: u32 = m.iter().sum();
            cur.push(m);
            rec(r, left - 1, budget - used, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(r, slots, filt, &mut Vec::new(), &mut out);
    out
}

fn oracle_splits(e: &[u32]) -> Vec<(Vec<u32>, Vec<u32>, i64)> {
    let mut out = vec![(vec![], vec![], 1i64)];
    for &k in e {
        let mut next = Vec::new();
        for (a, b, w) in &out {
            for i in 0..=k {
                let (mut a2, mut b2) = (a.clone(), b.clone());
                a2.push(i);
                b2.push(k - i);
                next.push((a2, b2, w * binom(k, i)));
            }
        }
        out = next;
    }
    out
}

fn oracle_cobar(t: &[Vec<u32>], r: usize) -> BTreeMap<Vec<Vec<u32>>, i64> {
    let mut out = BTreeMap::new();
    let k = t.len();
    if k == 0 {
        return out;
    }
    let mut add = |v: Vec<Vec<u32>>, c: i64| *out.entry(v).or_insert(0) += c;
    let mut first = vec![vec![0; r]];
    first.extend(t.iter().cloned());
    add(first, 1);
    for i in 0..k {
        for (a, b, w) in oracle_splits(&t[i]) {
            let mut v = t[..i].to_vec();
            v.push(a);
            v.push(b);
            v.extend(t[i + 1..].iter().cloned());
            add(v, if i % 2 == 0 { -w } else { w });
        }
    }
    let mut last = t.to_vec();
    last.push(vec![0; r]);
    add(last, if k % 2 == 0 { -1 } else { 1 });
    out
}

pub fn oracle_betti(r: usize, filt: u32, max_v: i32) -> BTreeMap<i32, usize> {
    let mut dims = BTreeMap::new();
    let mut ranks = BTreeMap::new();
    for v in -1..=max_v {
        let src = oracle_tuples(r, (v + 1) as usize, filt);
        let dst = oracle_tuples(r, (v + 2) as usize, filt);
        let index: BTreeMap<_, _> = dst.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let rows: Vec<Vec<Rational>> = src
            .iter()
            .map(|t| {
                let mut row = vec![Rational::zero(); dst.len()];
                for (k, c) in oracle_cobar(t, r) {
                    row[index[&k]] += rat(c);
                }
                row
            })
            .collect();
        dims.insert(v, src.len());
        ranks.insert(v, dense_rank(rows));
    }
    (-1..=max_v)
        .map(|v| (v, dims[&v] - ranks[&v] - if v == -1 { 0 } else { ranks[&(v - 1)] }))
        .collect()
}

