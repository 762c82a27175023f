//! Small dense linear algebra: determinants over any [`Scalar`], and exact
//! rank / row reduction over the rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::scalar::{Scalar, Q};

/// Dense rational matrix, row-major.
pub type QMatrix = Vec<Vec<Q>>;

/// Determinant by Gaussian elimination with largest-magnitude pivoting.
pub fn det<S: Scalar>(m: &[Vec<S>]) -> S {
    let n = m.len();
    if n == 0 {
        return S::s_one();
    }
    let mut a: Vec<Vec<S>> = m.to_vec();
    let mut det = S::s_one();
    for col in 0..n {
        let mut piv = None;
        let mut best = 0.0;
        for (r, row) in a.iter().enumerate().skip(col) {
            if row[col].s_is_zero() {
                continue;
            }
            let mag = row[col].as_f64().abs();
            if piv.is_none() || mag > best {
                piv = Some(r);
                best = mag;
            }
        }
        let Some(p) = piv else {
            return S::s_zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pv = a[col][col].clone();
        det = det * pv.clone();
        for r in col + 1..n {
            if a[r][col].s_is_zero() {
                continue;
            }
            let f = a[r][col].clone() / pv.clone();
            for c in col..n {
                let v = a[r][c].clone() - f.clone() * a[col][c].clone();
                a[r][c] = v;
            }
        }
    }
    det
}

/// Solves `m x = b` for square nonsingular `m` by Gaussian elimination.
pub fn solve<S: Scalar>(m: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let n = m.len();
    let mut a: Vec<Vec<S>> = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for col in 0..n {
        let mut piv = None;
        let mut best = 0.0;
        for (r, row) in a.iter().enumerate().skip(col) {
            if row[col].s_is_zero() {
                continue;
            }
            let mag = row[col].as_f64().abs();
            if piv.is_none() || mag > best {
                piv = Some(r);
                best = mag;
            }
        }
        let p = piv?;
        a.swap(p, col);
        let pv = a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].s_is_zero() {
                continue;
            }
            let f = a[r][col].clone() / pv.clone();
            for c in col..=n {
                let v = a[r][c].clone() - f.clone() * a[col][c].clone();
                a[r][c] = v;
            }
        }
    }
    Some((0..n).map(|i| a[i][n].clone() / a[i][i].clone()).collect())
}

/// Exact rank by fraction-free (Bareiss) elimination. Rows are first scaled
/// to integers.
pub fn rank(m: &[Vec<Q>]) -> usize {
    if m.is_empty() {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|row| integer_row(row)).collect();
    let rows = a.len();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = &a[r][c] * &a[i][j] - &a[i][c] * &a[r][j];
                a[i][j] = v / &prev;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        r += 1;
    }
    r
}

fn integer_row(row: &[Q]) -> Vec<BigInt> {
    let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    row.iter().map(|x| x.numer() * (&l / x.denom())).collect()
}

/// Reduced row echelon form over the rationals; returns the matrix and its
/// pivot columns.
pub fn rref(m: &[Vec<Q>]) -> (QMatrix, Vec<usize>) {
    let mut a: QMatrix = m.to_vec();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let inv = Q::one() / &a[r][c];
        for v in a[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in c..cols {
                    let v = &a[i][j] - &f * &a[r][j];
                    a[i][j] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

/// Basis of the right kernel `{x : m x = 0}`, one vector per free column.
pub fn kernel_basis(m: &[Vec<Q>], cols: usize) -> Vec<Vec<Q>> {
    if m.is_empty() {
        return (0..cols)
            .map(|i| {
                let mut v = vec![Q::zero(); cols];
                v[i] = Q::one();
                v
            })
            .collect();
    }
    let (r, pivots) = rref(m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[row][f].clone();
            }
            v
        })
        .collect()
}

/// Particular solution of `m x = b` with free variables set to zero.
pub fn solve_particular(m: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    let aug: QMatrix = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let (r, pivots) = rref(&aug);
    if pivots.contains(&cols) {
        return None;
    }
    let mut x = vec![Q::zero(); cols];
    for (row, &p) in pivots.iter().enumerate() {
        x[p] = r[row][cols].clone();
    }
    Some(x)
}

pub fn transpose(m: &[Vec<Q>], rows: usize, cols: usize) -> QMatrix {
    (0..cols)
        .map(|c| (0..rows).map(|r| m[r][c].clone()).collect())
        .collect()
}

pub fn mat_vec(m: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Q::zero(), |acc, (a, b)| acc + a * b))
        .collect()
}

pub fn max_abs(v: &[Q]) -> Q {
    v.iter()
        .map(|x| x.abs())
        .fold(Q::zero(), |a, b| if b > a { b } else { a })
}
