//! Linear algebra on random variables over a finite support.
//!
//! A random variable is a vector of values indexed by the support of `q`.
//! "Almost surely" therefore means "at every support point".

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modelspec::TrueDistribution;
use crate::scalar::Scalar;

/// Relative tolerance for float-mode rank decisions.
pub const FLOAT_RANK_TOL: f64 = 1e-9;

/// The law of `X`: weights on the support outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Support<S> {
    pub labels: Vec<String>,
    pub weights: Vec<S>,
}

impl<S: Scalar> Support<S> {
    pub fn from_true_distribution(q: &TrueDistribution) -> Self {
        let idx = q.support();
        Support {
            labels: idx.iter().map(|&i| q.outcomes[i].clone()).collect(),
            weights: idx.iter().map(|&i| S::from_rational(&q.weights[i])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomVariable<S> {
    pub values: Vec<S>,
}

impl<S: Scalar> RandomVariable<S> {
    pub fn new(values: Vec<S>) -> Self {
        RandomVariable { values }
    }

    pub fn constant(len: usize, c: S) -> Self {
        RandomVariable {
            values: vec![c; len],
        }
    }

    pub fn zero(len: usize) -> Self {
        Self::constant(len, S::zero())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        RandomVariable {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        RandomVariable {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.clone() * b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        RandomVariable {
            values: self.values.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// `Σ c_k rv_k`.
    pub fn combination(rvs: &[RandomVariable<S>], coeffs: &[S]) -> Self {
        let len = rvs.first().map_or(0, |r| r.len());
        rvs.iter()
            .zip(coeffs)
            .fold(Self::zero(len), |acc, (rv, c)| acc.add(&rv.scale(c)))
    }
}

fn check_support<S: Scalar>(rv: &RandomVariable<S>, q: &Support<S>) -> Result<()> {
    if rv.len() != q.len() {
        return Err(Error::SupportMismatch);
    }
    Ok(())
}

pub fn expectation<S: Scalar>(rv: &RandomVariable<S>, q: &Support<S>) -> Result<S> {
    check_support(rv, q)?;
    Ok(rv
        .values
        .iter()
        .zip(&q.weights)
        .fold(S::zero(), |acc, (v, w)| acc + v.clone() * w.clone()))
}

/// True iff `rv` vanishes at every support point (exactly, in rational mode).
pub fn is_as_zero<S: Scalar>(rv: &RandomVariable<S>, q: &Support<S>) -> bool {
    if rv.len() != q.len() {
        return false;
    }
    let scale = rv.values.iter().map(Scalar::magnitude).fold(0.0, f64::max);
    rv.values
        .iter()
        .all(|v| v.negligible(FLOAT_RANK_TOL * scale.max(1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GramMatrix<S> {
    pub entries: Vec<Vec<S>>,
    pub labels: Vec<String>,
}

impl<S: Scalar> GramMatrix<S> {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| self.entries[i][j] == self.entries[j][i]))
    }
}

pub fn gram<S: Scalar>(rvs: &[RandomVariable<S>], q: &Support<S>) -> Result<GramMatrix<S>> {
    for rv in rvs {
        check_support(rv, q)?;
    }
    let n = rvs.len();
    let mut entries = vec![vec![S::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = expectation(&rvs[i].mul(&rvs[j]), q)?;
            entries[j][i] = v.clone();
            entries[i][j] = v;
        }
    }
    Ok(GramMatrix {
        entries,
        labels: (0..n).map(|i| format!("X{}", i + 1)).collect(),
    })
}

fn matrix_tol<S: Scalar>(m: &[Vec<S>]) -> f64 {
    let max = m
        .iter()
        .flat_map(|r| r.iter().map(Scalar::magnitude))
        .fold(0.0, f64::max);
    FLOAT_RANK_TOL * max.max(f64::MIN_POSITIVE)
}

/// Reduced row echelon form; returns pivot columns.
fn rref<S: Scalar>(m: &mut [Vec<S>], tol: f64) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let best = (r..rows)
            .filter(|&i| !m[i][c].negligible(tol))
            .max_by(|&a, &b| m[a][c].magnitude().total_cmp(&m[b][c].magnitude()));
        let Some(p) = best else {
            for row in m.iter_mut().skip(r) {
                row[c] = S::zero();
            }
            continue;
        };
        m.swap(r, p);
        let inv = S::one() / m[r][c].clone();
        for v in m[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let factor = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x = x.clone() - factor.clone() * y.clone();
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank and a kernel basis of a square or rectangular matrix.
pub fn rank_kernel<S: Scalar>(m: &[Vec<S>]) -> (usize, Vec<Vec<S>>) {
    let cols = m.first().map_or(0, |r| r.len());
    let tol = matrix_tol(m);
    let mut a = m.to_vec();
    let pivots = rref(&mut a, tol);
    let mut kernel = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![S::zero(); cols];
        v[free] = S::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free].clone();
        }
        kernel.push(v);
    }
    (pivots.len(), kernel)
}

pub fn gram_rank_kernel<S: Scalar>(g: &GramMatrix<S>) -> (usize, Vec<Vec<S>>) {
    rank_kernel(&g.entries)
}

/// Dimension of the span of `rvs`, from the outcomes × rvs value matrix.
pub fn span_dimension<S: Scalar>(rvs: &[RandomVariable<S>]) -> usize {
    if rvs.is_empty() {
        return 0;
    }
    let rows: Vec<Vec<S>> = (0..rvs[0].len())
        .map(|x| rvs.iter().map(|rv| rv.values[x].clone()).collect())
        .collect();
    rank_kernel(&rows).0
}

/// Greedy lowest-index-first maximal independent subset.
pub fn greedy_independent<S: Scalar>(rvs: &[RandomVariable<S>]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..rvs.len() {
        let mut trial: Vec<RandomVariable<S>> = chosen.iter().map(|&k| rvs[k].clone()).collect();
        trial.push(rvs[i].clone());
        if span_dimension(&trial) == trial.len() {
            chosen.push(i);
        }
    }
    chosen
}

/// Solves `a x = b` for square non-singular `a`.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Option<Vec<S>> {
    let n = a.len();
    let mut aug: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let tol = matrix_tol(a);
    let pivots = rref(&mut aug, tol);
    if pivots.len() != n || pivots.iter().any(|&p| p >= n) {
        return None;
    }
    Some(aug.iter().map(|r| r[n].clone()).collect())
}

/// Symmetric elimination with diagonal pivoting; returns the pivots if every
/// pivot is non-negative (the matrix is non-negative definite), else `None`.
pub fn nonnegative_pivots<S: Scalar>(m: &[Vec<S>]) -> Option<Vec<S>> {
    let tol = matrix_tol(m);
    let mut a = m.to_vec();
    let mut remaining: Vec<usize> = (0..a.len()).collect();
    let mut pivots = Vec::new();
    while !remaining.is_empty() {
        let (pos, &k) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1][*x.1].to_f64().total_cmp(&a[*y.1][*y.1].to_f64()))
            .unwrap();
        let d = a[k][k].clone();
        if d.negligible(tol) {
            // a zero diagonal forces the rest of the submatrix to vanish
            let all_zero = remaining
                .iter()
                .all(|&i| remaining.iter().all(|&j| a[i][j].negligible(tol)));
            if !all_zero {
                return None;
            }
            pivots.extend(remaining.iter().map(|_| S::zero()));
            return Some(pivots);
        }
        if !d.is_positive() {
            return None;
        }
        remaining.remove(pos);
        for &i in &remaining {
            let f = a[i][k].clone() / d.clone();
            for &j in &remaining {
                let sub = f.clone() * a[k][j].clone();
                a[i][j] = a[i][j].clone() - sub;
            }
        }
        pivots.push(d);
    }
    Some(pivots)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dependency<S> {
    Independent,
    Coefficients(Vec<S>),
}

/// Expresses `target` as an a.s. linear combination of `basis`, if possible.
pub fn dependency<S: Scalar>(
    target: &RandomVariable<S>,
    basis: &[RandomVariable<S>],
    q: &Support<S>,
) -> Result<Dependency<S>> {
    check_support(target, q)?;
    if basis.is_empty() {
        return Ok(if is_as_zero(target, q) {
            Dependency::Coefficients(Vec::new())
        } else {
            Dependency::Independent
        });
    }
    let g = gram(basis, q)?;
    let rhs = basis
        .iter()
        .map(|b| expectation(&target.mul(b), q))
        .collect::<Result<Vec<_>>>()?;
    let a = solve(&g.entries, &rhs).ok_or(Error::BasisNotIndependent)?;
    let residual = target.add(&RandomVariable::combination(basis, &a).scale(&-S::one()));
    let scale = target.values.iter().map(Scalar::magnitude).fold(1.0, f64::max);
    let exact = residual
        .values
        .iter()
        .all(|v| v.negligible(FLOAT_RANK_TOL * scale));
    Ok(if exact {
        Dependency::Coefficients(a)
    } else {
        Dependency::Independent
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat, Rational};

    fn q21() -> Support<Rational> {
        Support {
            labels: vec!["x0".into(), "x1".into(), "x2".into()],
            weights: vec![rat(1, 4), rat(1, 2), rat(1, 4)],
        }
    }

    fn rv(v: &[i64]) -> RandomVariable<Rational> {
        RandomVariable::new(v.iter().map(|&x| int(x)).collect())
    }

    #[test]
    fn expectations() {
        let q = q21();
        let d1 = rv(&[2, 0, -2]);
        assert_eq!(expectation(&d1, &q).unwrap(), int(0));
        assert_eq!(expectation(&rv(&[1, 1, 1]), &q).unwrap(), int(1));
        assert_eq!(expectation(&d1.mul(&d1), &q).unwrap(), int(2));
        assert_eq!(expectation(&rv(&[1, 1]), &q), Err(Error::SupportMismatch));
    }

    #[test]
    fn first_derivative_gram() {
        let q = q21();
        let g = gram(&[rv(&[2, 0, -2]), rv(&[0, 0, 0])], &q).unwrap();
        assert_eq!(g.entries, vec![vec![int(2), int(0)], vec![int(0), int(0)]]);
        assert!(g.is_symmetric());
        let g1 = gram(&[rv(&[1, 1, 1])], &q).unwrap();
        assert_eq!(g1.entries, vec![vec![int(1)]]);
    }

    #[test]
    fn ranks_and_kernels() {
        let m = vec![vec![int(2), int(0)], vec![int(0), int(0)]];
        assert_eq!(rank_kernel(&m), (1, vec![vec![int(0), int(1)]]));
        let id: Vec<Vec<Rational>> =
            (0..3).map(|i| (0..3).map(|j| int((i == j) as i64)).collect()).collect();
        assert_eq!(rank_kernel(&id), (3, vec![]));
        let ones = vec![vec![int(1), int(1)], vec![int(1), int(1)]];
        assert_eq!(rank_kernel(&ones), (1, vec![vec![int(-1), int(1)]]));
    }

    #[test]
    fn dependencies() {
        let q = q21();
        let d1 = rv(&[2, 0, -2]);
        assert_eq!(
            dependency(&d1, std::slice::from_ref(&d1), &q).unwrap(),
            Dependency::Coefficients(vec![int(1)])
        );
        assert_eq!(
            dependency(&rv(&[1, 1, 1]), std::slice::from_ref(&d1), &q).unwrap(),
            Dependency::Independent
        );
        assert_eq!(
            dependency(&d1, &[d1.clone(), d1.scale(&int(2))], &q),
            Err(Error::BasisNotIndependent)
        );
    }

    #[test]
    fn almost_sure_zero() {
        let q = q21();
        assert!(is_as_zero(&rv(&[0, 0, 0]), &q));
        assert!(!is_as_zero(&rv(&[2, 0, -2]), &q));
    }

    #[test]
    fn pivots_of_indefinite_matrix() {
        let m = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        assert!(nonnegative_pivots(&m).is_none());
        let m = vec![vec![int(2), int(1)], vec![int(1), int(1)]];
        assert_eq!(nonnegative_pivots(&m), Some(vec![int(2), rat(1, 2)]));
    }

    #[test]
    fn float_rank_with_tolerance() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]];
        assert_eq!(rank_kernel(&m).0, 1);
    }
}
