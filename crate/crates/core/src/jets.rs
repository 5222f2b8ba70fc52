//! Truncated multivariate power series ("jets") and plain polynomials.
//!
//! A [`Jet`] stores Taylor coefficients in the normalization
//! `coeff[α] = ∂^α g(center) / α!`, sparsely, keyed by exponent tuple. All
//! products are truncated at the jet's `cap` (maximum total degree kept), which
//! is what makes higher-order derivatives of compositions like
//! `log(p(x | θ* + u))` available without symbolic differentiation.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{factorial, Scalar};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, index: usize) -> Self {
        let mut e = vec![0; dim];
        e[index] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Degree restricted to a set of positions.
    pub fn degree_in(&self, positions: impl IntoIterator<Item = usize>) -> u32 {
        positions.into_iter().map(|p| self.0[p]).sum()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_minus(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `α! = Π α_i!`, the factor between a Taylor coefficient and the derivative.
    pub fn factorial(&self) -> BigInt {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    /// Indices of variables repeated by multiplicity, e.g. (2,0,1) -> [0,0,2].
    pub fn to_index_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
            .collect()
    }

    pub fn from_index_list(dim: usize, indices: &[usize]) -> Self {
        let mut e = vec![0; dim];
        for &i in indices {
            e[i] += 1;
        }
        MultiIndex(e)
    }

    /// All multi-indices of exactly `degree` in `dim` variables, graded
    /// lexicographic order (higher power on earlier variables first).
    pub fn of_degree(dim: usize, degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dim];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for e in (0..=left).rev() {
                cur[pos] = e;
                rec(pos + 1, left - e, cur, out);
            }
            cur[pos] = 0;
        }
        if dim == 0 {
            if degree == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(0, degree, &mut cur, &mut out);
        out
    }

    /// Degree-`degree` multi-indices supported on `positions` only, embedded in `dim`.
    pub fn of_degree_on(dim: usize, positions: &[usize], degree: u32) -> Vec<MultiIndex> {
        MultiIndex::of_degree(positions.len(), degree)
            .into_iter()
            .map(|sub| {
                let mut e = vec![0; dim];
                for (k, &p) in positions.iter().enumerate() {
                    e[p] = sub.0[k];
                }
                MultiIndex(e)
            })
            .collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

type Terms<S> = BTreeMap<MultiIndex, S>;

fn accumulate<S: Scalar>(acc: &mut Terms<S>, key: MultiIndex, value: S) {
    use std::collections::btree_map::Entry;
    match acc.entry(key) {
        Entry::Vacant(v) => {
            if !value.is_zero() {
                v.insert(value);
            }
        }
        Entry::Occupied(mut o) => {
            let sum = o.get().clone() + value;
            if sum.is_zero() {
                o.remove();
            } else {
                *o.get_mut() = sum;
            }
        }
    }
}

fn combine<S: Scalar>(a: &Terms<S>, b: &Terms<S>, negate_b: bool) -> Terms<S> {
    let mut out = a.clone();
    for (k, v) in b {
        let v = if negate_b { -v.clone() } else { v.clone() };
        accumulate(&mut out, k.clone(), v);
    }
    out
}

fn multiply<S: Scalar>(a: &Terms<S>, b: &Terms<S>, cap: Option<u32>) -> Terms<S> {
    let mut rhs: Vec<(u32, &MultiIndex, &S)> =
        b.iter().map(|(k, v)| (k.total_degree(), k, v)).collect();
    rhs.sort_by_key(|t| t.0);
    let mut out = Terms::new();
    for (ka, va) in a {
        let da = ka.total_degree();
        for &(db, kb, vb) in &rhs {
            if let Some(c) = cap {
                if da + db > c {
                    break;
                }
            }
            accumulate(&mut out, ka.plus(kb), va.clone() * vb.clone());
        }
    }
    out
}

fn scale_terms<S: Scalar>(a: &Terms<S>, s: &S) -> Terms<S> {
    if s.is_zero() {
        return Terms::new();
    }
    a.iter()
        .map(|(k, v)| (k.clone(), v.clone() * s.clone()))
        .filter(|(_, v)| !v.is_zero())
        .collect()
}

fn power<S: Scalar>(dim: usize, base: &Terms<S>, exp: u32, cap: Option<u32>) -> Terms<S> {
    let mut result: Terms<S> = BTreeMap::from([(MultiIndex::zeros(dim), S::one())]);
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = multiply(&result, &b, cap);
        }
        e >>= 1;
        if e > 0 {
            b = multiply(&b, &b, cap);
        }
    }
    result
}

fn substitute_terms<S: Scalar>(
    dim: usize,
    target: &Terms<S>,
    map: &[(usize, Polynomial<S>)],
    cap: Option<u32>,
) -> Result<Terms<S>> {
    let mut images: Vec<Terms<S>> = (0..dim)
        .map(|i| BTreeMap::from([(MultiIndex::unit(dim, i), S::one())]))
        .collect();
    for (var, poly) in map {
        if *var >= dim {
            return Err(Error::IndexOutOfRange { index: *var, dim });
        }
        if poly.dim != dim {
            return Err(Error::DimensionMismatch(format!(
                "substitution image has dimension {}, expected {}",
                poly.dim, dim
            )));
        }
        images[*var] = poly.coeffs.clone();
    }
    // powers[i][k] = images[i]^k, built lazily
    let mut powers: Vec<Vec<Terms<S>>> = images
        .iter()
        .map(|_| vec![BTreeMap::from([(MultiIndex::zeros(dim), S::one())])])
        .collect();
    let mut out = Terms::new();
    for (alpha, coeff) in target {
        let mut term: Terms<S> = BTreeMap::from([(MultiIndex::zeros(dim), coeff.clone())]);
        for (i, &e) in alpha.exponents().iter().enumerate() {
            if e == 0 {
                continue;
            }
            while powers[i].len() <= e as usize {
                let next = multiply(powers[i].last().unwrap(), &images[i], cap);
                powers[i].push(next);
            }
            term = multiply(&term, &powers[i][e as usize], cap);
            if term.is_empty() {
                break;
            }
        }
        for (k, v) in term {
            accumulate(&mut out, k, v);
        }
    }
    Ok(out)
}

/// Truncated multivariate Taylor series around an implicit expansion point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    dim: usize,
    cap: u32,
    coeffs: Terms<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn zero(dim: usize, cap: u32) -> Self {
        Jet {
            dim,
            cap,
            coeffs: Terms::new(),
        }
    }

    pub fn constant(dim: usize, cap: u32, c: S) -> Self {
        let mut j = Jet::zero(dim, cap);
        accumulate(&mut j.coeffs, MultiIndex::zeros(dim), c);
        j
    }

    /// The jet of `θ ↦ center_offset + u_index`.
    pub fn seed_variable(index: usize, dim: usize, cap: u32, center_offset: S) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        if cap < 1 {
            return Err(Error::InvalidCap);
        }
        let mut j = Jet::constant(dim, cap, center_offset);
        j.coeffs.insert(MultiIndex::unit(dim, index), S::one());
        Ok(j)
    }

    /// Builds a jet from arbitrary terms, dropping those above `cap`.
    pub fn from_terms(dim: usize, cap: u32, terms: impl IntoIterator<Item = (MultiIndex, S)>) -> Self {
        let mut j = Jet::zero(dim, cap);
        for (k, v) in terms {
            assert_eq!(k.dim(), dim, "multi-index dimension");
            if k.total_degree() <= cap {
                accumulate(&mut j.coeffs, k, v);
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> S {
        self.coeffs.get(alpha).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> S {
        self.coefficient(&MultiIndex::zeros(self.dim))
    }

    /// `∂^α g` at the expansion point: `α! · coeff[α]`.
    pub fn derivative_value(&self, alpha: &MultiIndex) -> S {
        self.coefficient(alpha) * S::from_bigint(&alpha.factorial())
    }

    fn check_compatible(&self, other: &Jet<S>) -> Result<()> {
        if self.dim != other.dim || self.cap != other.cap {
            return Err(Error::DimensionMismatch(format!(
                "jets of (dim {}, cap {}) and (dim {}, cap {})",
                self.dim, self.cap, other.dim, other.cap
            )));
        }
        Ok(())
    }

    fn with_terms(&self, coeffs: Terms<S>) -> Jet<S> {
        Jet {
            dim: self.dim,
            cap: self.cap,
            coeffs,
        }
    }

    pub fn add(&self, other: &Jet<S>) -> Result<Jet<S>> {
        self.check_compatible(other)?;
        Ok(self.with_terms(combine(&self.coeffs, &other.coeffs, false)))
    }

    pub fn sub(&self, other: &Jet<S>) -> Result<Jet<S>> {
        self.check_compatible(other)?;
        Ok(self.with_terms(combine(&self.coeffs, &other.coeffs, true)))
    }

    pub fn mul(&self, other: &Jet<S>) -> Result<Jet<S>> {
        self.check_compatible(other)?;
        Ok(self.with_terms(multiply(&self.coeffs, &other.coeffs, Some(self.cap))))
    }

    /// Series inversion of `other` followed by a product.
    pub fn div(&self, other: &Jet<S>) -> Result<Jet<S>> {
        self.check_compatible(other)?;
        let inv = other.recip()?;
        self.mul(&inv)
    }

    pub fn recip(&self) -> Result<Jet<S>> {
        let c = self.constant_term();
        if c.is_zero() {
            return Err(Error::DivisionByZeroConstantTerm);
        }
        let inv_c = S::one() / c;
        // u = self / c - 1 has zero constant term; 1/(1+u) = Σ (-u)^k.
        let mut u = scale_terms(&self.coeffs, &inv_c);
        u.remove(&MultiIndex::zeros(self.dim));
        let one = Jet::constant(self.dim, self.cap, S::one());
        let mut s = one.clone();
        for _ in 0..self.cap {
            let us = multiply(&u, &s.coeffs, Some(self.cap));
            s = one.with_terms(combine(&one.coeffs, &us, true));
        }
        Ok(s.scale(&inv_c))
    }

    pub fn powi(&self, exp: u32) -> Jet<S> {
        self.with_terms(power(self.dim, &self.coeffs, exp, Some(self.cap)))
    }

    pub fn neg(&self) -> Jet<S> {
        self.with_terms(self.coeffs.iter().map(|(k, v)| (k.clone(), -v.clone())).collect())
    }

    pub fn scale(&self, s: &S) -> Jet<S> {
        self.with_terms(scale_terms(&self.coeffs, s))
    }

    /// `log ∘ self`. In exact mode the constant term must be exactly 1, since
    /// `log c` of other rationals is not representable.
    pub fn log(&self) -> Result<Jet<S>> {
        let c = self.constant_term();
        if !c.is_positive() {
            return Err(Error::NonPositiveConstantTerm);
        }
        let log_c = c.ln().ok_or(Error::ExactLogOfNonUnit)?;
        let inv_c = S::one() / c;
        let mut w = scale_terms(&self.coeffs, &inv_c);
        w.remove(&MultiIndex::zeros(self.dim));
        let n = self.cap.max(1);
        let coef = |k: u32| {
            let v = S::one() / S::from_i64(k as i64);
            if k % 2 == 1 {
                v
            } else {
                -v
            }
        };
        // Horner: log(1+w) = w (c1 + w (c2 + w (c3 + ...)))
        let mut s: Terms<S> = BTreeMap::from([(MultiIndex::zeros(self.dim), coef(n))]);
        for k in (1..n).rev() {
            let ws = multiply(&w, &s, Some(self.cap));
            s = combine(&BTreeMap::from([(MultiIndex::zeros(self.dim), coef(k))]), &ws, false);
        }
        let mut out = multiply(&w, &s, Some(self.cap));
        accumulate(&mut out, MultiIndex::zeros(self.dim), log_c);
        Ok(self.with_terms(out))
    }

    /// `∂/∂u_index`, with the cap reduced by one.
    pub fn derivative(&self, index: usize) -> Jet<S> {
        let cap = self.cap.saturating_sub(1);
        let mut out = Terms::new();
        for (k, v) in &self.coeffs {
            let e = k.exponents()[index];
            if e == 0 {
                continue;
            }
            let mut ex = k.exponents().to_vec();
            ex[index] -= 1;
            let key = MultiIndex(ex);
            if key.total_degree() <= cap {
                accumulate(&mut out, key, v.clone() * S::from_i64(e as i64));
            }
        }
        Jet {
            dim: self.dim,
            cap,
            coeffs: out,
        }
    }

    pub fn truncate(&self, cap: u32) -> Jet<S> {
        Jet {
            dim: self.dim,
            cap: cap.min(self.cap),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.total_degree() <= cap)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Composition with polynomial images (unmapped variables stay fixed),
    /// truncated at this jet's cap. Images must have zero constant term for
    /// the truncation to stay meaningful.
    pub fn substitute(&self, map: &[(usize, Polynomial<S>)]) -> Result<Jet<S>> {
        let coeffs = substitute_terms(self.dim, &self.coeffs, map, Some(self.cap))?;
        Ok(self.with_terms(coeffs))
    }

    pub fn to_polynomial(&self) -> Polynomial<S> {
        Polynomial {
            dim: self.dim,
            coeffs: self.coeffs.clone(),
        }
    }
}

/// Right-hand operand of [`jet_arith`].
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a, S> {
    Jet(&'a Jet<S>),
    Int(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    IntPow,
}

pub fn jet_arith<S: Scalar>(op: ArithOp, a: &Jet<S>, b: Operand<'_, S>) -> Result<Jet<S>> {
    let as_jet = |b: Operand<'_, S>| match b {
        Operand::Jet(j) => j.clone(),
        Operand::Int(v) => Jet::constant(a.dim, a.cap, S::from_i64(v)),
    };
    match op {
        ArithOp::Add => a.add(&as_jet(b)),
        ArithOp::Sub => a.sub(&as_jet(b)),
        ArithOp::Mul => a.mul(&as_jet(b)),
        ArithOp::Div => a.div(&as_jet(b)),
        ArithOp::IntPow => match b {
            Operand::Int(e) if e >= 0 => Ok(a.powi(e as u32)),
            Operand::Int(e) => Err(Error::InvalidExponent(e)),
            Operand::Jet(_) => Err(Error::InvalidExponent(-1)),
        },
    }
}

/// Sparse multivariate polynomial with no truncation contract.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<S> {
    dim: usize,
    coeffs: Terms<S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            coeffs: Terms::new(),
        }
    }

    pub fn constant(dim: usize, c: S) -> Self {
        Polynomial::monomial(MultiIndex::zeros(dim), c)
    }

    pub fn variable(index: usize, dim: usize) -> Self {
        Polynomial::monomial(MultiIndex::unit(dim, index), S::one())
    }

    pub fn monomial(alpha: MultiIndex, c: S) -> Self {
        let dim = alpha.dim();
        let mut p = Polynomial::zero(dim);
        accumulate(&mut p.coeffs, alpha, c);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (MultiIndex, S)>) -> Self {
        let mut p = Polynomial::zero(dim);
        for (k, v) in terms {
            assert_eq!(k.dim(), dim, "multi-index dimension");
            accumulate(&mut p.coeffs, k, v);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> S {
        self.coeffs.get(alpha).cloned().unwrap_or_else(S::zero)
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::total_degree).max().unwrap_or(0)
    }

    fn check_dim(&self, other: &Polynomial<S>) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "polynomials of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial<S>) -> Result<Polynomial<S>> {
        self.check_dim(other)?;
        Ok(Polynomial {
            dim: self.dim,
            coeffs: combine(&self.coeffs, &other.coeffs, false),
        })
    }

    pub fn sub(&self, other: &Polynomial<S>) -> Result<Polynomial<S>> {
        self.check_dim(other)?;
        Ok(Polynomial {
            dim: self.dim,
            coeffs: combine(&self.coeffs, &other.coeffs, true),
        })
    }

    pub fn mul(&self, other: &Polynomial<S>) -> Result<Polynomial<S>> {
        self.check_dim(other)?;
        Ok(Polynomial {
            dim: self.dim,
            coeffs: multiply(&self.coeffs, &other.coeffs, None),
        })
    }

    pub fn scale(&self, s: &S) -> Polynomial<S> {
        Polynomial {
            dim: self.dim,
            coeffs: scale_terms(&self.coeffs, s),
        }
    }

    pub fn powi(&self, exp: u32) -> Polynomial<S> {
        Polynomial {
            dim: self.dim,
            coeffs: power(self.dim, &self.coeffs, exp, None),
        }
    }

    pub fn truncate(&self, cap: u32) -> Polynomial<S> {
        Polynomial::from_terms(
            self.dim,
            self.coeffs
                .iter()
                .filter(|(k, _)| k.total_degree() <= cap)
                .map(|(k, v)| (k.clone(), v.clone())),
        )
    }

    pub fn substitute(&self, map: &[(usize, Polynomial<S>)]) -> Result<Polynomial<S>> {
        Ok(Polynomial {
            dim: self.dim,
            coeffs: substitute_terms(self.dim, &self.coeffs, map, None)?,
        })
    }

    pub fn evaluate(&self, point: &[S]) -> S {
        assert_eq!(point.len(), self.dim, "evaluation point dimension");
        let mut acc = S::zero();
        for (k, v) in &self.coeffs {
            let mut t = v.clone();
            for (x, &e) in point.iter().zip(k.exponents()) {
                for _ in 0..e {
                    t = t * x.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Largest monomial dividing every term (componentwise minimum exponent).
    pub fn common_monomial(&self) -> Option<MultiIndex> {
        let mut iter = self.coeffs.keys();
        let first = iter.next()?.exponents().to_vec();
        let min = iter.fold(first, |mut acc, k| {
            for (a, &e) in acc.iter_mut().zip(k.exponents()) {
                *a = (*a).min(e);
            }
            acc
        });
        Some(MultiIndex(min))
    }

    /// Exact division by a monomial that divides every term.
    pub fn divide_by_monomial(&self, alpha: &MultiIndex) -> Option<Polynomial<S>> {
        let mut out = Polynomial::zero(self.dim);
        for (k, v) in &self.coeffs {
            out.coeffs.insert(k.checked_minus(alpha)?, v.clone());
        }
        Some(out)
    }

    pub fn to_jet(&self, cap: u32) -> Jet<S> {
        Jet::from_terms(self.dim, cap, self.coeffs.iter().map(|(k, v)| (k.clone(), v.clone())))
    }
}

impl<S: Scalar + fmt::Display> fmt::Display for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({v})")?;
            for (i, &e) in k.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*t{}", i + 1)?,
                    _ => write!(f, "*t{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat, Rational};

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn jet1(cap: u32, coeffs: &[(u32, Rational)]) -> Jet<Rational> {
        Jet::from_terms(1, cap, coeffs.iter().map(|(e, v)| (mi(&[*e]), v.clone())))
    }

    #[test]
    fn seed_variable_examples() {
        let j = Jet::seed_variable(0, 2, 4, rat(1, 2)).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j.constant_term(), rat(1, 2));
        assert_eq!(j.coefficient(&mi(&[1, 0])), int(1));

        let j = Jet::seed_variable(1, 2, 4, int(0)).unwrap();
        assert_eq!(j.len(), 1);
        assert_eq!(j.coefficient(&mi(&[0, 1])), int(1));

        assert_eq!(
            Jet::seed_variable(3, 2, 4, int(0)),
            Err(Error::IndexOutOfRange { index: 3, dim: 2 })
        );
    }

    #[test]
    fn monomial_product() {
        let a = Jet::seed_variable(0, 2, 2, int(0)).unwrap();
        let b = Jet::seed_variable(1, 2, 2, int(0)).unwrap();
        let p = jet_arith(ArithOp::Mul, &a, Operand::Jet(&b)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.coefficient(&mi(&[1, 1])), int(1));
    }

    #[test]
    fn geometric_series_by_division() {
        // long division of 1 by (1 - u): 1, u, u^2, u^3
        let one = Jet::constant(1, 3, int(1));
        let b = jet1(3, &[(0, int(1)), (1, int(-1))]);
        let q = jet_arith(ArithOp::Div, &one, Operand::Jet(&b)).unwrap();
        assert_eq!(q, jet1(3, &[(0, int(1)), (1, int(1)), (2, int(1)), (3, int(1))]));
    }

    #[test]
    fn integer_power_binomial() {
        let a = Jet::seed_variable(0, 1, 2, rat(1, 2)).unwrap();
        let p = jet_arith(ArithOp::IntPow, &a, Operand::Int(2)).unwrap();
        assert_eq!(p, jet1(2, &[(0, rat(1, 4)), (1, int(1)), (2, int(1))]));
        assert!(jet_arith(ArithOp::IntPow, &a, Operand::Int(-1)).is_err());
    }

    #[test]
    fn division_by_zero_constant() {
        let one = Jet::constant(1, 3, int(1));
        let u = Jet::seed_variable(0, 1, 3, int(0)).unwrap();
        assert_eq!(one.div(&u), Err(Error::DivisionByZeroConstantTerm));
    }

    #[test]
    fn mismatched_caps_rejected() {
        let a = Jet::<Rational>::constant(1, 3, int(1));
        let b = Jet::<Rational>::constant(1, 4, int(1));
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn mercator_series() {
        let a = jet1(3, &[(0, int(1)), (1, int(1))]);
        let l = a.log().unwrap();
        assert_eq!(l, jet1(3, &[(1, int(1)), (2, rat(-1, 2)), (3, rat(1, 3))]));
    }

    #[test]
    fn log_errors_and_unit() {
        let z = jet1(3, &[(1, int(1))]);
        assert_eq!(z.log(), Err(Error::NonPositiveConstantTerm));
        let two = jet1(3, &[(0, int(2)), (1, int(1))]);
        assert_eq!(two.log(), Err(Error::ExactLogOfNonUnit));
        let one = Jet::constant(2, 3, int(1));
        assert!(one.log().unwrap().is_empty());
    }

    #[test]
    fn float_log_non_unit_constant() {
        let a = Jet::<f64>::from_terms(1, 2, [(mi(&[0]), 2.0), (mi(&[1]), 2.0)]);
        let l = a.log().unwrap();
        assert!((l.constant_term() - 2f64.ln()).abs() < 1e-15);
        assert!((l.coefficient(&mi(&[1])) - 1.0).abs() < 1e-15);
        assert!((l.coefficient(&mi(&[2])) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn substitution_examples() {
        // θ1² with θ1 -> θ2 θ1 gives θ1² θ2²
        let t = Polynomial::monomial(mi(&[2, 0]), int(1));
        let img = Polynomial::monomial(mi(&[1, 1]), int(1));
        let s = t.substitute(&[(0, img.clone())]).unwrap();
        assert_eq!(s, Polynomial::monomial(mi(&[2, 2]), int(1)));

        // K = θ1² + 8θ2⁴ under θ1 -> θ2θ1 is θ2²(θ1² + 8θ2²)
        let k = Polynomial::from_terms(2, [(mi(&[2, 0]), int(1)), (mi(&[0, 4]), int(8))]);
        let s = k.substitute(&[(0, img)]).unwrap();
        let expected = Polynomial::from_terms(2, [(mi(&[2, 2]), int(1)), (mi(&[0, 4]), int(8))]);
        assert_eq!(s, expected);
        assert_eq!(s.common_monomial(), Some(mi(&[0, 2])));

        // identity
        assert_eq!(k.substitute(&[]).unwrap(), k);
        let bad = Polynomial::variable(0, 3);
        assert!(matches!(k.substitute(&[(0, bad)]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn coefficient_lookup() {
        let j = Jet::seed_variable(0, 2, 3, int(0)).unwrap();
        assert_eq!(j.coefficient(&mi(&[1, 0])), int(1));
        assert_eq!(j.coefficient(&mi(&[0, 3])), int(0));
    }

    #[test]
    fn derivative_reduces_cap() {
        // u^3 -> 3u^2
        let j = jet1(3, &[(3, int(1))]);
        let d = j.derivative(0);
        assert_eq!(d.cap(), 2);
        assert_eq!(d.coefficient(&mi(&[2])), int(3));
        assert_eq!(j.derivative_value(&mi(&[3])), int(6));
    }

    #[test]
    fn graded_lex_order() {
        let v = MultiIndex::of_degree(2, 2);
        assert_eq!(v, vec![mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])]);
        let v = MultiIndex::of_degree_on(3, &[1, 2], 1);
        assert_eq!(v, vec![mi(&[0, 1, 0]), mi(&[0, 0, 1])]);
        assert_eq!(MultiIndex::of_degree(3, 3).len(), 10);
    }

    #[test]
    fn index_lists() {
        let a = mi(&[2, 0, 1]);
        assert_eq!(a.to_index_list(), vec![0, 0, 2]);
        assert_eq!(MultiIndex::from_index_list(3, &[2, 0, 0]), a);
        assert_eq!(a.factorial(), BigInt::from(2));
    }
}
