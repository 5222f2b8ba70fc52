//! Taylor expansion of `K(θ) = E_q[f(X|θ)]` and identity checks on it.
//!
//! `G_{i_1…i_n}` is the sum over set partitions of `{1..n}` other than the
//! single block of `Π_U ∂^U log p`. It is computed two ways: by the recurrence
//! `G_{n+1} = G_n Y_{n+1} + Y_{1..n} Y_{n+1} + ∂_{n+1} G_n` on jets, and by
//! direct enumeration of partitions (orders up to 4).

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{Jet, MultiIndex, Polynomial};
use crate::modelspec::ModelSpec;
use crate::normalize::{NormalizationResult, VanishingOrder};
use crate::scalar::{binomial, Rational, Scalar, Q};
use crate::stochlin::{is_as_zero, RandomVariable, Support};

/// Highest order for which partitions are enumerated.
pub const MAX_ENUMERATION_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct KExpansion {
    pub poly: Polynomial<Rational>,
    pub cap: u32,
    pub r: usize,
    pub m: VanishingOrder,
}

/// `K = Σ_x q(x) f(x|·)` coefficientwise.
pub fn k_taylor(f_jets: &[Jet<Rational>], q: &Support<Rational>) -> Result<Polynomial<Rational>> {
    if f_jets.len() != q.len() {
        return Err(Error::SupportMismatch);
    }
    let dim = f_jets.first().map_or(0, |j| j.dim());
    let mut acc = Polynomial::zero(dim);
    for (j, w) in f_jets.iter().zip(&q.weights) {
        acc = acc.add(&j.to_polynomial().scale(w))?;
    }
    Ok(acc)
}

pub fn k_expansion(res: &NormalizationResult) -> Result<KExpansion> {
    Ok(KExpansion {
        poly: k_taylor(&res.f_jets, &res.support)?,
        cap: res.cap,
        r: res.r,
        m: res.m,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VanishingReport {
    pub checked: usize,
    pub violations: Vec<(MultiIndex, Q)>,
}

impl VanishingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn m_for_regions(m: VanishingOrder) -> u32 {
    match m {
        VanishingOrder::Finite(m) => m,
        VanishingOrder::MaxedOut(c) => c + 1,
    }
}

/// Coefficients of `K` that must be exactly zero: degree ≤ 2m−1 in the
/// degenerate coordinates alone, and degree 1 in the first `r` times degree
/// ≤ m−1 in the degenerate ones.
pub fn verify_vanishing(k: &KExpansion) -> VanishingReport {
    let d = k.poly.dim();
    let m = m_for_regions(k.m);
    let deg: Vec<usize> = (k.r..d).collect();
    let mut indices = Vec::new();
    for n in 0..=(2 * m - 1).min(k.cap) {
        indices.extend(MultiIndex::of_degree_on(d, &deg, n));
    }
    for j in 0..k.r {
        for n in 0..m.min(k.cap) {
            for a in MultiIndex::of_degree_on(d, &deg, n) {
                indices.push(a.plus(&MultiIndex::unit(d, j)));
            }
        }
    }
    let violations = indices
        .iter()
        .filter_map(|a| {
            let c = k.poly.coefficient(a);
            (!c.is_zero()).then(|| (a.clone(), Q(c)))
        })
        .collect();
    VanishingReport {
        checked: indices.len(),
        violations,
    }
}

/// `½ E[(F_1 + F_m)²]`, checked against `K` on the three leading regions.
pub fn leading_form(
    f_jets: &[Jet<Rational>],
    q: &Support<Rational>,
    k: &Polynomial<Rational>,
    r: usize,
    m: u32,
) -> Result<Polynomial<Rational>> {
    let d = k.dim();
    let deg: Vec<usize> = (r..d).collect();
    let fm_indices = if r < d {
        MultiIndex::of_degree_on(d, &deg, m)
    } else {
        Vec::new()
    };
    let mut out = Polynomial::zero(d);
    for (j, w) in f_jets.iter().zip(&q.weights) {
        let mut terms: Vec<(MultiIndex, Rational)> = (0..r)
            .map(|i| {
                let a = MultiIndex::unit(d, i);
                let c = j.coefficient(&a);
                (a, c)
            })
            .collect();
        terms.extend(fm_indices.iter().map(|a| (a.clone(), j.coefficient(a))));
        let f = Polynomial::from_terms(d, terms);
        out = out.add(&f.mul(&f)?.scale(w))?;
    }
    out = out.scale(&Rational::new(1.into(), 2.into()));
    let mut regions = Vec::new();
    for i in 0..r {
        for j in i..r {
            regions.push(MultiIndex::unit(d, i).plus(&MultiIndex::unit(d, j)));
        }
        for a in &fm_indices {
            regions.push(a.plus(&MultiIndex::unit(d, i)));
        }
    }
    if r < d {
        regions.extend(MultiIndex::of_degree_on(d, &deg, 2 * m));
    }
    for a in regions {
        if out.coefficient(&a) != k.coefficient(&a) {
            return Err(Error::MismatchDetected {
                index: a.exponents().to_vec(),
            });
        }
    }
    Ok(out)
}

fn min_cap_mul<S: Scalar>(a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>> {
    let c = a.cap().min(b.cap());
    a.truncate(c).mul(&b.truncate(c))
}

fn min_cap_add<S: Scalar>(a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>> {
    let c = a.cap().min(b.cap());
    a.truncate(c).add(&b.truncate(c))
}

/// `G` for an ordered index list, as a jet, via the recurrence. `log_p` is
/// any jet whose non-constant part is that of `log p` (for example `-f`).
pub fn g_jet<S: Scalar>(log_p: &Jet<S>, indices: &[usize]) -> Result<Jet<S>> {
    let dim = log_p.dim();
    let Some((&first, rest)) = indices.split_first() else {
        return Ok(Jet::zero(dim, log_p.cap()));
    };
    let mut y_all = log_p.derivative(first);
    let mut g = Jet::zero(dim, y_all.cap());
    for &i in rest {
        let yi = log_p.derivative(i);
        let next = min_cap_add(
            &min_cap_add(&min_cap_mul(&g, &yi)?, &min_cap_mul(&y_all, &yi)?)?,
            &g.derivative(i),
        )?;
        g = next;
        y_all = y_all.derivative(i);
    }
    Ok(g)
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

/// `G` at the expansion point by enumerating set partitions.
pub fn g_enumerated<S: Scalar>(log_p: &Jet<S>, indices: &[usize]) -> Result<S> {
    let n = indices.len();
    if n > MAX_ENUMERATION_ORDER {
        return Err(Error::OrderTooHigh {
            order: n,
            max: MAX_ENUMERATION_ORDER,
        });
    }
    let dim = log_p.dim();
    let mut total = S::zero();
    for part in set_partitions(n) {
        if part.len() < 2 {
            continue;
        }
        let mut prod = S::one();
        for block in part {
            let idx: Vec<usize> = block.iter().map(|&k| indices[k]).collect();
            prod = prod * log_p.derivative_value(&MultiIndex::from_index_list(dim, &idx));
        }
        total = total + prod;
    }
    Ok(total)
}

/// `G` at θ* by the recurrence, cross-checked against enumeration.
pub fn g_value<S: Scalar>(log_p: &Jet<S>, indices: &[usize]) -> Result<S> {
    let n = indices.len();
    if n > MAX_ENUMERATION_ORDER {
        return Err(Error::OrderTooHigh {
            order: n,
            max: MAX_ENUMERATION_ORDER,
        });
    }
    let rec = g_jet(log_p, indices)?.constant_term();
    let direct = g_enumerated(log_p, indices)?;
    if rec != direct {
        let dim = log_p.dim();
        return Err(Error::MismatchDetected {
            index: MultiIndex::from_index_list(dim, indices).exponents().to_vec(),
        });
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Report {
    pub checked: usize,
    pub identity_failures: Vec<(String, MultiIndex)>,
    pub expectation_failures: Vec<MultiIndex>,
}

impl Prop1Report {
    pub fn passed(&self) -> bool {
        self.identity_failures.is_empty() && self.expectation_failures.is_empty()
    }
}

/// `∂^α f = -∂^α p / p + G_α` per support outcome, and `E_q[∂^α p / p] = 0`,
/// for every multi-index up to `order_cap`.
pub fn verify_prop1(spec: &ModelSpec, order_cap: u32) -> Result<Prop1Report> {
    if order_cap as usize > MAX_ENUMERATION_ORDER {
        return Err(Error::OrderTooHigh {
            order: order_cap as usize,
            max: MAX_ENUMERATION_ORDER,
        });
    }
    let d = spec.dim();
    let q = spec.true_distribution();
    let support = q.support();
    let mut data = Vec::new();
    for &x in &support {
        let p = spec.prob_jet::<Rational>(x, order_cap)?;
        let f = spec.f_jet::<Rational>(x, order_cap)?;
        data.push((x, p, f));
    }
    let mut report = Prop1Report {
        checked: 0,
        identity_failures: Vec::new(),
        expectation_failures: Vec::new(),
    };
    for n in 1..=order_cap {
        for alpha in MultiIndex::of_degree(d, n) {
            let idx = alpha.to_index_list();
            let mut expectation = Rational::zero();
            for (x, p, f) in &data {
                let qx = p.constant_term();
                let ratio = p.derivative_value(&alpha) / qx.clone();
                let g = g_value(&f.neg(), &idx)?;
                if f.derivative_value(&alpha) != -ratio.clone() + g {
                    report
                        .identity_failures
                        .push((spec.outcomes[*x].clone(), alpha.clone()));
                }
                expectation += qx * ratio;
                report.checked += 1;
            }
            if !expectation.is_zero() {
                report.expectation_failures.push(alpha.clone());
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropTaylorReport {
    pub checked: usize,
    /// (item number 1–4, offending multi-index)
    pub failures: Vec<(u8, MultiIndex)>,
}

impl PropTaylorReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks items (1)–(4) on the G-function expansion in normalized
/// coordinates, as almost-sure equalities on the support.
pub fn verify_prop_taylor(res: &NormalizationResult) -> Result<PropTaylorReport> {
    let m = match res.m {
        VanishingOrder::Finite(m) => m,
        VanishingOrder::MaxedOut(_) => {
            return Ok(PropTaylorReport {
                checked: 0,
                failures: Vec::new(),
            })
        }
    };
    let mut report = PropTaylorReport {
        checked: 0,
        failures: Vec::new(),
    };
    if res.r == res.dim() {
        return Ok(report);
    }
    if 2 * m as usize > MAX_ENUMERATION_ORDER {
        return Err(Error::OrderTooHigh {
            order: 2 * m as usize,
            max: MAX_ENUMERATION_ORDER,
        });
    }
    let d = res.dim();
    let deg = res.degenerate_positions();
    let log_p: Vec<Jet<Rational>> = res.f_jets.iter().map(|f| f.neg()).collect();
    let g_rv = |idx: &[usize]| -> Result<RandomVariable<Rational>> {
        Ok(RandomVariable::new(
            log_p.iter().map(|l| g_value(l, idx)).collect::<Result<Vec<_>>>()?,
        ))
    };
    let q = &res.support;
    let mut check = |item: u8, alpha: &MultiIndex, ok: bool| {
        report.checked += 1;
        if !ok {
            report.failures.push((item, alpha.clone()));
        }
    };
    // (1)
    for n in 1..2 * m {
        for a in MultiIndex::of_degree_on(d, &deg, n) {
            let ok = is_as_zero(&g_rv(&a.to_index_list())?, q);
            check(1, &a, ok);
        }
    }
    for j in 0..res.r {
        let ej = MultiIndex::unit(d, j);
        // (2)
        for n in 0..m {
            for a in MultiIndex::of_degree_on(d, &deg, n) {
                let ja = a.plus(&ej);
                let ok = is_as_zero(&g_rv(&ja.to_index_list())?, q);
                check(2, &ja, ok);
            }
        }
        // (3)
        for a in MultiIndex::of_degree_on(d, &deg, m) {
            let ja = a.plus(&ej);
            let lhs = g_rv(&ja.to_index_list())?;
            let rhs = res.derivative_rv(&ej).mul(&res.derivative_rv(&a));
            let diff = lhs.add(&rhs.scale(&-Rational::one()));
            check(3, &ja, is_as_zero(&diff, q));
        }
    }
    // (4)
    for a in MultiIndex::of_degree_on(d, &deg, 2 * m) {
        let lhs = g_rv(&a.to_index_list())?;
        let mut rhs = RandomVariable::zero(q.len());
        for b in MultiIndex::of_degree_on(d, &deg, m) {
            let Some(rest) = a.checked_minus(&b) else {
                continue;
            };
            let c: num_bigint::BigInt = a
                .exponents()
                .iter()
                .zip(b.exponents())
                .map(|(&ai, &bi)| binomial(ai, bi))
                .product();
            let term = res.derivative_rv(&b).mul(&res.derivative_rv(&rest));
            rhs = rhs.add(&term.scale(&Rational::from_integer(c)));
        }
        rhs = rhs.scale(&Rational::new(1.into(), 2.into()));
        let diff = lhs.add(&rhs.scale(&-Rational::one()));
        check(4, &a, is_as_zero(&diff, q));
    }
    Ok(report)
}

/// Exact `Σ_x q(x) · p(x|θ)/q(x)` over the support at a rational point; equals
/// 1 minus the off-support mass, the certificate that `K(θ) ≥ 0` by Jensen.
pub fn support_mass_at(spec: &ModelSpec, theta: &[Rational]) -> Option<Rational> {
    let q = spec.true_distribution();
    q.support()
        .into_iter()
        .map(|x| spec.prob_exprs[x].evaluate(theta))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspec::parse_model;
    use crate::normalize::{normalize_model, NormalizeConfig};
    use crate::scalar::int;

    const BINMIX: &str = "\
params: theta1 theta2
theta_star: 0 0
outcome x0: 1/2*(1 - (theta1 - theta2 + 1/2))^2 + 1/2*(1 - (theta2 + 1/2))^2
outcome x1: 1/2*2*(theta1 - theta2 + 1/2)*(1 - (theta1 - theta2 + 1/2)) + 1/2*2*(theta2 + 1/2)*(1 - (theta2 + 1/2))
outcome x2: 1/2*(theta1 - theta2 + 1/2)^2 + 1/2*(theta2 + 1/2)^2
";

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn binomial_mixture_k_coefficients() {
        let spec = parse_model(BINMIX).unwrap();
        let res = normalize_model(&spec, &NormalizeConfig::default()).unwrap();
        let k = k_expansion(&res).unwrap();
        assert_eq!(k.poly.coefficient(&mi(&[2, 0])), int(1));
        assert_eq!(k.poly.coefficient(&mi(&[0, 4])), int(8));
        assert_eq!(k.poly.coefficient(&mi(&[2, 2])), int(8));
        assert_eq!(k.poly.coefficient(&mi(&[1, 3])), int(-16));
        assert!(verify_vanishing(&k).passed());
        let lf = leading_form(&res.f_jets, &res.support, &k.poly, 1, 2).unwrap();
        let expected = Polynomial::from_terms(2, [(mi(&[2, 0]), int(1)), (mi(&[0, 4]), int(8))]);
        assert_eq!(lf.truncate(4).sub(&expected).unwrap().coefficient(&mi(&[2, 0])), int(0));
        assert_eq!(lf.coefficient(&mi(&[0, 4])), int(8));
        assert_eq!(lf.coefficient(&mi(&[1, 2])), int(0));
    }

    #[test]
    fn constructed_violation_is_listed() {
        let poly = Polynomial::from_terms(2, [(mi(&[2, 0]), int(1)), (mi(&[0, 3]), int(5))]);
        let k = KExpansion {
            poly,
            cap: 4,
            r: 1,
            m: VanishingOrder::Finite(2),
        };
        let rep = verify_vanishing(&k);
        assert_eq!(rep.violations, vec![(mi(&[0, 3]), Q(int(5)))]);
    }

    #[test]
    fn partitions_count_bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
    }

    #[test]
    fn g_low_orders() {
        let spec = parse_model(BINMIX).unwrap();
        let l = spec.f_jet::<Rational>(0, 4).unwrap().neg();
        assert_eq!(g_value(&l, &[0]).unwrap(), int(0));
        let y = |idx: &[usize]| l.derivative_value(&MultiIndex::from_index_list(2, idx));
        assert_eq!(g_value(&l, &[0, 1]).unwrap(), y(&[0]) * y(&[1]));
        let g111 = g_value(&l, &[0, 0, 0]).unwrap();
        assert_eq!(g111, y(&[0]).pow(3) + int(3) * y(&[0]) * y(&[0, 0]));
        assert!(matches!(
            g_value(&l, &[0, 0, 0, 0, 0]),
            Err(Error::OrderTooHigh { order: 5, .. })
        ));
    }

    #[test]
    fn prop1_on_binomial_mixture() {
        let spec = parse_model(BINMIX).unwrap();
        let rep = verify_prop1(&spec, 4).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.checked, 3 * (2 + 3 + 4 + 5));
    }

    #[test]
    fn prop_taylor_on_binomial_mixture() {
        let spec = parse_model(BINMIX).unwrap();
        let res = normalize_model(&spec, &NormalizeConfig::default()).unwrap();
        let rep = verify_prop_taylor(&res).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
