//! Closed-form λ, the two-parameter classification, and the final report.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::blowup::ChartTable;
use crate::error::{Error, Result};
use crate::jets::MultiIndex;
use crate::normalize::{Assumption3Status, NormalizationResult, ShearTransform, VanishingOrder};
use crate::scalar::{Rational, Q};

/// Vanishing order allowing `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl From<VanishingOrder> for Order {
    fn from(v: VanishingOrder) -> Self {
        match v {
            VanishingOrder::Finite(m) => Order::Finite(m),
            VanishingOrder::MaxedOut(_) => Order::Infinite,
        }
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// `(d − r + rm) / 2m`, or `r/2` at `m = ∞`. Multiplicity is always 1.
pub fn lambda_formula(d: usize, r: usize, m: Order) -> Result<(Rational, usize)> {
    if r < 1 || r > d {
        return Err(Error::InvalidDims(format!("need 1 <= r <= d, got r = {r}, d = {d}")));
    }
    let (d, r) = (d as i64, r as i64);
    let lam = match m {
        Order::Infinite => q(r, 2),
        Order::Finite(0) => return Err(Error::InvalidDims("m must be at least 1".into())),
        Order::Finite(m) => {
            let m = m as i64;
            q(d - r + r * m, 2 * m)
        }
    };
    Ok((lam, 1))
}

/// `(1 + (d−1)m) / 2m`, the `r = d − 1` case; `(d−1)/2` at `m = ∞`.
pub fn lambda_r_ge_dm1(d: usize, m: Order) -> Result<Rational> {
    if d < 2 {
        // r = d - 1 = 0 has no charts; d = 1 means r = d, m = 1
        if d == 1 && m == Order::Finite(1) {
            return Ok(q(1, 2));
        }
        return Err(Error::InvalidDims(format!("d = {d}")));
    }
    let lam = match m {
        Order::Infinite => q(d as i64 - 1, 2),
        Order::Finite(0) => return Err(Error::InvalidDims("m must be at least 1".into())),
        Order::Finite(m) => {
            let (d, m) = (d as i64, m as i64);
            q(1 + (d - 1) * m, 2 * m)
        }
    };
    let (check, _) = lambda_formula(d, d - 1, m)?;
    assert_eq!(lam, check);
    Ok(lam)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub row: u8,
    pub lambda: Q,
    pub multiplicity: usize,
    pub ideal: String,
    pub geometry: String,
}

pub fn classify_two_param(res: &NormalizationResult) -> Result<Table2Row> {
    if res.dim() != 2 {
        return Err(Error::WrongDimension(res.dim()));
    }
    let row = match (res.r, res.m) {
        (2, _) => Table2Row {
            row: 1,
            lambda: Q(Rational::one()),
            multiplicity: 1,
            ideal: "(θ1, θ2)".into(),
            geometry: "point".into(),
        },
        (1, VanishingOrder::Finite(m)) => Table2Row {
            row: 2,
            lambda: Q(q(m as i64 + 1, 2 * m as i64)),
            multiplicity: 1,
            ideal: format!("(θ1, θ2^{m})"),
            geometry: "point".into(),
        },
        (1, VanishingOrder::MaxedOut(_)) => Table2Row {
            row: 3,
            lambda: Q(q(1, 2)),
            multiplicity: 1,
            ideal: "(θ1)".into(),
            geometry: "line {θ1=0}".into(),
        },
        _ => return Err(Error::NotSemiRegular),
    };
    Ok(row)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSigma {
    pub matrix: Vec<Vec<Q>>,
    pub determinant: Q,
    /// `(1 − ΣT) ΠT`
    pub stated_closed_form: Q,
    pub stated_closed_form_holds: bool,
    /// `(1 − ΣT)^(N−1) ΠT`, from `Σ = (1 − ΣT) diag(T) + T Tᵀ`.
    pub general_closed_form: Q,
    pub positive_definite: bool,
    /// All `0 < T_i < 1` and `ΣT ≠ 1`.
    pub weight_condition: bool,
}

fn determinant(mut a: Vec<Vec<Rational>>) -> Rational {
    let n = a.len();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c].clone();
        det *= pivot.clone();
        for i in c + 1..n {
            let f = a[i][c].clone() / pivot.clone();
            if f.is_zero() {
                continue;
            }
            let pivot_row = a[c].clone();
            for (x, y) in a[i].iter_mut().zip(pivot_row).skip(c) {
                *x -= y * f.clone();
            }
        }
    }
    det
}

fn leading_minors_positive(a: &[Vec<Rational>]) -> bool {
    (1..=a.len()).all(|k| {
        let sub: Vec<Vec<Rational>> = a[..k].iter().map(|r| r[..k].to_vec()).collect();
        determinant(sub).is_positive()
    })
}

/// `σ_ii = T_i(1 − ΣT + T_i)`, `σ_ij = T_i T_j`.
pub fn mixture_sigma(t: &[Rational]) -> Result<MixtureSigma> {
    let total: Rational = t.iter().cloned().sum();
    if t.is_empty() || t.iter().any(|x| x.is_negative() || *x > Rational::one()) || total > Rational::one() {
        return Err(Error::InvalidWeights(format!(
            "need 0 <= T_i <= 1 and ΣT <= 1, got ΣT = {total}"
        )));
    }
    let n = t.len();
    let one = Rational::one();
    let sigma: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        t[i].clone() * (one.clone() - total.clone() + t[i].clone())
                    } else {
                        t[i].clone() * t[j].clone()
                    }
                })
                .collect()
        })
        .collect();
    let det = determinant(sigma.clone());
    let prod: Rational = t.iter().cloned().product();
    let rest = one.clone() - total.clone();
    let stated = rest.clone() * prod.clone();
    let general = num_traits::pow(rest, n - 1) * prod;
    assert_eq!(det, general, "determinant disagrees with (1 - ΣT)^(N-1) ΠT");
    let pd = leading_minors_positive(&sigma);
    let weight_condition = t.iter().all(|x| x.is_positive() && *x < one) && total != one;
    Ok(MixtureSigma {
        matrix: sigma.into_iter().map(|r| r.into_iter().map(Q).collect()).collect(),
        stated_closed_form_holds: det == stated,
        determinant: Q(det),
        stated_closed_form: Q(stated),
        general_closed_form: Q(general),
        positive_definite: pd,
        weight_condition,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Semantics {
    ExactRLCTAtPoint,
    UpperBoundOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not applicable to this model (for instance an order above the
    /// enumeration limit).
    Skipped,
}

impl From<bool> for CheckStatus {
    fn from(b: bool) -> Self {
        if b {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub name: String,
    pub status: CheckStatus,
}

/// Results of the series-level checks fed into [`assemble_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KChecks {
    pub vanishing: CheckStatus,
    pub prop1: CheckStatus,
    pub prop_taylor: CheckStatus,
    pub normalization: CheckStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub targets: Vec<usize>,
    pub coefficients: Vec<Q>,
    pub monomial: MultiIndex,
    pub normalizer: Q,
}

impl From<&ShearTransform> for TransformRecord {
    fn from(t: &ShearTransform) -> Self {
        TransformRecord {
            targets: t.targets.clone(),
            coefficients: t.coefficients.iter().cloned().map(Q).collect(),
            monomial: t.monomial.clone(),
            normalizer: Q(t.normalizer.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model_id: String,
    pub d: usize,
    pub r: usize,
    pub vanishing_order: VanishingOrder,
    pub lambda: Q,
    pub multiplicity: usize,
    pub assumption3: Assumption3Status,
    pub semantics: Semantics,
    pub verifications: Vec<Verification>,
    /// Original parameter index at each normalized position.
    pub permutation: Vec<usize>,
    pub transforms: Vec<TransformRecord>,
    pub realizable_singleton: bool,
    /// λ is the learning coefficient of the model, not only of θ*.
    pub global: bool,
    pub caveats: Vec<String>,
}

impl AnalysisReport {
    pub fn all_passed(&self) -> bool {
        self.verifications.iter().all(|v| v.status != CheckStatus::Fail)
    }
}

pub fn assemble_report(
    model_id: &str,
    res: &NormalizationResult,
    a3: &Assumption3Status,
    checks: &KChecks,
    table: Option<&ChartTable>,
) -> Result<AnalysisReport> {
    let d = res.dim();
    let (lambda, multiplicity) = lambda_formula(d, res.r, res.m.into())?;
    let mut caveats = Vec::new();
    let mut chart_status = CheckStatus::Skipped;
    let semantics = match (res.m, a3) {
        (VanishingOrder::MaxedOut(c), _) => {
            caveats.push(format!(
                "no nonvanishing pure derivative up to order {c}; λ = r/2 is an upper bound"
            ));
            Semantics::UpperBoundOnly
        }
        (VanishingOrder::Finite(_), Assumption3Status::AllDirectionsII) => {
            let table = table.ok_or_else(|| {
                Error::InconsistentVerifications("chart table missing".into())
            })?;
            let Some(tl) = &table.lambda else {
                return Err(Error::InconsistentVerifications(
                    "no chart passed the unit check".into(),
                ));
            };
            if tl.0 != lambda || table.multiplicity != multiplicity {
                return Err(Error::InconsistentVerifications(format!(
                    "charts give λ = {} (multiplicity {}), formula gives {} (multiplicity {})",
                    tl, table.multiplicity, lambda, multiplicity
                )));
            }
            chart_status = CheckStatus::Pass;
            Semantics::ExactRLCTAtPoint
        }
        (VanishingOrder::Finite(_), other) => {
            caveats.push(format!(
                "leading-form condition not established for all directions ({}); \
                 λ from the formula is an upper bound",
                match other {
                    Assumption3Status::DirectionIFound(_) => "direction of type (i) found",
                    Assumption3Status::NumericallyVerifiedII { .. } => "numerical evidence only",
                    _ => "inconclusive",
                }
            ));
            Semantics::UpperBoundOnly
        }
    };
    if lambda > q(d as i64, 2) {
        return Err(Error::InconsistentVerifications(format!("λ = {lambda} exceeds d/2")));
    }
    let global = res.spec.realizable_singleton && semantics == Semantics::ExactRLCTAtPoint;
    if !res.spec.realizable_singleton {
        caveats.push("λ is the threshold at θ*; the learning coefficient is at most this".into());
    }
    let verifications = [
        ("normalization", checks.normalization),
        ("vanishing-pattern", checks.vanishing),
        ("chart-table", chart_status),
        ("prop1", checks.prop1),
        ("prop-taylor", checks.prop_taylor),
    ]
    .into_iter()
    .map(|(n, s)| Verification {
        name: n.into(),
        status: s,
    })
    .collect();
    Ok(AnalysisReport {
        model_id: model_id.into(),
        d,
        r: res.r,
        vanishing_order: res.m,
        lambda: Q(lambda),
        multiplicity,
        assumption3: a3.clone(),
        semantics,
        verifications,
        permutation: res.permutation.clone(),
        transforms: res.transforms.iter().map(TransformRecord::from).collect(),
        realizable_singleton: res.spec.realizable_singleton,
        global,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn formula_values() {
        assert_eq!(lambda_formula(2, 1, Order::Finite(2)).unwrap().0, rat(3, 4));
        assert_eq!(lambda_formula(3, 3, Order::Finite(1)).unwrap().0, rat(3, 2));
        assert_eq!(lambda_formula(5, 1, Order::Finite(2)).unwrap().0, rat(3, 2));
        assert_eq!(lambda_formula(4, 3, Order::Infinite).unwrap().0, rat(3, 2));
        assert!(lambda_formula(2, 0, Order::Finite(1)).is_err());
        assert!(lambda_formula(2, 3, Order::Finite(1)).is_err());
        assert!(lambda_formula(2, 1, Order::Finite(0)).is_err());
    }

    #[test]
    fn r_ge_dm1_values() {
        assert_eq!(lambda_r_ge_dm1(2, Order::Finite(3)).unwrap(), rat(2, 3));
        assert_eq!(lambda_r_ge_dm1(4, Order::Finite(1)).unwrap(), int(2));
        assert_eq!(lambda_r_ge_dm1(3, Order::Infinite).unwrap(), int(1));
    }

    #[test]
    fn sigma_examples() {
        let s = mixture_sigma(&[rat(1, 4), rat(1, 4)]).unwrap();
        assert_eq!(s.determinant.0, rat(1, 32));
        assert!(s.positive_definite);
        let s = mixture_sigma(&[rat(1, 2), rat(1, 2)]).unwrap();
        assert_eq!(s.determinant.0, int(0));
        assert!(!s.positive_definite);
        let s = mixture_sigma(&[rat(1, 3)]).unwrap();
        assert_eq!(s.matrix[0][0].0, rat(1, 3));
        assert_eq!(s.determinant.0, rat(1, 3));
        assert!(s.positive_definite);
        // (1 - ΣT) ΠT is exact only for two weights
        assert!(!s.stated_closed_form_holds);
        let s = mixture_sigma(&[rat(1, 4), rat(1, 4), rat(1, 4)]).unwrap();
        assert_eq!(s.determinant.0, rat(1, 1024));
        assert_eq!(s.stated_closed_form.0, rat(1, 256));
        // T = 1 alone is definite although the weight condition fails
        let s = mixture_sigma(&[int(1)]).unwrap();
        assert!(s.positive_definite && !s.weight_condition);
        assert!(matches!(mixture_sigma(&[rat(3, 4), rat(1, 2)]), Err(Error::InvalidWeights(_))));
        assert!(matches!(mixture_sigma(&[rat(-1, 4)]), Err(Error::InvalidWeights(_))));
    }
}
