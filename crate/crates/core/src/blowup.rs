//! Explicit blow-up charts for a normalized model and their normal crossings.
//!
//! Every chart is a monomial map `θ_k = Π_j u_j^{E[k][j]}`. Stage one blows up
//! the origin (chart `i`: `θ_j = θ_i u_j` for `j ≠ i`). For a degenerate index
//! `i ≥ r` the chart is blown up again along `{u_0 = … = u_{r-1} = u_i = 0}`,
//! up to `m` stages in total; picking one of the first `r` coordinates as the
//! exceptional one ends the chain.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{MultiIndex, Polynomial};
use crate::normalize::{certify_direction, Assumption3Status, NormalizationResult};
use crate::par::{self, Exec};
use crate::scalar::{Rational, Q};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupChart {
    /// Exceptional index chosen at each stage (0-based).
    pub path: Vec<usize>,
    /// `θ_k = Π_j u_j^{exponents[k][j]}`
    pub exponents: Vec<Vec<u32>>,
    /// Exponents `h` of the Jacobian determinant `Π u_j^{h_j}`.
    pub jacobian: MultiIndex,
    /// Coordinate whose vanishing is the last exceptional divisor.
    pub exceptional: usize,
    /// No further blow-up is applied to this chart.
    pub terminal: bool,
    /// The chart `g_i` reached after all `m` stages along index `i`.
    pub final_chart: bool,
}

impl BlowupChart {
    pub fn label(&self) -> String {
        self.path
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(">")
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// The chart as a polynomial substitution for [`Polynomial::substitute`].
    pub fn substitution(&self) -> Vec<(usize, Polynomial<Rational>)> {
        self.exponents
            .iter()
            .enumerate()
            .map(|(k, row)| (k, Polynomial::monomial(MultiIndex::new(row.clone()), Rational::one())))
            .collect()
    }

    /// Exponent vector of `θ^a` in chart coordinates.
    pub fn map_exponent(&self, a: &MultiIndex) -> MultiIndex {
        let d = self.dim();
        let mut out = vec![0u32; d];
        for (k, &ak) in a.exponents().iter().enumerate() {
            if ak == 0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += ak * self.exponents[k][j];
            }
        }
        MultiIndex::new(out)
    }

    pub fn pull_back(&self, poly: &Polynomial<Rational>) -> Polynomial<Rational> {
        Polynomial::from_terms(
            poly.dim(),
            poly.terms().map(|(a, c)| (self.map_exponent(a), c.clone())),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartStages {
    All,
    Final,
}

fn identity(d: usize) -> Vec<Vec<u32>> {
    (0..d).map(|i| (0..d).map(|j| (i == j) as u32).collect()).collect()
}

fn matmul(a: &[Vec<u32>], b: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// One stage: returns (matrix of old coordinates in new, stage Jacobian).
fn stage_map(d: usize, r: usize, center_extra: Option<usize>, e: usize) -> (Vec<Vec<u32>>, Vec<u32>) {
    let mut m = identity(d);
    let mut h = vec![0u32; d];
    let center: Vec<usize> = match center_extra {
        None => (0..d).collect(),
        Some(i) => (0..r).chain(std::iter::once(i)).collect(),
    };
    for &c in &center {
        if c != e {
            m[c][e] += 1;
        }
    }
    h[e] = center.len() as u32 - 1;
    (m, h)
}

fn compose(prev: &BlowupChart, stage: &(Vec<Vec<u32>>, Vec<u32>)) -> (Vec<Vec<u32>>, Vec<u32>) {
    let (sm, sh) = stage;
    let d = sm.len();
    let exponents = matmul(&prev.exponents, sm);
    // J_prev(u(v)) · J_stage(v)
    let mut h = sh.clone();
    for (j, &hj) in prev.jacobian.exponents().iter().enumerate() {
        for l in 0..d {
            h[l] += hj * sm[j][l];
        }
    }
    (exponents, h)
}

pub fn build_charts(d: usize, r: usize, m: u32, stages: ChartStages) -> Result<Vec<BlowupChart>> {
    if r < 1 || r > d || m < 1 {
        return Err(Error::InvalidDims(format!("d = {d}, r = {r}, m = {m}")));
    }
    let root = BlowupChart {
        path: Vec::new(),
        exponents: identity(d),
        jacobian: MultiIndex::zeros(d),
        exceptional: 0,
        terminal: false,
        final_chart: false,
    };
    let mut out = Vec::new();
    for i in 0..d {
        let st = stage_map(d, r, None, i);
        let (exponents, h) = compose(&root, &st);
        let continues = i >= r && m >= 2;
        let chart = BlowupChart {
            path: vec![i],
            exponents,
            jacobian: MultiIndex::new(h),
            exceptional: i,
            terminal: !continues,
            final_chart: i >= r && m == 1,
        };
        if !continues {
            out.push(chart);
            continue;
        }
        if stages == ChartStages::All {
            out.push(chart.clone());
        }
        let mut cur = chart;
        for stage in 2..=m {
            for e in (0..r).chain(std::iter::once(i)) {
                let st = stage_map(d, r, Some(i), e);
                let (exponents, h) = compose(&cur, &st);
                let mut path = cur.path.clone();
                path.push(e);
                let last = stage == m;
                let child = BlowupChart {
                    path,
                    exponents,
                    jacobian: MultiIndex::new(h),
                    exceptional: e,
                    terminal: e != i || last,
                    final_chart: e == i && last,
                };
                if e != i || last {
                    out.push(child);
                } else {
                    if stages == ChartStages::All {
                        out.push(child.clone());
                    }
                    cur = child;
                }
            }
        }
    }
    Ok(out)
}

/// Pulls back and factors out the largest common monomial.
pub fn pull_back(
    poly: &Polynomial<Rational>,
    chart: &BlowupChart,
) -> Result<(MultiIndex, Polynomial<Rational>)> {
    if poly.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let pulled = chart.pull_back(poly);
    let k = pulled.common_monomial().ok_or(Error::ZeroPolynomial)?;
    let unit = pulled
        .divide_by_monomial(&k)
        .expect("common monomial divides every term");
    Ok((k, unit))
}

/// `min_i (h_i + 1) / k_i` over `k_i > 0`, with the number of minimizers.
pub fn chart_lambda(k: &MultiIndex, h: &MultiIndex) -> Option<(Rational, usize)> {
    let ratios: Vec<Rational> = k
        .exponents()
        .iter()
        .zip(h.exponents())
        .filter(|(&ki, _)| ki > 0)
        .map(|(&ki, &hi)| Rational::new((hi as i64 + 1).into(), (ki as i64).into()))
        .collect();
    let min = ratios.iter().min()?.clone();
    let count = ratios.iter().filter(|v| **v == min).count();
    Some((min, count))
}

/// Grid on the last exceptional divisor: that coordinate is 0, the others
/// range over {-1/4, 0, 1/4}.
pub fn test_points(chart: &BlowupChart) -> Vec<Vec<Rational>> {
    let d = chart.dim();
    let vals = [
        Rational::new((-1).into(), 4.into()),
        Rational::zero(),
        Rational::new(1.into(), 4.into()),
    ];
    let mut pts = vec![Vec::new()];
    for j in 0..d {
        let mut next = Vec::new();
        for p in &pts {
            if j == chart.exceptional {
                let mut q = p.clone();
                q.push(Rational::zero());
                next.push(q);
            } else {
                for v in &vals {
                    let mut q = p.clone();
                    q.push(v.clone());
                    next.push(q);
                }
            }
        }
        pts = next;
    }
    pts
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitCheck {
    pub passed: bool,
    pub tested: usize,
    pub excluded: usize,
    pub failing_points: Vec<Vec<Q>>,
}

/// Positivity of the unit factor on the test grid, skipping points for which
/// `excluded` holds.
pub fn unit_check(
    unit: &Polynomial<Rational>,
    chart: &BlowupChart,
    excluded: impl Fn(&[Rational]) -> bool,
) -> UnitCheck {
    let mut tested = 0;
    let mut skipped = 0;
    let mut failing = Vec::new();
    for p in test_points(chart) {
        if excluded(&p) {
            skipped += 1;
            continue;
        }
        tested += 1;
        let v = unit.evaluate(&p);
        if v <= Rational::zero() {
            failing.push(p.into_iter().map(Q).collect());
        }
    }
    UnitCheck {
        passed: failing.is_empty(),
        tested,
        excluded: skipped,
        failing_points: failing,
    }
}

/// A test point of a final chart lies in `S` when the first `r` coordinates
/// vanish and the leading form vanishes a.s. in the corresponding direction.
pub fn point_in_s(res: &NormalizationResult, chart: &BlowupChart, p: &[Rational]) -> bool {
    if !chart.final_chart || !p[..res.r].iter().all(Zero::is_zero) {
        return false;
    }
    let i = chart.exceptional;
    let t: Vec<Rational> = (res.r..res.dim())
        .map(|j| if j == i { Rational::one() } else { p[j].clone() })
        .collect();
    certify_direction(res, &t)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartRow {
    pub label: String,
    pub path: Vec<usize>,
    pub exponents: Vec<Vec<u32>>,
    pub k: MultiIndex,
    pub h: MultiIndex,
    /// `None` when every `k_i` is zero.
    pub chart_lambda: Option<Q>,
    pub multiplicity: usize,
    pub unit: UnitCheck,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartTable {
    pub rows: Vec<ChartRow>,
    pub lambda: Option<Q>,
    pub multiplicity: usize,
    /// Certified directions along which the leading form vanishes.
    pub exceptional_set: Vec<Vec<Q>>,
    pub cap: u32,
}

pub fn chart_table(
    k_poly: &Polynomial<Rational>,
    res: &NormalizationResult,
    a3: &Assumption3Status,
    exec: Exec,
) -> Result<ChartTable> {
    let m = res.m.finite().ok_or_else(|| {
        Error::InvalidDims("chart table needs a finite vanishing order".into())
    })?;
    let charts = build_charts(res.dim(), res.r, m, ChartStages::All)?;
    let rows = par::try_map_slice(exec, &charts, |c| -> Result<ChartRow> {
        let (k, unit) = pull_back(k_poly, c)?;
        let check = unit_check(&unit, c, |p| point_in_s(res, c, p));
        let lam = chart_lambda(&k, &c.jacobian);
        Ok(ChartRow {
            label: c.label(),
            path: c.path.clone(),
            exponents: c.exponents.clone(),
            k,
            h: c.jacobian.clone(),
            chart_lambda: lam.as_ref().map(|l| Q(l.0.clone())),
            multiplicity: lam.map_or(0, |l| l.1),
            unit: check,
            terminal: c.terminal,
        })
    })?;
    let lambda = rows
        .iter()
        .filter(|r| r.unit.passed)
        .filter_map(|r| r.chart_lambda.clone())
        .min();
    let multiplicity = rows
        .iter()
        .filter(|r| r.unit.passed && r.chart_lambda.is_some() && r.chart_lambda == lambda)
        .map(|r| r.multiplicity)
        .max()
        .unwrap_or(0);
    let exceptional_set = match a3 {
        Assumption3Status::DirectionIFound(t) => vec![t.clone()],
        _ => Vec::new(),
    };
    Ok(ChartTable {
        rows,
        lambda,
        multiplicity,
        exceptional_set,
        cap: res.cap,
    })
}
