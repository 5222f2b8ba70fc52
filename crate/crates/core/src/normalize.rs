//! Coordinate normalization at θ*.
//!
//! Parameters are permuted so that the first `r` first-derivative random
//! variables `∂f/∂θ_k` (k < r) are linearly independent. The remaining `d - r`
//! "degenerate" coordinates are then processed order by order: every pure
//! derivative `∂^α f` in the degenerate coordinates that lies in the span of
//! the first derivatives (and of the already retained order-n derivatives) is
//! removed by a polynomial shear `θ'_k = θ_k + c_k/α! θ^α`. The first order at
//! which some pure derivative survives is `m`.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Jet, MultiIndex, Polynomial};
use crate::modelspec::ModelSpec;
use crate::par::{self, Exec};
use crate::scalar::{approximate_rational, Rational, Scalar, Q};
use crate::stochlin::{
    dependency, gram, greedy_independent, is_as_zero, nonnegative_pivots, rank_kernel,
    Dependency, RandomVariable, Support,
};

pub const DEFAULT_M_CAP: u32 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ShearTransform {
    pub targets: Vec<usize>,
    pub coefficients: Vec<Rational>,
    pub monomial: MultiIndex,
    /// `1 / α!`
    pub normalizer: Rational,
}

impl ShearTransform {
    pub fn new(targets: Vec<usize>, coefficients: Vec<Rational>, monomial: MultiIndex) -> Self {
        let normalizer = Rational::new(One::one(), monomial.factorial());
        ShearTransform {
            targets,
            coefficients,
            monomial,
            normalizer,
        }
    }

    fn images(&self, sign: i64) -> Vec<(usize, Polynomial<Rational>)> {
        let dim = self.monomial.dim();
        self.targets
            .iter()
            .zip(&self.coefficients)
            .map(|(&k, c)| {
                let shift = Polynomial::monomial(
                    self.monomial.clone(),
                    c.clone() * self.normalizer.clone() * Rational::from_i64(sign),
                );
                (k, Polynomial::variable(k, dim).add(&shift).unwrap())
            })
            .collect()
    }

    /// Old coordinates in terms of new ones: `θ_k = θ'_k - c_k/α! θ'^α`.
    /// Composing a function of `θ` with this map expresses it in `θ'`.
    pub fn substitution(&self) -> Vec<(usize, Polynomial<Rational>)> {
        self.images(-1)
    }

    /// New coordinates in terms of old ones: `θ'_k = θ_k + c_k/α! θ^α`.
    pub fn forward(&self) -> Vec<(usize, Polynomial<Rational>)> {
        self.images(1)
    }

    pub fn apply(&self, jet: &Jet<Rational>) -> Result<Jet<Rational>> {
        jet.substitute(&self.substitution())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VanishingOrder {
    Finite(u32),
    /// Every pure degenerate derivative up to the cap vanished.
    MaxedOut(u32),
}

impl VanishingOrder {
    pub fn finite(self) -> Option<u32> {
        match self {
            VanishingOrder::Finite(m) => Some(m),
            VanishingOrder::MaxedOut(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizeConfig {
    pub m_cap: u32,
    /// Truncation order of the final jets; `None` means `2m + 2`.
    pub cap: Option<u32>,
    pub exec: Exec,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            m_cap: DEFAULT_M_CAP,
            cap: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormalizationResult {
    /// The model with parameters already permuted.
    pub spec: ModelSpec,
    pub permutation: Vec<usize>,
    pub r: usize,
    pub m: VanishingOrder,
    pub transforms: Vec<ShearTransform>,
    pub support: Support<Rational>,
    /// f-jets of the support outcomes in final coordinates.
    pub f_jets: Vec<Jet<Rational>>,
    pub cap: u32,
    pub wm_indices: Vec<MultiIndex>,
    pub wm_basis: Vec<RandomVariable<Rational>>,
}

impl NormalizationResult {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn s(&self) -> usize {
        self.wm_basis.len()
    }

    pub fn degenerate_positions(&self) -> Vec<usize> {
        (self.r..self.dim()).collect()
    }

    pub fn derivative_rv(&self, alpha: &MultiIndex) -> RandomVariable<Rational> {
        derivative_rv(&self.f_jets, alpha)
    }

    pub fn first_derivative_rvs(&self) -> Vec<RandomVariable<Rational>> {
        let d = self.dim();
        (0..self.r)
            .map(|k| self.derivative_rv(&MultiIndex::unit(d, k)))
            .collect()
    }

    /// Re-derives f-jets at another truncation order in final coordinates.
    pub fn jets_at(&self, cap: u32, exec: Exec) -> Result<Vec<Jet<Rational>>> {
        transformed_jets(&self.spec, &self.transforms, cap, exec)
    }
}

/// `∂^α f` at θ* for every support outcome.
pub fn derivative_rv<S: Scalar>(jets: &[Jet<S>], alpha: &MultiIndex) -> RandomVariable<S> {
    RandomVariable::new(jets.iter().map(|j| j.derivative_value(alpha)).collect())
}

fn transformed_jets(
    spec: &ModelSpec,
    transforms: &[ShearTransform],
    cap: u32,
    exec: Exec,
) -> Result<Vec<Jet<Rational>>> {
    let support = spec.true_distribution().support();
    par::try_map_slice(exec, &support, |&x| {
        let mut jet = spec.f_jet::<Rational>(x, cap)?;
        for t in transforms {
            jet = t.apply(&jet)?;
        }
        Ok(jet)
    })
}

/// Fisher rank `r` and a permutation placing a greedy independent set of
/// first-derivative random variables first.
pub fn select_independent_params(spec: &ModelSpec) -> Result<(Vec<usize>, usize)> {
    let d = spec.dim();
    let q = Support::from_true_distribution(&spec.true_distribution());
    let jets = spec.support_f_jets::<Rational>(1)?;
    let rvs: Vec<_> = (0..d)
        .map(|i| derivative_rv(&jets, &MultiIndex::unit(d, i)))
        .collect();
    let (r, _) = rank_kernel(&gram(&rvs, &q)?.entries);
    if r == 0 {
        return Err(Error::NotSemiRegular);
    }
    let chosen = greedy_independent(&rvs);
    if chosen.len() != r {
        return Err(Error::InconsistentVerifications(format!(
            "Gram rank {r} but {} independent first derivatives",
            chosen.len()
        )));
    }
    let mut perm = chosen.clone();
    perm.extend((0..d).filter(|i| !chosen.contains(i)));
    Ok((perm, r))
}

/// Search state shared by successive [`eliminate_order`] passes.
#[derive(Clone, Debug)]
pub struct NormalizationState {
    pub spec: ModelSpec,
    pub r: usize,
    pub transforms: Vec<ShearTransform>,
    pub support: Support<Rational>,
    pub exec: Exec,
}

impl NormalizationState {
    pub fn new(spec: ModelSpec, r: usize, exec: Exec) -> Self {
        let support = Support::from_true_distribution(&spec.true_distribution());
        NormalizationState {
            spec,
            r,
            transforms: Vec::new(),
            support,
            exec,
        }
    }

    pub fn jets_at(&self, cap: u32) -> Result<Vec<Jet<Rational>>> {
        transformed_jets(&self.spec, &self.transforms, cap, self.exec)
    }
}

#[derive(Clone, Debug)]
pub struct OrderOutcome {
    pub order: u32,
    /// True when every order-n pure degenerate derivative is a.s. zero.
    pub vanished: bool,
    pub retained: Vec<MultiIndex>,
    pub shears_added: usize,
}

/// One pass of the elimination at total order `n`.
pub fn eliminate_order(state: &mut NormalizationState, n: u32) -> Result<OrderOutcome> {
    let d = state.spec.dim();
    let r = state.r;
    let degenerate: Vec<usize> = (r..d).collect();
    let mut jets = state.jets_at(n)?;
    let v1: Vec<_> = (0..r)
        .map(|k| derivative_rv(&jets, &MultiIndex::unit(d, k)))
        .collect();
    let mut retained: Vec<MultiIndex> = Vec::new();
    let mut retained_rvs: Vec<RandomVariable<Rational>> = Vec::new();
    let mut shears_added = 0;
    let indices = MultiIndex::of_degree_on(d, &degenerate, n);
    for alpha in &indices {
        let x = derivative_rv(&jets, alpha);
        if is_as_zero(&x, &state.support) {
            continue;
        }
        let mut basis = v1.clone();
        basis.extend(retained_rvs.iter().cloned());
        match dependency(&x, &basis, &state.support)? {
            Dependency::Coefficients(c) => {
                let (targets, coefficients): (Vec<usize>, Vec<Rational>) = c[..r]
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(k, v)| (k, v.clone()))
                    .unzip();
                if targets.is_empty() {
                    continue;
                }
                let t = ShearTransform::new(targets, coefficients, alpha.clone());
                jets = par::try_map_slice(state.exec, &jets, |j| t.apply(j))?;
                state.transforms.push(t);
                shears_added += 1;
            }
            Dependency::Independent => {
                retained.push(alpha.clone());
                retained_rvs.push(x);
            }
        }
    }
    // certificate: everything not retained now lies in span(retained)
    for alpha in indices.iter().filter(|a| !retained.contains(a)) {
        let x = derivative_rv(&jets, alpha);
        let ok = match dependency(&x, &retained_rvs, &state.support)? {
            Dependency::Coefficients(_) => true,
            Dependency::Independent => false,
        };
        if !ok {
            return Err(Error::InconsistentVerifications(format!(
                "derivative {alpha:?} not reduced after order-{n} shears"
            )));
        }
    }
    Ok(OrderOutcome {
        order: n,
        vanished: retained.is_empty(),
        retained,
        shears_added,
    })
}

pub fn normalize_model(spec: &ModelSpec, config: &NormalizeConfig) -> Result<NormalizationResult> {
    let (perm, r) = select_independent_params(spec)?;
    let pspec = spec.permuted(&perm);
    let d = pspec.dim();
    let mut state = NormalizationState::new(pspec, r, config.exec);
    let mut m = VanishingOrder::MaxedOut(config.m_cap);
    let mut wm_indices = Vec::new();
    if r == d {
        m = VanishingOrder::Finite(1);
    } else {
        for n in 1..=config.m_cap {
            let out = eliminate_order(&mut state, n)?;
            if !out.vanished {
                m = VanishingOrder::Finite(n);
                wm_indices = out.retained;
                break;
            }
        }
    }
    let cap = match (m, config.cap) {
        (VanishingOrder::Finite(m), Some(c)) if c < 2 * m => {
            return Err(Error::InvalidDims(format!(
                "truncation order {c} is below 2m = {}",
                2 * m
            )))
        }
        (_, Some(c)) => c,
        (VanishingOrder::Finite(m), None) => 2 * m + 2,
        (VanishingOrder::MaxedOut(c), None) => c.max(2),
    };
    let f_jets = state.jets_at(cap)?;
    let wm_basis = wm_indices.iter().map(|a| derivative_rv(&f_jets, a)).collect();
    Ok(NormalizationResult {
        spec: state.spec,
        permutation: perm,
        r,
        m,
        transforms: state.transforms,
        support: state.support,
        f_jets,
        cap,
        wm_indices,
        wm_basis,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizationAudit {
    pub lower_orders_vanish: bool,
    pub full_rank: bool,
}

/// Re-checks the normalized vanishing structure from the final jets.
pub fn audit(res: &NormalizationResult) -> Result<NormalizationAudit> {
    let d = res.dim();
    let upper = match res.m {
        VanishingOrder::Finite(m) => m,
        VanishingOrder::MaxedOut(c) => c + 1,
    }
    .min(res.cap + 1);
    let deg = res.degenerate_positions();
    let lower_orders_vanish = (1..upper).all(|n| {
        MultiIndex::of_degree_on(d, &deg, n)
            .iter()
            .all(|a| is_as_zero(&res.derivative_rv(a), &res.support))
    });
    let mut rvs = res.first_derivative_rvs();
    rvs.extend(res.wm_basis.iter().cloned());
    let (rank, _) = rank_kernel(&gram(&rvs, &res.support)?.entries);
    Ok(NormalizationAudit {
        lower_orders_vanish,
        full_rank: rank == rvs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Assumption3Status {
    AllDirectionsII,
    /// A nonzero direction in the degenerate coordinates along which the
    /// leading form vanishes almost surely.
    DirectionIFound(Vec<Q>),
    NumericallyVerifiedII { min_value: f64, samples: usize },
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption3Config {
    pub samples: usize,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for Assumption3Config {
    fn default() -> Self {
        Assumption3Config {
            samples: 1024,
            steps: 50,
            tol: 1e-8,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// `F_m(X | t) = Σ_j P_j(t) B_j(X)`: the polynomials `P_j` in the `d - r`
/// degenerate coordinates.
pub fn leading_components(res: &NormalizationResult) -> Result<Vec<Polynomial<Rational>>> {
    let Some(m) = res.m.finite() else {
        return Ok(Vec::new());
    };
    let d = res.dim();
    let deg = res.degenerate_positions();
    let nd = deg.len();
    let s = res.s();
    let mut terms: Vec<Vec<(MultiIndex, Rational)>> = vec![Vec::new(); s];
    for alpha in MultiIndex::of_degree_on(d, &deg, m) {
        let x = res.derivative_rv(&alpha);
        let b = match dependency(&x, &res.wm_basis, &res.support)? {
            Dependency::Coefficients(b) => b,
            Dependency::Independent => {
                return Err(Error::InconsistentVerifications(format!(
                    "order-{m} derivative {alpha:?} outside the retained basis"
                )))
            }
        };
        let local = MultiIndex::new(alpha.exponents()[res.r..].to_vec());
        let norm = Rational::new(One::one(), alpha.factorial());
        for (j, bj) in b.into_iter().enumerate() {
            terms[j].push((local.clone(), bj * norm.clone()));
        }
    }
    Ok(terms
        .into_iter()
        .map(|t| Polynomial::from_terms(nd, t))
        .collect())
}

/// True iff `F_m(X | t)` vanishes a.s. for the degenerate direction `t`.
pub fn certify_direction(res: &NormalizationResult, t: &[Rational]) -> bool {
    let Some(m) = res.m.finite() else {
        return false;
    };
    if t.iter().all(Zero::is_zero) {
        return false;
    }
    let d = res.dim();
    let deg = res.degenerate_positions();
    let alphas = MultiIndex::of_degree_on(d, &deg, m);
    let values = res
        .f_jets
        .iter()
        .map(|j| {
            alphas.iter().fold(Rational::zero(), |acc, a| {
                let mono = a.exponents()[res.r..]
                    .iter()
                    .zip(t)
                    .fold(Rational::one(), |p, (&e, ti)| p * num_traits::pow(ti.clone(), e as usize));
                acc + j.coefficient(a) * mono
            })
        })
        .collect();
    is_as_zero(&RandomVariable::new(values), &res.support)
}

fn to_q(v: &[Rational]) -> Vec<Q> {
    v.iter().cloned().map(Q).collect()
}

/// Symmetric matrix of the quadratic form `P(t) = tᵀ A t`.
pub fn quadratic_form_matrix(p: &Polynomial<Rational>) -> Vec<Vec<Rational>> {
    let n = p.dim();
    let mut a = vec![vec![Rational::zero(); n]; n];
    for (k, v) in p.terms() {
        let idx = k.to_index_list();
        if idx.len() != 2 {
            continue;
        }
        let (i, j) = (idx[0], idx[1]);
        if i == j {
            a[i][i] = v.clone();
        } else {
            let half = v.clone() / Rational::from_i64(2);
            a[i][j] = half.clone();
            a[j][i] = half;
        }
    }
    a
}

fn is_rational_square(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let sn = r.numer().sqrt();
    let sd = r.denom().sqrt();
    (&sn * &sn == *r.numer() && &sd * &sd == *r.denom()).then(|| Rational::new(sn, sd))
}

/// Looks for a rational nonzero `t` with `tᵀ A t = 0`.
fn rational_isotropic(a: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    let mut out = Vec::new();
    let (_, kernel) = rank_kernel(a);
    out.extend(kernel);
    for i in 0..n {
        if a[i][i].is_zero() {
            let mut e = vec![Rational::zero(); n];
            e[i] = Rational::one();
            out.push(e);
        }
    }
    // two-coordinate slices: a x² + 2b xy + c y² = 0
    for i in 0..n {
        for j in (i + 1)..n {
            let (aa, b, c) = (&a[i][i], &a[i][j], &a[j][j]);
            if aa.is_zero() {
                continue;
            }
            let disc = b * b - aa * c;
            if let Some(root) = is_rational_square(&disc) {
                for sign in [1, -1] {
                    let x = (-b.clone() + root.clone() * Rational::from_i64(sign)) / aa.clone();
                    let mut t = vec![Rational::zero(); n];
                    t[i] = x;
                    t[j] = Rational::one();
                    out.push(t);
                }
            }
        }
    }
    out
}

pub fn check_assumption3(
    res: &NormalizationResult,
    config: &Assumption3Config,
) -> Result<Assumption3Status> {
    let Some(m) = res.m.finite() else {
        return Ok(Assumption3Status::Inconclusive);
    };
    if m == 1 || res.dim() - res.r == 1 {
        return Ok(Assumption3Status::AllDirectionsII);
    }
    let comps = leading_components(res)?;
    if comps.len() == 1 && m == 2 {
        let a = quadratic_form_matrix(&comps[0]);
        let neg: Vec<Vec<Rational>> = a.iter().map(|r| r.iter().map(|v| -v.clone()).collect()).collect();
        let definite = |piv: Option<Vec<Rational>>| {
            piv.is_some_and(|p| p.iter().all(Signed::is_positive))
        };
        if definite(nonnegative_pivots(&a)) || definite(nonnegative_pivots(&neg)) {
            return Ok(Assumption3Status::AllDirectionsII);
        }
        for t in rational_isotropic(&a) {
            if certify_direction(res, &t) {
                return Ok(Assumption3Status::DirectionIFound(to_q(&t)));
            }
        }
        return Ok(Assumption3Status::Inconclusive);
    }
    numeric_assumption3(res, &comps, config)
}

struct FloatPoly {
    terms: Vec<(Vec<u32>, f64)>,
}

impl FloatPoly {
    fn value(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(t).map(|(&k, x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    fn gradient(&self, t: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; t.len()];
        for (e, c) in &self.terms {
            for i in 0..t.len() {
                if e[i] == 0 {
                    continue;
                }
                let mut v = c * e[i] as f64;
                for (k, (&ek, x)) in e.iter().zip(t).enumerate() {
                    let p = if k == i { ek - 1 } else { ek };
                    v *= x.powi(p as i32);
                }
                g[i] += v;
            }
        }
        g
    }
}

fn normalize_vec(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn objective(polys: &[FloatPoly], t: &[f64]) -> f64 {
    polys.iter().map(|p| p.value(t).powi(2)).sum()
}

fn descend(polys: &[FloatPoly], mut t: Vec<f64>, steps: usize) -> (f64, Vec<f64>) {
    normalize_vec(&mut t);
    let mut val = objective(polys, &t);
    let mut eta = 1.0;
    for _ in 0..steps {
        let mut g = vec![0.0; t.len()];
        for p in polys {
            let v = p.value(&t);
            for (gi, di) in g.iter_mut().zip(p.gradient(&t)) {
                *gi += 2.0 * v * di;
            }
        }
        let radial: f64 = g.iter().zip(&t).map(|(a, b)| a * b).sum();
        g.iter_mut().zip(&t).for_each(|(gi, ti)| *gi -= radial * ti);
        if g.iter().all(|x| x.abs() < 1e-300) {
            break;
        }
        let mut improved = false;
        while eta > 1e-14 {
            let mut cand: Vec<f64> = t.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
            normalize_vec(&mut cand);
            let cv = objective(polys, &cand);
            if cv < val {
                t = cand;
                val = cv;
                eta *= 2.0;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (val, t)
}

fn numeric_assumption3(
    res: &NormalizationResult,
    comps: &[Polynomial<Rational>],
    config: &Assumption3Config,
) -> Result<Assumption3Status> {
    let nd = res.dim() - res.r;
    let scale = comps
        .iter()
        .flat_map(|p| p.terms().map(|(_, v)| v.to_f64().abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Assumption3Status::Inconclusive);
    }
    let polys: Vec<FloatPoly> = comps
        .iter()
        .map(|p| FloatPoly {
            terms: p
                .terms()
                .map(|(k, v)| (k.exponents().to_vec(), v.to_f64() / scale))
                .collect(),
        })
        .collect();
    let runs = par::map_range(config.exec, config.samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let t0: Vec<f64> = (0..nd).map(|_| rng.sample(StandardNormal)).collect();
        descend(&polys, t0, config.steps)
    });
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].0.total_cmp(&runs[b].0).then(a.cmp(&b)));
    for &i in order.iter().take(16) {
        let t = &runs[i].1;
        let big = t.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let cand: Vec<Rational> = t.iter().map(|x| approximate_rational(x / big, 1000)).collect();
        if certify_direction(res, &cand) {
            return Ok(Assumption3Status::DirectionIFound(to_q(&cand)));
        }
    }
    let min_value = order.first().map_or(f64::INFINITY, |&i| runs[i].0.sqrt());
    Ok(if min_value > config.tol {
        Assumption3Status::NumericallyVerifiedII {
            min_value,
            samples: config.samples,
        }
    } else {
        Assumption3Status::Inconclusive
    })
}
