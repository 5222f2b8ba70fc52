//! Model definition files: parsing, printing and evaluation around θ*.
//!
//! ```text
//! params: theta1 theta2
//! theta_star: 0 0
//! outcome x0: 1/2*(1 - (theta1 - theta2 + 1/2))^2 + 1/2*(1 - (theta2 + 1/2))^2
//! ```
//!
//! The true distribution is always `q(x) = p(x | θ*)`.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{Jet, MultiIndex};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(Rational),
    Param { name: String, index: usize },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Literal(_) | Expr::Param { .. } => 5,
        }
    }

    /// Evaluates `self` as a jet in `u`, given seed jets `θ*_i + u_i`.
    pub fn to_jet<S: Scalar>(&self, seeds: &[Jet<S>]) -> Result<Jet<S>> {
        let (dim, cap) = (seeds[0].dim(), seeds[0].cap());
        Ok(match self {
            Expr::Literal(r) => Jet::constant(dim, cap, S::from_rational(r)),
            Expr::Param { index, .. } => seeds[*index].clone(),
            Expr::Add(a, b) => a.to_jet(seeds)?.add(&b.to_jet(seeds)?)?,
            Expr::Sub(a, b) => a.to_jet(seeds)?.sub(&b.to_jet(seeds)?)?,
            Expr::Mul(a, b) => a.to_jet(seeds)?.mul(&b.to_jet(seeds)?)?,
            Expr::Div(a, b) => a.to_jet(seeds)?.div(&b.to_jet(seeds)?)?,
            Expr::Pow(a, e) => a.to_jet(seeds)?.powi(*e),
            Expr::Neg(a) => a.to_jet(seeds)?.neg(),
        })
    }

    /// Renumbers parameters: old index `j` becomes `new_index[j]`.
    fn remap(&self, new_index: &[usize]) -> Expr {
        let r = |e: &Expr| Box::new(e.remap(new_index));
        match self {
            Expr::Literal(v) => Expr::Literal(v.clone()),
            Expr::Param { name, index } => Expr::Param {
                name: name.clone(),
                index: new_index[*index],
            },
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Div(a, b) => Expr::Div(r(a), r(b)),
            Expr::Pow(a, e) => Expr::Pow(r(a), *e),
            Expr::Neg(a) => Expr::Neg(r(a)),
        }
    }

    /// Point evaluation; `None` on division by zero.
    pub fn evaluate<S: Scalar>(&self, point: &[S]) -> Option<S> {
        Some(match self {
            Expr::Literal(r) => S::from_rational(r),
            Expr::Param { index, .. } => point[*index].clone(),
            Expr::Add(a, b) => a.evaluate(point)? + b.evaluate(point)?,
            Expr::Sub(a, b) => a.evaluate(point)? - b.evaluate(point)?,
            Expr::Mul(a, b) => a.evaluate(point)? * b.evaluate(point)?,
            Expr::Div(a, b) => {
                let d = b.evaluate(point)?;
                if d.is_zero() {
                    return None;
                }
                a.evaluate(point)? / d
            }
            Expr::Pow(a, e) => {
                let base = a.evaluate(point)?;
                (0..*e).fold(S::one(), |acc, _| acc * base.clone())
            }
            Expr::Neg(a) => -a.evaluate(point)?,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        let p = self.precedence();
        match self {
            Expr::Literal(r) => {
                if r.is_integer() && !r.is_negative() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "({}/{})", r.numer(), r.denom())
                }
            }
            Expr::Param { name, .. } => write!(f, "{name}"),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => "+",
                    Expr::Sub(..) => "-",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                wrap(f, a, a.precedence() < p)?;
                write!(f, " {op} ")?;
                wrap(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, e) => {
                wrap(f, a, a.precedence() < 5)?;
                write!(f, "^{e}")
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, a.precedence() < 3)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub params: Vec<String>,
    pub outcomes: Vec<String>,
    pub prob_exprs: Vec<Expr>,
    pub theta_star: Vec<Rational>,
    /// Set by a `realizable_set: singleton` line: the user asserts Θ* = {θ*}.
    pub realizable_singleton: bool,
}

/// `q(x) = p(x | θ*)` for each outcome, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueDistribution {
    pub outcomes: Vec<String>,
    pub weights: Vec<Rational>,
}

impl TrueDistribution {
    /// Indices of outcomes with positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| Signed::is_positive(&self.weights[i]))
            .collect()
    }

    pub fn support_weights(&self) -> Vec<Rational> {
        self.support().into_iter().map(|i| self.weights[i].clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub normalization_ok: bool,
    /// First multi-index where Σ_x p-jets differs from 1.
    pub offending_index: Option<MultiIndex>,
    pub negative_outcomes: Vec<String>,
    pub support: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.normalization_ok && self.negative_outcomes.is_empty()
    }
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// The same model with parameters reordered: new position `i` holds old
    /// parameter `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> ModelSpec {
        let mut new_index = vec![0; perm.len()];
        for (i, &old) in perm.iter().enumerate() {
            new_index[old] = i;
        }
        ModelSpec {
            params: perm.iter().map(|&j| self.params[j].clone()).collect(),
            outcomes: self.outcomes.clone(),
            prob_exprs: self.prob_exprs.iter().map(|e| e.remap(&new_index)).collect(),
            theta_star: perm.iter().map(|&j| self.theta_star[j].clone()).collect(),
            realizable_singleton: self.realizable_singleton,
        }
    }

    pub fn outcome_index(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|o| o == label)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn true_distribution(&self) -> TrueDistribution {
        let weights = self
            .prob_exprs
            .iter()
            .map(|e| e.evaluate(&self.theta_star).unwrap_or_else(Rational::zero))
            .collect();
        TrueDistribution {
            outcomes: self.outcomes.clone(),
            weights,
        }
    }

    fn seeds<S: Scalar>(&self, cap: u32) -> Result<Vec<Jet<S>>> {
        let d = self.dim();
        (0..d)
            .map(|i| Jet::seed_variable(i, d, cap, S::from_rational(&self.theta_star[i])))
            .collect()
    }

    /// Jet of `u ↦ p(outcome | θ* + u)`.
    pub fn prob_jet<S: Scalar>(&self, outcome: usize, cap: u32) -> Result<Jet<S>> {
        let seeds = self.seeds(cap)?;
        self.prob_exprs[outcome].to_jet(&seeds)
    }

    pub fn evaluate_prob_jet<S: Scalar>(&self, outcome: &str, cap: u32) -> Result<Jet<S>> {
        self.prob_jet(self.outcome_index(outcome)?, cap)
    }

    /// Jet of `f(x | θ* + u) = log q(x) - log p(x | θ* + u)`, computed as
    /// `-log(p / q)` so the logarithm's argument starts at 1.
    pub fn f_jet<S: Scalar>(&self, outcome: usize, cap: u32) -> Result<Jet<S>> {
        let p = self.prob_jet::<S>(outcome, cap)?;
        let q = p.constant_term();
        if !q.is_positive() {
            return Err(Error::OutcomeOutsideSupport(self.outcomes[outcome].clone()));
        }
        let mut l = p.scale(&(S::one() / q)).log()?;
        // exact cancellation of the constant, also in float mode
        l = Jet::from_terms(
            l.dim(),
            l.cap(),
            l.terms()
                .filter(|(k, _)| k.total_degree() > 0)
                .map(|(k, v)| (k.clone(), v.clone())),
        );
        Ok(l.neg())
    }

    pub fn f_jet_for<S: Scalar>(&self, outcome: &str, cap: u32) -> Result<Jet<S>> {
        self.f_jet(self.outcome_index(outcome)?, cap)
    }

    /// f-jets of all support outcomes, in support order.
    pub fn support_f_jets<S: Scalar>(&self, cap: u32) -> Result<Vec<Jet<S>>> {
        self.true_distribution()
            .support()
            .into_iter()
            .map(|i| self.f_jet(i, cap))
            .collect()
    }

    pub fn check_model(&self, cap: u32) -> Result<Diagnostics> {
        let d = self.dim();
        let mut sum = Jet::<Rational>::zero(d, cap);
        for i in 0..self.outcomes.len() {
            sum = sum.add(&self.prob_jet(i, cap)?)?;
        }
        let one = Jet::constant(d, cap, Rational::one());
        let diff = sum.sub(&one)?;
        let offending_index = diff
            .terms()
            .map(|(k, _)| k.clone())
            .min_by_key(|k| (k.total_degree(), std::cmp::Reverse(k.clone())));
        let q = self.true_distribution();
        let negative_outcomes = self
            .outcomes
            .iter()
            .zip(&q.weights)
            .filter(|(_, w)| Signed::is_negative(*w))
            .map(|(o, _)| o.clone())
            .collect();
        let support = q.support().into_iter().map(|i| self.outcomes[i].clone()).collect();
        Ok(Diagnostics {
            normalization_ok: offending_index.is_none(),
            offending_index,
            negative_outcomes,
            support,
        })
    }

    /// Canonical text form; parses back to an equal model.
    pub fn to_text(&self) -> String {
        let mut s = format!("params: {}\n", self.params.join(" "));
        let star: Vec<String> = self.theta_star.iter().map(|r| r.to_string()).collect();
        s.push_str(&format!("theta_star: {}\n", star.join(" ")));
        if self.realizable_singleton {
            s.push_str("realizable_set: singleton\n");
        }
        for (o, e) in self.outcomes.iter().zip(&self.prob_exprs) {
            s.push_str(&format!("outcome {o}: {e}\n"));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Op(char),
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push((Tok::Int(text.parse().unwrap()), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(syntax(line, col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    params: &'a [String],
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.line, self.col(), format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Op('-')) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(&Tok::Op('+')) {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Op('^')) {
            return Ok(base);
        }
        self.pos += 1;
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                let e: u32 = n
                    .try_into()
                    .map_err(|_| syntax(self.line, col, "exponent too large"))?;
                if self.peek() == Some(&Tok::Op('^')) {
                    return Err(syntax(self.line, self.col(), "chained `^` needs parentheses"));
                }
                Ok(Expr::Pow(Box::new(base), e))
            }
            _ => Err(Error::NonIntegerExponent {
                line: self.line,
                column: col,
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                // `a/b` between two bare integers is a single rational literal
                if let (Some(Tok::Op('/')), Some(Tok::Int(d))) =
                    (self.peek().cloned(), self.peek_at(1).cloned())
                {
                    if self.peek_at(2) != Some(&Tok::Op('^')) {
                        if d.is_zero() {
                            return Err(syntax(self.line, col, "zero denominator"));
                        }
                        self.pos += 2;
                        return Ok(Expr::Literal(Rational::new(n, d)));
                    }
                }
                Ok(Expr::Literal(Rational::from_integer(n)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match self.params.iter().position(|p| *p == name) {
                    Some(index) => Ok(Expr::Param { name, index }),
                    None => Err(Error::UnknownParameter {
                        name,
                        line: self.line,
                    }),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(t) => Err(syntax(self.line, col, format!("unexpected token {t:?}"))),
            None => Err(syntax(self.line, col, "unexpected end of expression")),
        }
    }
}

pub fn parse_expr(src: &str, params: &[String], line: usize, col0: usize) -> Result<Expr> {
    let toks = tokenize(src, line, col0)?;
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        end_col: col0 + src.chars().count(),
        params,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(syntax(line, p.col(), "trailing input"));
    }
    Ok(e)
}

fn parse_rational(text: &str, line: usize, column: usize) -> Result<Rational> {
    let bad = || syntax(line, column, format!("invalid rational `{text}`"));
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (n, d) = match body.split_once('/') {
        Some((n, d)) => (n, d),
        None => (body, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() || n.is_negative() || d.is_negative() {
        return Err(bad());
    }
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Column (1-based) of `sub` inside `line`, where `sub` is a subslice.
fn column_of(line: &str, sub: &str) -> usize {
    let offset = sub.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut params: Option<Vec<String>> = None;
    let mut star: Option<(Vec<Rational>, usize)> = None;
    let mut singleton = false;
    let mut raw_outcomes: Vec<(String, &str, usize, usize)> = Vec::new();

    for (ln, full) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = full.split('#').next().unwrap();
        if content.trim().is_empty() {
            continue;
        }
        let Some((head, body)) = content.split_once(':') else {
            let col = column_of(full, content.trim_start());
            return Err(syntax(line_no, col, "expected `key: value`"));
        };
        let head_t = head.trim();
        let body_col = column_of(full, body);
        if head_t == "params" {
            let names: Vec<String> = body.split_whitespace().map(str::to_string).collect();
            if names.is_empty() {
                return Err(syntax(line_no, body_col, "no parameters declared"));
            }
            let mut seen = HashSet::new();
            for w in body.split_whitespace() {
                let col = column_of(full, w);
                let valid = w.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                    && w.chars().all(|c| c.is_alphanumeric() || c == '_');
                if !valid {
                    return Err(syntax(line_no, col, format!("invalid parameter name `{w}`")));
                }
                if !seen.insert(w) {
                    return Err(syntax(line_no, col, format!("duplicate parameter `{w}`")));
                }
            }
            params = Some(names);
        } else if head_t == "theta_star" {
            let vals = body
                .split_whitespace()
                .map(|w| parse_rational(w, line_no, column_of(full, w)))
                .collect::<Result<Vec<_>>>()?;
            star = Some((vals, line_no));
        } else if head_t == "realizable_set" {
            match body.trim() {
                "singleton" => singleton = true,
                "unknown" => singleton = false,
                other => {
                    return Err(syntax(
                        line_no,
                        body_col,
                        format!("expected `singleton` or `unknown`, got `{other}`"),
                    ))
                }
            }
        } else if let Some(label) = head_t.strip_prefix("outcome") {
            let label = label.trim();
            if label.is_empty() || label.contains(char::is_whitespace) {
                return Err(syntax(line_no, column_of(full, head), "invalid outcome label"));
            }
            if raw_outcomes.iter().any(|o| o.0 == label) {
                return Err(Error::DuplicateOutcome(label.to_string()));
            }
            raw_outcomes.push((label.to_string(), body, line_no, body_col));
        } else {
            return Err(syntax(
                line_no,
                column_of(full, head.trim_start()),
                format!("unknown directive `{head_t}`"),
            ));
        }
    }

    let params = params.ok_or_else(|| Error::InvalidModel("missing `params:` line".into()))?;
    let (theta_star, star_line) =
        star.ok_or_else(|| Error::InvalidModel("missing `theta_star:` line".into()))?;
    if theta_star.len() != params.len() {
        return Err(syntax(
            star_line,
            1,
            format!("theta_star has {} entries, expected {}", theta_star.len(), params.len()),
        ));
    }
    if raw_outcomes.len() < 2 {
        return Err(Error::InvalidModel("at least two outcomes are required".into()));
    }
    let mut outcomes = Vec::new();
    let mut prob_exprs = Vec::new();
    for (label, body, line, col) in raw_outcomes {
        prob_exprs.push(parse_expr(body, &params, line, col)?);
        outcomes.push(label);
    }
    let spec = ModelSpec {
        params,
        outcomes,
        prob_exprs,
        theta_star,
        realizable_singleton: singleton,
    };
    let mut total = Rational::zero();
    for (o, e) in spec.outcomes.iter().zip(&spec.prob_exprs) {
        let v = e
            .evaluate(&spec.theta_star)
            .ok_or_else(|| Error::InvalidModel(format!("`{o}` divides by zero at theta_star")))?;
        total += v;
    }
    if !total.is_one() {
        return Err(Error::InvalidModel(format!(
            "probabilities at theta_star sum to {total}, not 1"
        )));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    pub const BINMIX: &str = "\
params: theta1 theta2          # ordered
theta_star: 0 0
outcome x0: 1/2*(1 - (theta1 - theta2 + 1/2))^2 + 1/2*(1 - (theta2 + 1/2))^2
outcome x1: 1/2*2*(theta1 - theta2 + 1/2)*(1 - (theta1 - theta2 + 1/2)) + 1/2*2*(theta2 + 1/2)*(1 - (theta2 + 1/2))
outcome x2: 1/2*(theta1 - theta2 + 1/2)^2 + 1/2*(theta2 + 1/2)^2
";

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn parses_binomial_mixture() {
        let m = parse_model(BINMIX).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.outcomes.len(), 3);
        assert_eq!(m.theta_star, vec![int(0), int(0)]);
        let q = m.true_distribution();
        assert_eq!(q.weights, vec![rat(1, 4), rat(1, 2), rat(1, 4)]);
    }

    #[test]
    fn exponent_must_be_literal() {
        let text = BINMIX.replace("1/2))^2 + 1/2*(1 - (theta2", "1/2))^theta2 + 1/2*(1 - (theta2");
        assert!(matches!(
            parse_model(&text),
            Err(Error::NonIntegerExponent { line: 3, .. })
        ));
    }

    #[test]
    fn undeclared_parameter() {
        let text = BINMIX.replace("outcome x2: 1/2*", "outcome x2: theta9*0 + 1/2*");
        assert_eq!(
            parse_model(&text),
            Err(Error::UnknownParameter {
                name: "theta9".into(),
                line: 5
            })
        );
    }

    #[test]
    fn duplicate_outcome() {
        let text = BINMIX.replace("outcome x2", "outcome x1");
        assert_eq!(parse_model(&text), Err(Error::DuplicateOutcome("x1".into())));
    }

    #[test]
    fn syntax_error_position() {
        let text = "params: a\ntheta_star: 1/2\noutcome y: a +\noutcome z: 1 - a\n";
        match parse_model(text) {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prob_jet_constants() {
        let m = parse_model(BINMIX).unwrap();
        let j: Jet<Rational> = m.evaluate_prob_jet("x0", 3).unwrap();
        assert_eq!(j.constant_term(), rat(1, 4));
        let total: Rational = (0..3)
            .map(|i| m.prob_jet::<Rational>(i, 3).unwrap().constant_term())
            .sum();
        assert_eq!(total, int(1));
    }

    #[test]
    fn binomial_middle_outcome() {
        let text = "params: t\ntheta_star: 1/2\noutcome a: (1-t)^2\noutcome b: 2*t*(1-t)\noutcome c: t^2\n";
        let m = parse_model(text).unwrap();
        let j: Jet<Rational> = m.evaluate_prob_jet("b", 2).unwrap();
        assert_eq!(j.constant_term(), rat(1, 2));
        assert_eq!(j.coefficient(&mi(&[1])), int(0));
    }

    #[test]
    fn f_jet_first_and_second_order() {
        let m = parse_model(BINMIX).unwrap();
        let f0: Jet<Rational> = m.f_jet_for("x0", 4).unwrap();
        assert_eq!(f0.coefficient(&mi(&[1, 0])), int(2));
        assert_eq!(f0.constant_term(), int(0));
        let f1: Jet<Rational> = m.f_jet_for("x1", 4).unwrap();
        assert_eq!(f1.coefficient(&mi(&[0, 2])), int(4));
    }

    #[test]
    fn f_jet_outside_support() {
        let text = "params: t\ntheta_star: 0\noutcome a: 1 - t\noutcome b: t\n";
        let m = parse_model(text).unwrap();
        assert_eq!(
            m.f_jet_for::<Rational>("b", 2),
            Err(Error::OutcomeOutsideSupport("b".into()))
        );
        let d = m.check_model(3).unwrap();
        assert!(d.passed());
        assert_eq!(d.support, vec!["a".to_string()]);
    }

    #[test]
    fn check_model_catches_unnormalized() {
        let m = parse_model(BINMIX).unwrap();
        assert!(m.check_model(4).unwrap().passed());
        let text = BINMIX.replace("outcome x2: ", "outcome x2: theta1 + ");
        let m = parse_model(&text).unwrap();
        let d = m.check_model(4).unwrap();
        assert!(!d.passed());
        assert_eq!(d.offending_index, Some(mi(&[1, 0])));
    }

    #[test]
    fn round_trip() {
        let m = parse_model(BINMIX).unwrap();
        let again = parse_model(&m.to_text()).unwrap();
        assert_eq!(m, again);
        let params = vec!["a".to_string(), "b".to_string()];
        for src in ["-a^2", "--a", "a - (b - 1)", "a/(b/2)", "(a+b)^3*2/3", "-(a+1)^2", "3/4*a - 1/2/b"] {
            let e = parse_expr(src, &params, 1, 1).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed, &params, 1, 1).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn permutation_reorders_variables() {
        let m = parse_model(BINMIX).unwrap();
        let p = m.permuted(&[1, 0]);
        assert_eq!(p.params, vec!["theta2".to_string(), "theta1".to_string()]);
        let f: Jet<Rational> = p.f_jet_for("x0", 2).unwrap();
        assert_eq!(f.coefficient(&mi(&[0, 1])), int(2));
        assert_eq!(parse_model(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn rejects_unnormalized_at_star() {
        let text = "params: t\ntheta_star: 0\noutcome a: 1/2\noutcome b: 1/3\n";
        assert!(matches!(parse_model(text), Err(Error::InvalidModel(_))));
    }
}
