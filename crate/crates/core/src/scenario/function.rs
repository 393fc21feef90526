//! Closed catalog of Morse functions.
//!
//! Every family is a finite sum of separable products
//! `c * g_1(x_1) * ... * g_n(x_n)`, so exact derivatives of any order are
//! products of one-dimensional derivatives.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::DerivativeBundle;
use crate::error::{MorseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Cos,
    Sin,
    Const,
}

/// `coefficient * prod_i kind_i(2 pi frequency_i x_i / period_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coefficient: f64,
    pub kinds: Vec<TrigKind>,
    pub frequencies: Vec<i64>,
}

/// `coefficient * prod_i x_i^exponents_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigParams {
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialParams {
    pub terms: Vec<Monomial>,
}

/// `-1/2 sum_{i < index} x_i^2 + 1/2 sum_{i >= index} x_i^2 + extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPlusTermParams {
    pub index: usize,
    #[serde(default)]
    pub extra: Vec<Monomial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum MorseFunctionSpec {
    TrigPolynomial(TrigParams),
    Polynomial(PolynomialParams),
    QuadraticPlusTerm(QuadraticPlusTermParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Cos(f64),
    Sin(f64),
    Power(u32),
    One,
}

impl Factor {
    /// Derivatives of orders 0..=3 at `x`.
    fn derivatives(self, x: f64) -> [f64; 4] {
        match self {
            Factor::One => [1.0, 0.0, 0.0, 0.0],
            Factor::Cos(w) => {
                let (s, c) = (w * x).sin_cos();
                [c, -w * s, -w * w * c, w * w * w * s]
            }
            Factor::Sin(w) => {
                let (s, c) = (w * x).sin_cos();
                [s, w * c, -w * w * s, -w * w * w * c]
            }
            Factor::Power(e) => {
                let mut out = [0.0; 4];
                let mut falling = 1.0;
                for (order, slot) in out.iter_mut().enumerate() {
                    let order = order as u32;
                    if order > e {
                        break;
                    }
                    *slot = falling * x.powi((e - order) as i32);
                    falling *= (e - order) as f64;
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coefficient: f64,
    factors: Vec<Factor>,
}

/// A compiled catalog function: a sum of separable terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFunction {
    dimension: usize,
    terms: Vec<Term>,
    periodic: bool,
}

impl SeparableFunction {
    /// Compile a function spec. `periods` gives the length scale of
    /// trigonometric frequencies (unit periods on Euclidean space).
    pub fn compile(spec: &MorseFunctionSpec, dimension: usize, periods: &[f64]) -> Result<Self> {
        let mut terms = Vec::new();
        let mut periodic = false;
        match spec {
            MorseFunctionSpec::TrigPolynomial(params) => {
                periodic = true;
                for term in &params.terms {
                    if term.kinds.len() != dimension || term.frequencies.len() != dimension {
                        return Err(MorseError::Validation(format!(
                            "trig term has {} kinds and {} frequencies, expected {dimension}",
                            term.kinds.len(),
                            term.frequencies.len()
                        )));
                    }
                    let factors = term
                        .kinds
                        .iter()
                        .zip(&term.frequencies)
                        .zip(periods)
                        .map(|((kind, &k), &period)| {
                            let w = 2.0 * PI * k as f64 / period;
                            match kind {
                                TrigKind::Cos => Factor::Cos(w),
                                TrigKind::Sin => Factor::Sin(w),
                                TrigKind::Const => Factor::One,
                            }
                        })
                        .collect();
                    terms.push(Term {
                        coefficient: term.coefficient,
                        factors,
                    });
                }
            }
            MorseFunctionSpec::Polynomial(params) => {
                for m in &params.terms {
                    terms.push(monomial_term(m, dimension)?);
                }
            }
            MorseFunctionSpec::QuadraticPlusTerm(params) => {
                if params.index > dimension {
                    return Err(MorseError::Validation(format!(
                        "quadratic index {} exceeds dimension {dimension}",
                        params.index
                    )));
                }
                for i in 0..dimension {
                    let mut exponents = vec![0; dimension];
                    exponents[i] = 2;
                    let coefficient = if i < params.index { -0.5 } else { 0.5 };
                    terms.push(monomial_term(
                        &Monomial {
                            coefficient,
                            exponents,
                        },
                        dimension,
                    )?);
                }
                for m in &params.extra {
                    terms.push(monomial_term(m, dimension)?);
                }
            }
        }
        if terms.iter().any(|t| !t.coefficient.is_finite()) {
            return Err(MorseError::Validation("non-finite coefficient".into()));
        }
        Ok(Self {
            dimension,
            terms,
            periodic,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// True for trigonometric families, which are bounded and hence never
    /// proper on Euclidean space.
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn factor_table(&self, term: &Term, x: &[f64]) -> Vec<[f64; 4]> {
        term.factors
            .iter()
            .zip(x)
            .map(|(f, &xi)| f.derivatives(xi))
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.factors
                        .iter()
                        .zip(x)
                        .map(|(f, &xi)| f.derivatives(xi)[0])
                        .product::<f64>()
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dimension;
        let mut g = vec![0.0; n];
        let mut orders = vec![0usize; n];
        for t in &self.terms {
            let table = self.factor_table(t, x);
            for (a, ga) in g.iter_mut().enumerate() {
                orders[a] += 1;
                *ga += t.coefficient * mixed(&table, &orders);
                orders[a] -= 1;
            }
        }
        g
    }

    /// Value and all derivatives up to order three.
    pub fn bundle(&self, x: &[f64]) -> DerivativeBundle {
        let n = self.dimension;
        let mut value = 0.0;
        let mut gradient = vec![0.0; n];
        let mut hessian = vec![0.0; n * n];
        let mut third = vec![0.0; n * n * n];
        let mut orders = vec![0usize; n];
        for t in &self.terms {
            let table = self.factor_table(t, x);
            let c = t.coefficient;
            value += c * mixed(&table, &orders);
            for a in 0..n {
                orders[a] += 1;
                gradient[a] += c * mixed(&table, &orders);
                for b in a..n {
                    orders[b] += 1;
                    hessian[a * n + b] += c * mixed(&table, &orders);
                    for d in b..n {
                        orders[d] += 1;
                        third[(a * n + b) * n + d] += c * mixed(&table, &orders);
                        orders[d] -= 1;
                    }
                    orders[b] -= 1;
                }
                orders[a] -= 1;
            }
        }
        // Fill the symmetric counterparts from the sorted-index entries.
        for a in 0..n {
            for b in 0..a {
                hessian[a * n + b] = hessian[b * n + a];
            }
        }
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let mut idx = [a, b, d];
                    idx.sort_unstable();
                    third[(a * n + b) * n + d] = third[(idx[0] * n + idx[1]) * n + idx[2]];
                }
            }
        }
        DerivativeBundle::from_parts(value, gradient, hessian, third)
    }
}

fn monomial_term(m: &Monomial, dimension: usize) -> Result<Term> {
    if m.exponents.len() != dimension {
        return Err(MorseError::Validation(format!(
            "monomial has {} exponents, expected {dimension}",
            m.exponents.len()
        )));
    }
    Ok(Term {
        coefficient: m.coefficient,
        factors: m
            .exponents
            .iter()
            .map(|&e| if e == 0 { Factor::One } else { Factor::Power(e) })
            .collect(),
    })
}

fn mixed(table: &[[f64; 4]], orders: &[usize]) -> f64 {
    table
        .iter()
        .zip(orders)
        .map(|(d, &o)| if o > 3 { 0.0 } else { d[o] })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_cos() -> SeparableFunction {
        let spec: MorseFunctionSpec = serde_json::from_str(
            r#"{"family":"trig_polynomial","params":{"terms":[
                {"coefficient":1.0,"kinds":["cos","const"],"frequencies":[1,0]},
                {"coefficient":1.0,"kinds":["const","cos"],"frequencies":[0,1]}]}}"#,
        )
        .unwrap();
        SeparableFunction::compile(&spec, 2, &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn power_factor_derivatives() {
        assert_eq!(Factor::Power(3).derivatives(2.0), [8.0, 12.0, 12.0, 6.0]);
        assert_eq!(Factor::Power(1).derivatives(2.0), [2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_origin_bundle() {
        let b = torus_cos().bundle(&[0.0, 0.0]);
        let w2 = 4.0 * PI * PI;
        assert!((b.value - 2.0).abs() < 1e-15);
        assert!(b.gradient.norm() < 1e-15);
        assert!((b.hessian[(0, 0)] + w2).abs() < 1e-12);
        assert!((b.hessian[(1, 1)] + w2).abs() < 1e-12);
        assert_eq!(b.hessian[(0, 1)], 0.0);
    }

    #[test]
    fn quadratic_plus_term_expands() {
        let spec = MorseFunctionSpec::QuadraticPlusTerm(QuadraticPlusTermParams {
            index: 1,
            extra: vec![Monomial {
                coefficient: 1.0,
                exponents: vec![2, 2],
            }],
        });
        let f = SeparableFunction::compile(&spec, 2, &[1.0, 1.0]).unwrap();
        let (x, y) = (0.2, -0.1);
        let expect = -0.5 * x * x + 0.5 * y * y + x * x * y * y;
        assert!((f.value(&[x, y]) - expect).abs() < 1e-15);
        let b = f.bundle(&[x, y]);
        // d^3/dx dx dy of x^2 y^2 = 4y
        assert!((b.third(0, 0, 1) - 4.0 * y).abs() < 1e-14);
        assert!((b.third(1, 0, 0) - 4.0 * y).abs() < 1e-14);
        assert!((b.third(0, 1, 1) - 4.0 * x).abs() < 1e-14);
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let spec = MorseFunctionSpec::Polynomial(PolynomialParams {
            terms: vec![Monomial {
                coefficient: 1.0,
                exponents: vec![2],
            }],
        });
        assert!(SeparableFunction::compile(&spec, 2, &[1.0, 1.0]).is_err());
    }
}
