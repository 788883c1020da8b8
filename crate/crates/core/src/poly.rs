//! Multivariate polynomials with exact differentiation.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent tuple, so like terms are
//! always merged and two polynomials compare equal iff their coefficients do.
//! Zero coefficients are dropped eagerly.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Scalar polynomial in `nvars` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(c, vec![0; nvars]);
        p
    }

    /// The coordinate function `x_var`.
    pub fn variable(nvars: usize, var: usize) -> Self {
        assert!(var < nvars);
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        let mut p = Polynomial::zero(nvars);
        p.add_term(1.0, exps);
        p
    }

    /// Builds from `(coefficient, exponents)` pairs; repeated exponent tuples are summed.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut p = Polynomial::zero(nvars);
        for (coef, exps) in terms {
            if exps.len() != nvars {
                return Err(Error::Dimension { expected: nvars, found: exps.len() });
            }
            if !coef.is_finite() {
                return Err(Error::NonFinite);
            }
            p.add_term(coef, exps);
        }
        Ok(p)
    }

    fn add_term(&mut self, coef: f64, exps: Vec<u32>) {
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.retain(|_, c| *c != 0.0);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterates `(coefficient, exponents)` in canonical (lexicographic exponent) order.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &[u32])> + '_ {
        self.terms.iter().map(|(e, &c)| (c, e.as_slice()))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(exps, &c)| exps.iter().zip(x).fold(c, |acc, (&e, &xi)| acc * powu(xi, e)))
            .sum()
    }

    /// All partial derivatives at `x`, without building the derivative polynomials.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        self.gradient_into(x, &mut g);
        g
    }

    pub(crate) fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nvars);
        g.iter_mut().for_each(|v| *v = 0.0);
        for (exps, &c) in &self.terms {
            for (var, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let rest = exps.iter().zip(x).enumerate().fold(c * f64::from(e), |acc, (i, (&ei, &xi))| {
                    acc * if i == var { powu(xi, ei - 1) } else { powu(xi, ei) }
                });
                g[var] += rest;
            }
        }
    }

    /// Exact partial derivative with respect to `x_var`.
    pub fn partial(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (exps, &c) in &self.terms {
            let e = exps[var];
            if e == 0 {
                continue;
            }
            let mut d = exps.clone();
            d[var] = e - 1;
            out.add_term(c * f64::from(e), d);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (exps, &c) in &other.terms {
            out.add_term(c, exps.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (exps, &c) in &self.terms {
            out.add_term(c * s, exps.clone());
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(ca * cb, exps);
            }
        }
        out
    }
}

fn powu(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Polynomial map `R^dim_in → R^dim_out`, one [`Polynomial`] per output component.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    dim_in: usize,
    components: Vec<Polynomial>,
}

impl PolynomialMap {
    pub fn new(dim_in: usize, components: Vec<Polynomial>) -> Result<Self> {
        if dim_in == 0 || components.is_empty() {
            return Err(Error::invalid("polynomial map needs positive input and output dimension"));
        }
        if let Some(p) = components.iter().find(|p| p.nvars != dim_in) {
            return Err(Error::Dimension { expected: dim_in, found: p.nvars });
        }
        Ok(PolynomialMap { dim_in, components })
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        PolynomialMap { dim_in, components: vec![Polynomial::zero(dim_in); dim_out] }
    }

    pub fn constant(dim_in: usize, value: &[f64]) -> Self {
        PolynomialMap { dim_in, components: value.iter().map(|&c| Polynomial::constant(dim_in, c)).collect() }
    }

    pub fn identity(n: usize) -> Self {
        PolynomialMap { dim_in: n, components: (0..n).map(|i| Polynomial::variable(n, i)).collect() }
    }

    /// `x ↦ A x`.
    pub fn linear(a: &Matrix) -> Self {
        let n = a.cols();
        let components = (0..a.rows())
            .map(|r| {
                let mut p = Polynomial::zero(n);
                for c in 0..n {
                    let mut e = vec![0; n];
                    e[c] = 1;
                    p.add_term(a[(r, c)], e);
                }
                p
            })
            .collect();
        PolynomialMap { dim_in: n, components }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// Exact Jacobian evaluated at `x`; entry `(r, c) = ∂f_r/∂x_c`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let mut j = Matrix::zeros(self.dim_out(), self.dim_in);
        for (r, p) in self.components.iter().enumerate() {
            p.gradient_into(x, j.row_mut(r));
        }
        j
    }

    /// Symbolic Jacobian, row-major.
    pub fn jacobian_map(&self) -> Vec<Vec<Polynomial>> {
        self.components.iter().map(|p| (0..self.dim_in).map(|c| p.partial(c)).collect()).collect()
    }

    /// The map `x ↦ f'(x) · v(x)`, the directional derivative of `self` along `v`.
    pub fn directional(&self, v: &PolynomialMap) -> Result<PolynomialMap> {
        if v.dim_in != self.dim_in || v.dim_out() != self.dim_in {
            return Err(Error::Dimension { expected: self.dim_in, found: v.dim_out() });
        }
        let components = self
            .components
            .iter()
            .map(|p| {
                (0..self.dim_in).fold(Polynomial::zero(self.dim_in), |acc, c| {
                    let d = p.partial(c);
                    if d.is_zero() {
                        acc
                    } else {
                        acc.add(&d.mul(&v.components[c]))
                    }
                })
            })
            .collect();
        Ok(PolynomialMap { dim_in: self.dim_in, components })
    }

    /// Coordinate Lie bracket `[v, w] = Dw·v − Dv·w` of two maps `R^n → R^n`.
    pub fn lie_bracket(v: &PolynomialMap, w: &PolynomialMap) -> Result<PolynomialMap> {
        Ok(w.directional(v)?.sub(&v.directional(w)?))
    }

    pub fn add(&self, other: &PolynomialMap) -> PolynomialMap {
        assert_eq!((self.dim_in, self.dim_out()), (other.dim_in, other.dim_out()));
        let components = self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect();
        PolynomialMap { dim_in: self.dim_in, components }
    }

    pub fn sub(&self, other: &PolynomialMap) -> PolynomialMap {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> PolynomialMap {
        PolynomialMap { dim_in: self.dim_in, components: self.components.iter().map(|p| p.scale(s)).collect() }
    }
}
