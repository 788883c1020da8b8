//! Derivatives of a flow with respect to an additive perturbation of its field.
//!
//! For `V^α = V + αW` the derivative of `P^α_{t0,t1}(q)` at `α = 0` has two
//! integral representations: transport each perturbation forward to the final
//! time ([`Mode::In`]), or pull it back to the initial time and push the
//! integral forward once ([`Mode::Out`]).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, VectorField};
use crate::flow::{integrate_numerical, FlowMap, FlowSolver, NumericalField};
use crate::linalg;
use crate::quadrature::{split_interval, GaussLegendre};

pub const DEFAULT_NODES: usize = 32;

/// `V + αW` on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSystem {
    pub base: VectorField,
    pub perturbation: VectorField,
    pub t0: f64,
    pub t1: f64,
}

impl PerturbedSystem {
    pub fn new(base: VectorField, perturbation: VectorField, t0: f64, t1: f64) -> Result<Self> {
        if base.dim() != perturbation.dim() {
            return Err(Error::Dimension { expected: base.dim(), found: perturbation.dim() });
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::NonFinite);
        }
        for t in [t0, t1] {
            base.check_time(t)?;
            perturbation.check_time(t)?;
        }
        Ok(PerturbedSystem { base, perturbation, t0, t1 })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The field `V + αW`.
    pub fn at(&self, alpha: f64) -> Result<VectorField> {
        self.base.sum(&self.perturbation.scaled(alpha))
    }

    fn cuts(&self) -> Vec<f64> {
        let mut c = self.base.breakpoints();
        c.extend(self.perturbation.breakpoints());
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `∫ P_{τ,t1 *}(x_τ) W_τ(x_τ) dτ` with `x_τ = P_{t0,τ}(q)`.
    In,
    /// `P_{t0,t1 *}(q) ∫ P_{τ,t0 *}(x_τ) W_τ(x_τ) dτ`.
    Out,
}

/// `∂/∂α P^α_{t0,t1}(q)` at `α = 0`, by Gauss–Legendre quadrature split at breakpoints.
pub fn param_derivative(sys: &PerturbedSystem, q: &ChartPoint, mode: Mode, solver: &FlowSolver, nodes: usize) -> Result<Vec<f64>> {
    q.check_dim(sys.dim())?;
    let gl = GaussLegendre::new(nodes)?;
    let (v, w) = (&sys.base, &sys.perturbation);
    let mut acc = vec![0.0; sys.dim()];
    for (a, b) in split_interval(sys.t0, sys.t1, &sys.cuts()) {
        // Interior nodes never sit on a cut, so the active pieces are unambiguous.
        for (tau, weight) in gl.mapped(a, b) {
            let x = FlowMap::new(v, sys.t0, tau, *solver).apply(q)?;
            let wx = w.eval(tau, &x)?;
            let target = match mode {
                Mode::In => sys.t1,
                Mode::Out => sys.t0,
            };
            let jac = FlowMap::new(v, tau, target, *solver).pushforward(&x)?;
            linalg::axpy(&mut acc, weight, &jac.mul_vec(&wx));
        }
    }
    match mode {
        Mode::In => Ok(acc),
        Mode::Out => Ok(FlowMap::new(v, sys.t0, sys.t1, *solver).pushforward(q)?.mul_vec(&acc)),
    }
}

/// Central difference `(P^{ε}(q) − P^{−ε}(q)) / 2ε`.
pub fn fd_param_derivative(sys: &PerturbedSystem, q: &ChartPoint, epsilon: f64, solver: &FlowSolver) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let plus = sys.at(epsilon)?;
    let minus = sys.at(-epsilon)?;
    let a = FlowMap::new(&plus, sys.t0, sys.t1, *solver).apply(q)?;
    let b = FlowMap::new(&minus, sys.t0, sys.t1, *solver).apply(q)?;
    Ok(linalg::scaled(&linalg::sub(a.coords(), b.coords()), 0.5 / epsilon))
}

/// The time-dependent field `Z_τ = (P_{τ,0})_* W_τ`, whose flow `C` satisfies
/// `S_{0,t} = P_{0,t} ∘ C_{0,t}` for the flow `S` of `V + W`.
#[derive(Debug, Clone, Copy)]
pub struct PulledBackPerturbation<'a> {
    pub base: &'a VectorField,
    pub perturbation: &'a VectorField,
    pub t0: f64,
    pub solver: FlowSolver,
}

impl NumericalField for PulledBackPerturbation<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `(P_{τ,t0})_* W_τ(r) = M^{-1} W_τ(P_{t0,τ}(r))` with `M = P_{t0,τ *}(r)`: one
    /// variational solve instead of an inverse flow followed by a variational flow.
    fn eval_at(&self, t: f64, q: &[f64]) -> Result<Vec<f64>> {
        let r = ChartPoint::new(q.to_vec())?;
        let (p, m) = FlowMap::new(self.base, self.t0, t, self.solver).apply_with_pushforward(&r)?;
        m.solve(&self.perturbation.eval(t, &p)?).ok_or(Error::NonFinite)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut c = self.base.breakpoints();
        c.extend(self.perturbation.breakpoints());
        c
    }
}

/// `‖S_{0,t}(q) − P_{0,t}(C_{0,t}(q))‖` with `S` integrated directly as the flow of `V + W`.
pub fn variation_of_parameters_check(
    v: &VectorField,
    w: &VectorField,
    q: &ChartPoint,
    t: f64,
    solver: &FlowSolver,
) -> Result<f64> {
    let total = v.sum(w)?;
    let s = FlowMap::new(&total, 0.0, t, *solver).apply(q)?;
    let z = PulledBackPerturbation { base: v, perturbation: w, t0: 0.0, solver: *solver };
    let c = integrate_numerical(&z, 0.0, t, q, solver)?;
    let composed = FlowMap::new(v, 0.0, t, *solver).apply(&c)?;
    Ok(s.distance(&composed))
}
