//! Truncated Volterra (chronological) series, remainders and order probes.
//!
//! The `i`-th series term at `q` is `∫_{Δ_i(t)} (V̂_{τ_i} ∘ … ∘ V̂_{τ_1} φ)(q) dτ`
//! over the simplex `t0 ≤ τ_i ≤ … ≤ τ_1 ≤ t`. Autonomous fields take the closed
//! form `(t − t0)^i / i! · (V̂^i φ)(q)`; otherwise the simplex is integrated by
//! nested Gauss–Legendre, each level split at the time breakpoints it sees.

use alloc::vec;
use alloc::vec::Vec;

use libm::log;

use crate::error::{Error, Result};
use crate::fields::{iterate_lift, ChartPoint, LocallyBoundedWitness, Observable, VectorField};
use crate::flow::{FlowMap, FlowSolver};
use crate::linalg::{self, axpy};
use crate::quadrature::{split_interval, GaussLegendre};

/// Samples at or below this norm count as exact cancellation and are left out of fits.
pub const ZERO_FLOOR: f64 = 1e-14;

/// Default Gauss–Legendre nodes per nesting level.
pub const DEFAULT_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTerm {
    pub order: usize,
    pub value: Vec<f64>,
}

/// Log-log fit of sampled norms on a dyadic grid `t_j = t_max · 2^{-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub t_grid: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_slope: f64,
    pub r_squared: f64,
    /// Grid indices whose norm fell under [`ZERO_FLOOR`].
    pub excluded: Vec<usize>,
}

impl OrderEstimate {
    pub fn usable_points(&self) -> usize {
        self.t_grid.len() - self.excluded.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub k: usize,
    pub t: f64,
    pub remainder_norm: f64,
    /// `C · |t − t0|^k / k!` when a witness was supplied.
    pub bound: Option<f64>,
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn check_span(fields: &[&VectorField], obs: &Observable, q: &ChartPoint, t0: f64, t: f64) -> Result<()> {
    q.check_dim(obs.dim_in())?;
    for f in fields {
        if f.dim() != obs.dim_in() {
            return Err(Error::Dimension { expected: obs.dim_in(), found: f.dim() });
        }
        f.check_time(t0)?;
        f.check_time(t)?;
    }
    Ok(())
}

/// Nested quadrature over `t0 ≤ τ_k ≤ … ≤ τ_1 ≤ upper`.
///
/// `descend(state, j, τ_j)` produces the state for the next level; `leaf(state, τ_k)`
/// gives the integrand at the innermost node. `cuts[j]` are the breakpoints level `j` splits at.
#[allow(clippy::too_many_arguments)]
fn nested_simplex<S, D, L>(
    gl: &GaussLegendre,
    t0: f64,
    upper: f64,
    level: usize,
    cuts: &[Vec<f64>],
    state: &S,
    descend: &mut D,
    leaf: &mut L,
    weight: f64,
    out: &mut Vec<f64>,
) -> Result<()>
where
    D: FnMut(&S, usize, f64) -> Result<S>,
    L: FnMut(&S, f64) -> Result<Vec<f64>>,
{
    for (a, b) in split_interval(t0, upper, &cuts[level]) {
        for (x, w) in gl.mapped(a, b) {
            let next = descend(state, level, x)?;
            if level + 1 == cuts.len() {
                let v = leaf(&next, x)?;
                if out.is_empty() {
                    out.resize(v.len(), 0.0);
                }
                axpy(out, weight * w, &v);
            } else {
                nested_simplex(gl, t0, x, level + 1, cuts, &next, descend, leaf, weight * w, out)?;
            }
        }
    }
    Ok(())
}

fn level_cuts(fields: &[&VectorField]) -> Vec<Vec<f64>> {
    (0..fields.len()).map(|j| fields[j..].iter().flat_map(|f| f.breakpoints()).collect()).collect()
}

/// Volume of the `k`-simplex of side `t − t0` by the same nested quadrature
/// used for series terms; the closed form is `|t − t0|^k / k!` (signed by orientation).
pub fn simplex_volume(t0: f64, t: f64, k: usize, nodes: usize) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let gl = GaussLegendre::new(nodes)?;
    let cuts = vec![Vec::new(); k];
    let mut out = Vec::new();
    nested_simplex(&gl, t0, t, 0, &cuts, &(), &mut |_, _, _| Ok(()), &mut |_, _| Ok(vec![1.0]), 1.0, &mut out)?;
    Ok(out[0])
}

/// `∫_{Δ_k(t)} (V̂^{(k)}_{τ_k} ∘ … ∘ V̂^{(1)}_{τ_1} φ)(q) dτ`, field `i` paired with `τ_i`.
pub fn simplex_integral_term(
    fields: &[&VectorField],
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    nodes: usize,
) -> Result<Vec<f64>> {
    check_span(fields, obs, q, t0, t)?;
    if fields.iter().all(|f| f.is_autonomous()) {
        let k = fields.len();
        let seq: Vec<(&VectorField, f64)> = fields.iter().map(|f| (*f, t0)).collect();
        let lifted = iterate_lift(&seq, obs)?;
        let scale = libm::pow(t - t0, k as f64) / factorial(k);
        return Ok(linalg::scaled(&lifted.eval(q)?, scale));
    }
    simplex_integral_term_quadrature(fields, obs, q, t0, t, nodes)
}

/// Same term, always by nested quadrature (also for autonomous fields).
pub fn simplex_integral_term_quadrature(
    fields: &[&VectorField],
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    nodes: usize,
) -> Result<Vec<f64>> {
    check_span(fields, obs, q, t0, t)?;
    let k = fields.len();
    if obs.max_derivative_order() < k as u32 {
        return Err(Error::DefectExhausted { needed: k as u32, available: obs.max_derivative_order() });
    }
    if k == 0 {
        return obs.eval(q);
    }
    let gl = GaussLegendre::new(nodes)?;
    let cuts = level_cuts(fields);
    let mut out = Vec::new();
    nested_simplex(
        &gl,
        t0,
        t,
        0,
        &cuts,
        obs,
        &mut |o: &Observable, j, tau| fields[j].lift(tau, o),
        &mut |o: &Observable, _| o.eval(q),
        1.0,
        &mut out,
    )?;
    Ok(out)
}

/// The truncation `φ(q) + Σ_{i=1}^{k−1}` (order-`i` term), i.e. the Volterra series
/// of `P̂_{t0,t} φ` at `q` with the remainder `R̂_k` dropped.
pub fn volterra_truncate(
    field: &VectorField,
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    k: usize,
    nodes: usize,
) -> Result<Vec<f64>> {
    let terms = volterra_terms(field, obs, q, t0, t, k, nodes)?;
    let mut acc = obs.eval(q)?;
    for term in &terms {
        axpy(&mut acc, 1.0, &term.value);
    }
    Ok(acc)
}

/// The individual series terms of orders `1..k`.
pub fn volterra_terms(
    field: &VectorField,
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    k: usize,
    nodes: usize,
) -> Result<Vec<SeriesTerm>> {
    if k == 0 {
        return Err(Error::invalid("truncation order k must be at least 1"));
    }
    check_span(&[field], obs, q, t0, t)?;
    let needed = (k - 1) as u32;
    if obs.max_derivative_order() < needed {
        return Err(Error::DefectExhausted { needed, available: obs.max_derivative_order() });
    }
    let mut terms = Vec::with_capacity(k - 1);
    if field.is_autonomous() {
        let mut lifted = obs.clone();
        for i in 1..k {
            lifted = field.lift(t0, &lifted)?;
            let scale = libm::pow(t - t0, i as f64) / factorial(i);
            terms.push(SeriesTerm { order: i, value: linalg::scaled(&lifted.eval(q)?, scale) });
        }
    } else {
        for i in 1..k {
            let fields = vec![field; i];
            terms.push(SeriesTerm { order: i, value: simplex_integral_term_quadrature(&fields, obs, q, t0, t, nodes)? });
        }
    }
    Ok(terms)
}

/// `R̂_k(t)φ(q) = P̂_{t0,t}φ(q) − truncation`, optionally with the bound `C|t − t0|^k/k!`.
#[allow(clippy::too_many_arguments)]
pub fn remainder_eval(
    field: &VectorField,
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    k: usize,
    solver: &FlowSolver,
    nodes: usize,
    witness: Option<&LocallyBoundedWitness>,
) -> Result<RemainderReport> {
    let truncated = volterra_truncate(field, obs, q, t0, t, k, nodes)?;
    let exact = FlowMap::new(field, t0, t, *solver).apply_operator(obs, q)?;
    let remainder_norm = linalg::distance(&exact, &truncated);
    let bound = witness.map(|w| w.bound * libm::pow((t - t0).abs(), k as f64) / factorial(k));
    Ok(RemainderReport { k, t, remainder_norm, bound })
}

/// Direct evaluation of `R̂_k(t)φ(q) = ∫_{Δ_k(t)} (V̂_{τ_k} ∘ … ∘ V̂_{τ_1} φ)(P_{t0,τ_k}(q)) dτ`,
/// one flow solve per innermost node. Meant for cross-checking [`remainder_eval`] at small `k`.
#[allow(clippy::too_many_arguments)]
pub fn remainder_direct(
    field: &VectorField,
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    k: usize,
    solver: &FlowSolver,
    nodes: usize,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("remainder order k must be at least 1"));
    }
    check_span(&[field], obs, q, t0, t)?;
    if obs.max_derivative_order() < k as u32 {
        return Err(Error::DefectExhausted { needed: k as u32, available: obs.max_derivative_order() });
    }
    if t == t0 {
        return Ok(vec![0.0; obs.dim_out()]);
    }
    let gl = GaussLegendre::new(nodes)?;
    let fields = vec![field; k];
    let cuts = level_cuts(&fields);
    let mut out = Vec::new();
    nested_simplex(
        &gl,
        t0,
        t,
        0,
        &cuts,
        obs,
        &mut |o: &Observable, _, tau| field.lift(tau, o),
        &mut |o: &Observable, tau| o.eval(&FlowMap::new(field, t0, tau, *solver).apply(q)?),
        1.0,
        &mut out,
    )?;
    Ok(out)
}

/// `‖φ(P_{t0,t}(q)) − φ(q) − ∫_{t0}^{t} (V̂_τ φ)(P_{t0,τ}(q)) dτ‖`.
pub fn integral_equation_residual(
    field: &VectorField,
    obs: &Observable,
    q: &ChartPoint,
    t0: f64,
    t: f64,
    solver: &FlowSolver,
    nodes: usize,
) -> Result<f64> {
    if t == t0 {
        check_span(&[field], obs, q, t0, t)?;
        return Ok(0.0);
    }
    let integral = remainder_direct(field, obs, q, t0, t, 1, solver, nodes)?;
    let end = FlowMap::new(field, t0, t, *solver).apply_operator(obs, q)?;
    let start = obs.eval(q)?;
    let resid: Vec<f64> = end.iter().zip(&start).zip(&integral).map(|((e, s), i)| e - s - i).collect();
    Ok(linalg::norm(&resid))
}

/// Dyadic grid `t_max · 2^{-j}`, `j = 0..levels`, and the sampled norms on it.
pub fn sample_grid<F>(mut sample: F, t_max: f64, levels: usize) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max must be positive"));
    }
    if !(4..=40).contains(&levels) {
        return Err(Error::invalid("levels must lie in 4..=40"));
    }
    let mut grid = Vec::with_capacity(levels);
    let mut norms = Vec::with_capacity(levels);
    let mut t = t_max;
    for _ in 0..levels {
        let v = sample(t)?;
        if v.is_nan() || v < 0.0 {
            return Err(Error::invalid("probe samples must be nonnegative numbers"));
        }
        grid.push(t);
        norms.push(v);
        t *= 0.5;
    }
    Ok((grid, norms))
}

/// Least-squares slope of `log(norm)` against `log(t)`, skipping samples under [`ZERO_FLOOR`].
pub fn fit_order(t_grid: Vec<f64>, norms: Vec<f64>) -> Result<OrderEstimate> {
    let excluded: Vec<usize> = norms.iter().enumerate().filter(|(_, &n)| n <= ZERO_FLOOR).map(|(i, _)| i).collect();
    let pts: Vec<(f64, f64)> =
        t_grid.iter().zip(&norms).filter(|(_, &n)| n > ZERO_FLOOR).map(|(&t, &n)| (log(t), log(n))).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateProbe);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|p| {
        let r = p.1 - (my + slope * (p.0 - mx));
        r * r
    }).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(OrderEstimate { t_grid, norms, fitted_slope: slope, r_squared, excluded })
}

/// Samples `sample` on the dyadic grid and fits the decay order.
///
/// An `ô(t^k)` claim is supported when the slope exceeds `k`; every sample at
/// numerical zero yields [`Error::DegenerateProbe`], which callers treat as exact cancellation.
pub fn order_probe<F>(sample: F, t_max: f64, levels: usize) -> Result<OrderEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (grid, norms) = sample_grid(sample, t_max, levels)?;
    fit_order(grid, norms)
}
