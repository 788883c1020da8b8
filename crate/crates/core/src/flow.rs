//! Flow maps `P_{t0,t1}` of vector fields, their pushforwards and inverses.
//!
//! Integration is fixed-step classical RK4. With breakpoint splitting on, the
//! interval is cut at every time breakpoint of the field and each sub-interval
//! uses the piece active on it, so no step straddles a discontinuity in time.
//! Backward flows integrate with negative steps.

use alloc::vec;
use alloc::vec::Vec;

use libm::{cbrt, ceil};

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Observable, VectorField};
use crate::linalg::{self, Matrix};
use crate::quadrature::split_interval;

/// Any coordinate beyond this magnitude aborts integration.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSolver {
    /// RK4 substeps per unit of time; each (sub)interval gets `ceil(len · density)` steps, at least one.
    pub steps_per_unit_time: u32,
    pub breakpoint_splitting: bool,
}

impl Default for FlowSolver {
    fn default() -> Self {
        FlowSolver { steps_per_unit_time: 1000, breakpoint_splitting: true }
    }
}

impl FlowSolver {
    pub fn with_density(steps_per_unit_time: u32) -> Self {
        FlowSolver { steps_per_unit_time: steps_per_unit_time.max(1), ..Default::default() }
    }

    fn steps_for(&self, len: f64) -> usize {
        let n = ceil(len.abs() * f64::from(self.steps_per_unit_time) - 1e-9);
        (n as usize).max(1)
    }
}

/// Integrates `x' = rhs(t, piece_time, x)` from `t0` to `t1`.
///
/// `piece_time` is the midpoint of the current sub-interval when `cuts` are
/// honoured, otherwise the stage time itself.
pub(crate) fn integrate<F>(t0: f64, t1: f64, mut x: Vec<f64>, solver: &FlowSolver, cuts: &[f64], mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, f64, &[f64]) -> Result<Vec<f64>>,
{
    if t0 == t1 {
        return Ok(x);
    }
    let segments = if solver.breakpoint_splitting { split_interval(t0, t1, cuts) } else { vec![(t0, t1)] };
    let dim = x.len();
    let mut tmp = vec![0.0; dim];
    let mut step = 0usize;
    for (a, b) in segments {
        let n = solver.steps_for(b - a);
        let h = (b - a) / n as f64;
        let seg_mid = 0.5 * (a + b);
        for i in 0..n {
            let ts = a + i as f64 * h;
            let te = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
            let tm = 0.5 * (ts + te);
            let piece = |t: f64| if solver.breakpoint_splitting { seg_mid } else { t };

            let k1 = rhs(ts, piece(ts), &x)?;
            stage(&mut tmp, &x, 0.5 * h, &k1);
            let k2 = rhs(tm, piece(tm), &tmp)?;
            stage(&mut tmp, &x, 0.5 * h, &k2);
            let k3 = rhs(tm, piece(tm), &tmp)?;
            stage(&mut tmp, &x, h, &k3);
            let k4 = rhs(te, piece(te), &tmp)?;
            for j in 0..dim {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            step += 1;
            if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
                return Err(Error::BlowUp { step, t: te, segment: None });
            }
        }
    }
    Ok(x)
}

fn stage(out: &mut [f64], x: &[f64], h: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + h * ki;
    }
}

/// The flow `P_{t0,t1}` of a field under a fixed solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct FlowMap<'a> {
    pub field: &'a VectorField,
    pub t0: f64,
    pub t1: f64,
    pub solver: FlowSolver,
}

impl<'a> FlowMap<'a> {
    pub fn new(field: &'a VectorField, t0: f64, t1: f64, solver: FlowSolver) -> Self {
        FlowMap { field, t0, t1, solver }
    }

    /// `Q_{t0,t1} = P_{t1,t0}`.
    pub fn reversed(&self) -> Self {
        FlowMap { t0: self.t1, t1: self.t0, ..*self }
    }

    fn check(&self, q: &ChartPoint) -> Result<()> {
        q.check_dim(self.field.dim())?;
        self.field.check_time(self.t0)?;
        self.field.check_time(self.t1)
    }

    /// `P_{t0,t1}(q)`.
    pub fn apply(&self, q: &ChartPoint) -> Result<ChartPoint> {
        self.check(q)?;
        let field = self.field;
        let x = integrate(self.t0, self.t1, q.coords().to_vec(), &self.solver, &field.breakpoints(), |_, pt, x| {
            Ok(field.piece_at(pt)?.eval(x))
        })?;
        Ok(ChartPoint::from_state(x))
    }

    /// `P_{t0,t1}(q)` together with the differential `P_{t0,t1 *}(q)`, from the
    /// variational equation `M' = V'(x) M`, `M(t0) = Id`.
    pub fn apply_with_pushforward(&self, q: &ChartPoint) -> Result<(ChartPoint, Matrix)> {
        self.check(q)?;
        let n = self.field.dim();
        let mut state = q.coords().to_vec();
        state.extend_from_slice(Matrix::identity(n).as_slice());
        let field = self.field;
        let out = integrate(self.t0, self.t1, state, &self.solver, &field.breakpoints(), |_, pt, s| {
            let piece = field.piece_at(pt)?;
            let (x, m) = s.split_at(n);
            let jac = piece.jacobian(x);
            let mut rate = piece.eval(x);
            rate.resize(n + n * n, 0.0);
            for r in 0..n {
                let row = jac.row(r);
                for c in 0..n {
                    rate[n + r * n + c] = (0..n).map(|k| row[k] * m[k * n + c]).sum();
                }
            }
            Ok(rate)
        })?;
        let (x, m) = out.split_at(n);
        Ok((ChartPoint::from_state(x.to_vec()), Matrix::from_row_major(n, n, m.to_vec())))
    }

    pub fn pushforward(&self, q: &ChartPoint) -> Result<Matrix> {
        Ok(self.apply_with_pushforward(q)?.1)
    }

    /// `P_{t0,t1}^{-1}(q) = P_{t1,t0}(q)`.
    pub fn inverse(&self, q: &ChartPoint) -> Result<ChartPoint> {
        self.reversed().apply(q)
    }

    /// The flow operator `P̂φ = φ∘P` evaluated at `q`.
    pub fn apply_operator(&self, obs: &Observable, q: &ChartPoint) -> Result<Vec<f64>> {
        if obs.dim_in() != self.field.dim() {
            return Err(Error::Dimension { expected: self.field.dim(), found: obs.dim_in() });
        }
        obs.eval(&self.apply(q)?)
    }
}

/// A field known only through point evaluations, such as a pushforward by a
/// numerically integrated flow. It has no exact derivatives, so the exact
/// (polynomial) paths only accept [`VectorField`].
pub trait NumericalField {
    fn dim(&self) -> usize;

    fn eval_at(&self, t: f64, q: &[f64]) -> Result<Vec<f64>>;

    /// Interior time breakpoints, if any.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl NumericalField for VectorField {
    fn dim(&self) -> usize {
        VectorField::dim(self)
    }

    fn eval_at(&self, t: f64, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != VectorField::dim(self) {
            return Err(Error::Dimension { expected: VectorField::dim(self), found: q.len() });
        }
        Ok(self.piece_at(t)?.eval(q))
    }

    fn breakpoints(&self) -> Vec<f64> {
        VectorField::breakpoints(self)
    }
}

/// Integrates the flow of a numerical field from `t0` to `t1`.
pub fn integrate_numerical<N: NumericalField + ?Sized>(
    field: &N,
    t0: f64,
    t1: f64,
    q: &ChartPoint,
    solver: &FlowSolver,
) -> Result<ChartPoint> {
    q.check_dim(field.dim())?;
    let x = integrate(t0, t1, q.coords().to_vec(), solver, &field.breakpoints(), |t, _, x| field.eval_at(t, x))?;
    Ok(ChartPoint::from_state(x))
}

/// Central finite-difference Jacobian of a numerical field, step
/// `h = ε^{1/3} · max(1, |x_c|)` per coordinate.
pub fn fd_jacobian<N: NumericalField + ?Sized>(field: &N, t: f64, q: &[f64]) -> Result<Matrix> {
    let n = field.dim();
    let base = cbrt(f64::EPSILON);
    let mut cols = Vec::with_capacity(n);
    for c in 0..n {
        let h = base * f64::max(1.0, q[c].abs());
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[c] += h;
        minus[c] -= h;
        let d = linalg::scaled(&linalg::sub(&field.eval_at(t, &plus)?, &field.eval_at(t, &minus)?), 0.5 / h);
        cols.push(d);
    }
    let mut j = Matrix::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            j[(r, c)] = *v;
        }
    }
    Ok(j)
}

/// `F_*V(r) = F_*(F^{-1}(r)) · V(t_eval, F^{-1}(r))` for a flow map `F`.
#[derive(Debug, Clone, Copy)]
pub struct PushforwardField<'a> {
    pub map: FlowMap<'a>,
    pub field: &'a VectorField,
    pub t_eval: f64,
}

impl<'a> PushforwardField<'a> {
    pub fn new(map: FlowMap<'a>, field: &'a VectorField, t_eval: f64) -> Result<Self> {
        if map.field.dim() != field.dim() {
            return Err(Error::Dimension { expected: map.field.dim(), found: field.dim() });
        }
        Ok(PushforwardField { map, field, t_eval })
    }

    pub fn eval(&self, r: &ChartPoint) -> Result<Vec<f64>> {
        let p = self.map.inverse(r)?;
        let (_, jac) = self.map.apply_with_pushforward(&p)?;
        Ok(jac.mul_vec(&self.field.eval(self.t_eval, &p)?))
    }
}

impl NumericalField for PushforwardField<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval_at(&self, _t: f64, q: &[f64]) -> Result<Vec<f64>> {
        self.eval(&ChartPoint::new(q.to_vec())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TimePiece;
    use crate::poly::PolynomialMap;
    use core::f64::consts::FRAC_PI_2;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    fn solver() -> FlowSolver {
        FlowSolver::default()
    }

    #[test]
    fn rotation_quarter_turn() {
        let rot = VectorField::rotation2d();
        let fm = FlowMap::new(&rot, 0.0, FRAC_PI_2, solver());
        let q = fm.apply(&pt(&[1.0, 0.0])).unwrap();
        assert!(q.distance(&pt(&[0.0, 1.0])) < 1e-8);
        let m = fm.pushforward(&pt(&[1.0, 0.0])).unwrap();
        assert!(m.sub(&Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]])).max_abs() < 1e-8);
        let x1 = Observable::coordinate(2, 0, 1);
        assert!(fm.apply_operator(&x1, &pt(&[1.0, 0.0])).unwrap()[0].abs() < 1e-8);
    }

    #[test]
    fn zero_duration_is_exact_identity() {
        let [v1, _] = VectorField::heisenberg();
        let q = pt(&[0.3, -0.7, 1.1]);
        let fm = FlowMap::new(&v1, 0.4, 0.4, solver());
        assert_eq!(fm.apply(&q).unwrap(), q);
        assert_eq!(fm.inverse(&q).unwrap(), q);
    }

    #[test]
    fn heisenberg_closed_form() {
        let [v1, _] = VectorField::heisenberg();
        let fm = FlowMap::new(&v1, 0.0, 1.0, solver());
        let q = fm.apply(&pt(&[0.0, 1.0, 0.0])).unwrap();
        assert!(q.distance(&pt(&[1.0, 1.0, -0.5])) < 1e-12);
        let mut expected = Matrix::identity(3);
        expected[(2, 1)] = -0.5;
        assert!(fm.pushforward(&pt(&[0.0, 1.0, 0.0])).unwrap().sub(&expected).max_abs() < 1e-12);
        let back = fm.inverse(&pt(&[1.0, 1.0, -0.5])).unwrap();
        assert!(back.distance(&pt(&[0.0, 1.0, 0.0])) < 1e-8);
        let z = Observable::coordinate(3, 2, 1);
        assert!((fm.apply_operator(&z, &pt(&[0.0, 1.0, 0.0])).unwrap()[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_identity_pushforward() {
        let c = VectorField::constant(&[1.0, -2.0]);
        let m = FlowMap::new(&c, 0.0, 3.0, solver()).pushforward(&pt(&[5.0, 5.0])).unwrap();
        assert_eq!(m, Matrix::identity(2));
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x^2 from x = 1 explodes at t = 1.
        let sq = VectorField::autonomous(
            PolynomialMap::new(1, vec![crate::poly::Polynomial::from_terms(1, [(1.0, vec![2])]).unwrap()]).unwrap(),
        )
        .unwrap();
        let err = FlowMap::new(&sq, 0.0, 2.0, FlowSolver::with_density(100)).apply(&pt(&[1.0])).unwrap_err();
        match err {
            Error::BlowUp { step, t, .. } => assert!(step > 90 && t > 0.9 && t <= 1.1, "step {step} t {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn time_window_enforced() {
        let pw = VectorField::piecewise(vec![TimePiece { start: 0.0, end: 1.0, map: PolynomialMap::zero(1, 1) }]).unwrap();
        let err = FlowMap::new(&pw, 0.0, 2.0, solver()).apply(&pt(&[0.0])).unwrap_err();
        assert!(matches!(err, Error::TimeWindow { .. }));
    }

    #[test]
    fn breakpoint_splitting_is_exact_for_piecewise_constant() {
        let m = |c: f64| PolynomialMap::constant(1, &[c]);
        let pw = VectorField::piecewise(vec![
            TimePiece { start: 0.0, end: 0.3337, map: m(1.0) },
            TimePiece { start: 0.3337, end: 1.0, map: m(-2.0) },
        ])
        .unwrap();
        let split = FlowMap::new(&pw, 0.0, 1.0, FlowSolver::with_density(10)).apply(&pt(&[0.0])).unwrap();
        assert!((split.coords()[0] - (0.3337 - 2.0 * (1.0 - 0.3337))).abs() < 1e-14);
        let unsplit = FlowSolver { steps_per_unit_time: 10, breakpoint_splitting: false };
        let rough = FlowMap::new(&pw, 0.0, 1.0, unsplit).apply(&pt(&[0.0])).unwrap();
        assert!((rough.coords()[0] - split.coords()[0]).abs() > 1e-6);
    }

    #[test]
    fn pushforward_by_translation() {
        // F = flow of c for time s, V = A x  ⇒  F_*V(r) = A (r − s c).
        let c = VectorField::constant(&[1.0, 0.5]);
        let a = Matrix::from_rows(&[[0.0, 2.0], [-1.0, 1.0]]);
        let lin = VectorField::linear(&a).unwrap();
        let s = 0.7;
        let pf = PushforwardField::new(FlowMap::new(&c, 0.0, s, solver()), &lin, 0.0).unwrap();
        let r = [0.2, -0.4];
        let expected = a.mul_vec(&[r[0] - s * 1.0, r[1] - s * 0.5]);
        let got = pf.eval(&pt(&r)).unwrap();
        assert!(linalg::distance(&got, &expected) < 1e-12);

        let ident = PushforwardField::new(FlowMap::new(&c, 0.0, 0.0, solver()), &lin, 0.0).unwrap();
        assert_eq!(ident.eval(&pt(&r)).unwrap(), lin.eval(0.0, &pt(&r)).unwrap());
    }

    #[test]
    fn field_invariant_under_own_flow() {
        let rot = VectorField::rotation2d();
        let pf = PushforwardField::new(FlowMap::new(&rot, 0.0, 0.8, solver()), &rot, 0.0).unwrap();
        for r in [[1.0, 0.0], [0.3, -2.0], [-1.5, 0.25]] {
            let got = pf.eval(&pt(&r)).unwrap();
            assert!(linalg::distance(&got, &rot.eval(0.0, &pt(&r)).unwrap()) < 1e-6);
        }
    }
}
