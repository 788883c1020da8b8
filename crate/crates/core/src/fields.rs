//! Chart points, time-structured polynomial vector fields and observables.
//!
//! A vector field is either autonomous or piecewise-constant in time: a list of
//! polynomial pieces on consecutive intervals. The lift `V̂φ = φ'·V` of an
//! observable along a field is again a polynomial, so iterated lifts stay exact.
//! Every lift consumes one derivative order of the observable.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::poly::{Polynomial, PolynomialMap};

/// A point in the single working chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint(Vec<f64>);

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("chart point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ChartPoint(coords))
    }

    pub fn origin(dim: usize) -> Self {
        ChartPoint(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &ChartPoint) -> f64 {
        linalg::distance(&self.0, &other.0)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Dimension { expected: dim, found: self.dim() });
        }
        Ok(())
    }

    // Integration results are checked for blow-up before they get here.
    pub(crate) fn from_state(coords: Vec<f64>) -> Self {
        ChartPoint(coords)
    }
}

/// One polynomial piece of a time-dependent field, active on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePiece {
    pub start: f64,
    pub end: f64,
    pub map: PolynomialMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeStructure {
    Autonomous(PolynomialMap),
    /// Consecutive, non-overlapping pieces covering `[pieces[0].start, pieces[last].end]`.
    PiecewiseInTime(Vec<TimePiece>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    time: TimeStructure,
    smoothness_order: u32,
}

impl VectorField {
    pub fn autonomous(map: PolynomialMap) -> Result<Self> {
        check_square(&map)?;
        Ok(VectorField { dim: map.dim_in(), time: TimeStructure::Autonomous(map), smoothness_order: u32::MAX })
    }

    pub fn piecewise(pieces: Vec<TimePiece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::invalid("piecewise field needs at least one piece"))?;
        let dim = first.map.dim_in();
        for (i, p) in pieces.iter().enumerate() {
            check_square(&p.map)?;
            if p.map.dim_in() != dim {
                return Err(Error::Dimension { expected: dim, found: p.map.dim_in() });
            }
            if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
                return Err(Error::invalid("time piece needs finite start < end"));
            }
            if i > 0 && pieces[i - 1].end != p.start {
                return Err(Error::invalid("time pieces must be contiguous and ordered"));
            }
        }
        Ok(VectorField { dim, time: TimeStructure::PiecewiseInTime(pieces), smoothness_order: u32::MAX })
    }

    /// Declares the smoothness order `m` (metadata; polynomial data is smooth anyway).
    pub fn with_smoothness(mut self, m: u32) -> Self {
        self.smoothness_order = m.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness_order(&self) -> u32 {
        self.smoothness_order
    }

    pub fn time_structure(&self) -> &TimeStructure {
        &self.time
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.time, TimeStructure::Autonomous(_))
    }

    /// Closed time window on which the field is defined.
    pub fn window(&self) -> (f64, f64) {
        match &self.time {
            TimeStructure::Autonomous(_) => (f64::NEG_INFINITY, f64::INFINITY),
            TimeStructure::PiecewiseInTime(p) => (p[0].start, p[p.len() - 1].end),
        }
    }

    /// Interior breakpoints between consecutive pieces, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.time {
            TimeStructure::Autonomous(_) => Vec::new(),
            TimeStructure::PiecewiseInTime(p) => p[1..].iter().map(|piece| piece.start).collect(),
        }
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let (start, end) = self.window();
        if !(t >= start && t <= end) {
            return Err(Error::TimeWindow { t, start, end });
        }
        Ok(())
    }

    /// The polynomial piece active at time `t` (right-continuous; the last piece includes its end).
    pub fn piece_at(&self, t: f64) -> Result<&PolynomialMap> {
        self.check_time(t)?;
        Ok(match &self.time {
            TimeStructure::Autonomous(m) => m,
            TimeStructure::PiecewiseInTime(pieces) => {
                let idx = pieces.iter().position(|p| t < p.end).unwrap_or(pieces.len() - 1);
                &pieces[idx].map
            }
        })
    }

    /// `V_t(q)`.
    pub fn eval(&self, t: f64, q: &ChartPoint) -> Result<Vec<f64>> {
        q.check_dim(self.dim)?;
        Ok(self.piece_at(t)?.eval(q.coords()))
    }

    /// Exact Jacobian of the active piece at `q`.
    pub fn jacobian(&self, t: f64, q: &ChartPoint) -> Result<Matrix> {
        q.check_dim(self.dim)?;
        Ok(self.piece_at(t)?.jacobian(q.coords()))
    }

    /// The lift `V̂_t φ : q ↦ φ'(q)·V_t(q)`; consumes one derivative order.
    pub fn lift(&self, t: f64, obs: &Observable) -> Result<Observable> {
        if obs.max_derivative_order == 0 {
            return Err(Error::DefectExhausted { needed: 1, available: 0 });
        }
        if obs.map.dim_in() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: obs.map.dim_in() });
        }
        let map = obs.map.directional(self.piece_at(t)?)?;
        Ok(Observable { map, max_derivative_order: obs.max_derivative_order - 1 })
    }

    /// Same field with every piece multiplied by `s`.
    pub fn scaled(&self, s: f64) -> VectorField {
        let time = match &self.time {
            TimeStructure::Autonomous(m) => TimeStructure::Autonomous(m.scale(s)),
            TimeStructure::PiecewiseInTime(p) => TimeStructure::PiecewiseInTime(
                p.iter().map(|piece| TimePiece { start: piece.start, end: piece.end, map: piece.map.scale(s) }).collect(),
            ),
        };
        VectorField { time, ..self.clone() }
    }

    /// Pointwise sum of two fields.
    pub fn sum(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| Ok(a.add(b)))
    }

    /// Combines two fields piece by piece; piecewise structures are merged on the
    /// union of their breakpoints over the common time window.
    pub fn zip_with<F>(&self, other: &VectorField, mut f: F) -> Result<VectorField>
    where
        F: FnMut(&PolynomialMap, &PolynomialMap) -> Result<PolynomialMap>,
    {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        if let (TimeStructure::Autonomous(a), TimeStructure::Autonomous(b)) = (&self.time, &other.time) {
            return VectorField::autonomous(f(a, b)?);
        }
        let (s0, s1) = self.window();
        let (o0, o1) = other.window();
        let (start, end) = (f64::max(s0, o0), f64::min(s1, o1));
        if start >= end {
            return Err(Error::invalid("fields have disjoint time windows"));
        }
        let mut cuts: Vec<f64> =
            self.breakpoints().into_iter().chain(other.breakpoints()).filter(|&b| b > start && b < end).collect();
        cuts.push(start);
        cuts.push(end);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let pieces = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                Ok(TimePiece { start: w[0], end: w[1], map: f(self.piece_at(mid)?, other.piece_at(mid)?)? })
            })
            .collect::<Result<Vec<_>>>()?;
        VectorField::piecewise(pieces)
    }

    pub fn zero(dim: usize) -> Self {
        VectorField::autonomous(PolynomialMap::zero(dim, dim)).expect("square")
    }

    pub fn constant(c: &[f64]) -> Self {
        VectorField::autonomous(PolynomialMap::constant(c.len(), c)).expect("square")
    }

    /// `V(x) = A x`.
    pub fn linear(a: &Matrix) -> Result<Self> {
        VectorField::autonomous(PolynomialMap::linear(a))
    }

    /// Rotation generator `A = [[0, −1], [1, 0]]`.
    pub fn rotation2d() -> Self {
        VectorField::linear(&Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]])).expect("square")
    }

    /// Heisenberg pair `V1 = (1, 0, −y/2)`, `V2 = (0, 1, x/2)` with `[V1, V2] = (0, 0, 1)`.
    pub fn heisenberg() -> [VectorField; 2] {
        let v1 = terms3(&[&[(1.0, [0, 0, 0])], &[], &[(-0.5, [0, 1, 0])]]);
        let v2 = terms3(&[&[], &[(1.0, [0, 0, 0])], &[(0.5, [1, 0, 0])]]);
        [v1, v2]
    }

    /// Brockett integrator `V1 = (1, 0, −y)`, `V2 = (0, 1, x)`.
    pub fn brockett() -> [VectorField; 2] {
        let v1 = terms3(&[&[(1.0, [0, 0, 0])], &[], &[(-1.0, [0, 1, 0])]]);
        let v2 = terms3(&[&[], &[(1.0, [0, 0, 0])], &[(1.0, [1, 0, 0])]]);
        [v1, v2]
    }

    /// Unicycle on `(x, y, c, s)` with `(c, s) = (cos θ, sin θ)`:
    /// drive `V1 = (c, s, 0, 0)` and turn `V2 = (0, 0, −s, c)`.
    pub fn unicycle() -> [VectorField; 2] {
        let var = |i| Polynomial::variable(4, i);
        let zero = || Polynomial::zero(4);
        let v1 = PolynomialMap::new(4, vec![var(2), var(3), zero(), zero()]).expect("dims");
        let v2 = PolynomialMap::new(4, vec![zero(), zero(), var(3).scale(-1.0), var(2)]).expect("dims");
        [VectorField::autonomous(v1).expect("square"), VectorField::autonomous(v2).expect("square")]
    }
}

fn terms3(components: &[&[(f64, [u32; 3])]; 3]) -> VectorField {
    let comps = components
        .iter()
        .map(|terms| Polynomial::from_terms(3, terms.iter().map(|(c, e)| (*c, e.to_vec()))).expect("valid terms"))
        .collect();
    VectorField::autonomous(PolynomialMap::new(3, comps).expect("dims")).expect("square")
}

fn check_square(map: &PolynomialMap) -> Result<()> {
    if map.dim_in() != map.dim_out() {
        return Err(Error::Dimension { expected: map.dim_in(), found: map.dim_out() });
    }
    Ok(())
}

/// Polynomial observable `φ : R^n → R^e` usable for up to `max_derivative_order` lifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    map: PolynomialMap,
    max_derivative_order: u32,
}

impl Observable {
    pub fn new(map: PolynomialMap, max_derivative_order: u32) -> Self {
        Observable { map, max_derivative_order }
    }

    /// Identity observable `φ(x) = x`.
    pub fn identity(n: usize, order: u32) -> Self {
        Observable::new(PolynomialMap::identity(n), order)
    }

    /// Scalar coordinate function `φ(x) = x_i` (0-based `i`).
    pub fn coordinate(n: usize, i: usize, order: u32) -> Self {
        Observable::new(PolynomialMap::new(n, vec![Polynomial::variable(n, i)]).expect("dims"), order)
    }

    pub fn constant(n: usize, value: &[f64], order: u32) -> Self {
        Observable::new(PolynomialMap::constant(n, value), order)
    }

    pub fn map(&self) -> &PolynomialMap {
        &self.map
    }

    pub fn max_derivative_order(&self) -> u32 {
        self.max_derivative_order
    }

    pub fn dim_in(&self) -> usize {
        self.map.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.map.dim_out()
    }

    pub fn eval(&self, q: &ChartPoint) -> Result<Vec<f64>> {
        q.check_dim(self.dim_in())?;
        Ok(self.map.eval(q.coords()))
    }

    /// `aφ + bψ`; the derivative budget is the smaller of the two.
    pub fn combine(&self, a: f64, other: &Observable, b: f64) -> Observable {
        Observable {
            map: self.map.scale(a).add(&other.map.scale(b)),
            max_derivative_order: self.max_derivative_order.min(other.max_derivative_order),
        }
    }
}

/// Left fold of lifts: the first listed `(field, time)` is applied to `obs` first,
/// so the result is `V̂_{τ_k} ∘ … ∘ V̂_{τ_1} φ`.
pub fn iterate_lift(seq: &[(&VectorField, f64)], obs: &Observable) -> Result<Observable> {
    let needed = seq.len() as u32;
    if obs.max_derivative_order < needed {
        return Err(Error::DefectExhausted { needed, available: obs.max_derivative_order });
    }
    seq.iter().try_fold(obs.clone(), |acc, (field, t)| field.lift(*t, &acc))
}

/// Sampled local bound `C` on a ball around `center`: the largest norm of
/// `V̂^k φ` seen over a deterministic low-discrepancy sample of the ball (and of
/// each time piece). It is an estimate, not a certified supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyBoundedWitness {
    pub center: ChartPoint,
    pub radius: f64,
    pub bound: f64,
    pub order: u32,
}

impl LocallyBoundedWitness {
    pub fn sample_lift_bound(
        field: &VectorField,
        obs: &Observable,
        center: &ChartPoint,
        radius: f64,
        order: u32,
        samples: usize,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("witness radius must be positive"));
        }
        center.check_dim(field.dim())?;
        let times: Vec<f64> = match field.time_structure() {
            TimeStructure::Autonomous(_) => vec![0.0],
            TimeStructure::PiecewiseInTime(p) => p.iter().map(|piece| 0.5 * (piece.start + piece.end)).collect(),
        };
        let mut bound: f64 = 0.0;
        for &t in &times {
            let lifted = iterate_lift(&vec![(field, t); order as usize], obs)?;
            for p in ball_samples(center.coords(), radius, samples) {
                bound = bound.max(linalg::norm(&lifted.map().eval(&p)));
            }
        }
        Ok(LocallyBoundedWitness { center: center.clone(), radius, bound, order })
    }

    pub fn inflated(mut self, factor: f64) -> Self {
        self.bound *= factor;
        self
    }

    pub fn contains(&self, q: &ChartPoint) -> bool {
        self.center.distance(q) <= self.radius
    }
}

/// Center plus Halton points mapped into the ball (rejection from the cube).
fn ball_samples(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let n = center.len();
    let mut out = vec![center.to_vec()];
    let mut index = 1u32;
    while out.len() < count.max(1) && index < 64 * count as u32 + 64 {
        let u: Vec<f64> = (0..n).map(|d| 2.0 * radical_inverse(index, PRIMES[d % PRIMES.len()]) - 1.0).collect();
        index += 1;
        if linalg::norm(&u) <= 1.0 {
            out.push(center.iter().zip(&u).map(|(c, ui)| c + radius * ui).collect());
        }
    }
    out
}

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let inv = 1.0 / f64::from(base);
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * f64::from(i % base);
        i /= base;
        f *= inv;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn heisenberg_values() {
        let [v1, v2] = VectorField::heisenberg();
        assert_eq!(v1.eval(0.0, &pt(&[1.0, 2.0, 3.0])).unwrap(), vec![1.0, 0.0, -1.0]);
        assert_eq!(v2.eval(0.0, &pt(&[1.0, 2.0, 3.0])).unwrap(), vec![0.0, 1.0, 0.5]);
        assert_eq!(VectorField::zero(3).eval(0.0, &pt(&[4.0, 5.0, 6.0])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn heisenberg_v2_jacobian_single_entry() {
        let [_, v2] = VectorField::heisenberg();
        let j = v2.jacobian(0.0, &pt(&[7.0, -1.0, 2.0])).unwrap();
        let mut expected = Matrix::zeros(3, 3);
        expected[(2, 0)] = 0.5;
        assert_eq!(j, expected);
        assert_eq!(VectorField::constant(&[1.0, 2.0]).jacobian(0.0, &pt(&[3.0, 4.0])).unwrap(), Matrix::zeros(2, 2));
        let a = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        assert_eq!(VectorField::linear(&a).unwrap().jacobian(0.0, &pt(&[9.0, 9.0])).unwrap(), a);
    }

    #[test]
    fn errors_on_dimension_and_window() {
        let [v1, _] = VectorField::heisenberg();
        assert_eq!(v1.eval(0.0, &pt(&[1.0, 2.0])).unwrap_err(), Error::Dimension { expected: 3, found: 2 });
        let pw = VectorField::piecewise(vec![TimePiece { start: 0.0, end: 1.0, map: PolynomialMap::zero(2, 2) }]).unwrap();
        assert!(matches!(pw.eval(1.5, &pt(&[0.0, 0.0])), Err(Error::TimeWindow { .. })));
        assert!(ChartPoint::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn piecewise_validation() {
        let m = PolynomialMap::zero(2, 2);
        let gap = vec![
            TimePiece { start: 0.0, end: 0.5, map: m.clone() },
            TimePiece { start: 0.6, end: 1.0, map: m.clone() },
        ];
        assert!(VectorField::piecewise(gap).is_err());
        assert!(VectorField::piecewise(vec![TimePiece { start: 1.0, end: 1.0, map: m }]).is_err());
        assert!(VectorField::piecewise(Vec::new()).is_err());
    }

    #[test]
    fn lift_examples() {
        let [v1, _] = VectorField::heisenberg();
        let z = Observable::coordinate(3, 2, 3);
        let lifted = v1.lift(0.0, &z).unwrap();
        let expected = PolynomialMap::new(3, vec![Polynomial::variable(3, 1).scale(-0.5)]).unwrap();
        assert_eq!(lifted.map(), &expected);
        assert_eq!(lifted.max_derivative_order(), 2);

        let c = Observable::constant(3, &[2.0], 1);
        assert!(v1.lift(0.0, &c).unwrap().map().is_zero());

        let a = Matrix::from_rows(&[[0.0, 2.0], [1.0, -1.0]]);
        let lin = VectorField::linear(&a).unwrap();
        assert_eq!(lin.lift(0.0, &Observable::identity(2, 1)).unwrap().map(), &PolynomialMap::linear(&a));
    }

    #[test]
    fn lift_needs_derivative_order() {
        let [v1, _] = VectorField::heisenberg();
        let z = Observable::coordinate(3, 2, 0);
        assert_eq!(v1.lift(0.0, &z).unwrap_err(), Error::DefectExhausted { needed: 1, available: 0 });
        let z1 = Observable::coordinate(3, 2, 1);
        assert_eq!(
            iterate_lift(&[(&v1, 0.0), (&v1, 0.0)], &z1).unwrap_err(),
            Error::DefectExhausted { needed: 2, available: 1 }
        );
    }

    #[test]
    fn iterate_lift_examples() {
        let [v1, _] = VectorField::heisenberg();
        let z = Observable::coordinate(3, 2, 2);
        assert!(iterate_lift(&[(&v1, 0.0), (&v1, 0.0)], &z).unwrap().map().is_zero());
        assert_eq!(iterate_lift(&[], &z).unwrap(), z);

        let a = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]);
        let lin = VectorField::linear(&a).unwrap();
        let twice = iterate_lift(&[(&lin, 0.0), (&lin, 0.0)], &Observable::identity(2, 2)).unwrap();
        assert_eq!(twice.map(), &PolynomialMap::linear(&a.matmul(&a)));
        assert_eq!(twice.max_derivative_order(), 0);
    }

    #[test]
    fn piecewise_one_piece_matches_autonomous() {
        let [_, v2] = VectorField::heisenberg();
        let TimeStructure::Autonomous(m) = v2.time_structure().clone() else { unreachable!() };
        let pw = VectorField::piecewise(vec![TimePiece { start: -1.0, end: 2.0, map: m }]).unwrap();
        let obs = Observable::coordinate(3, 2, 2);
        for (t, q) in [(0.0, [1.0, 2.0, 3.0]), (1.7, [-0.3, 0.1, 5.0]), (-1.0, [0.0, 0.0, 0.0])] {
            let q = pt(&q);
            assert_eq!(pw.eval(t, &q).unwrap(), v2.eval(t, &q).unwrap());
            assert_eq!(pw.jacobian(t, &q).unwrap(), v2.jacobian(t, &q).unwrap());
            assert_eq!(pw.lift(t, &obs).unwrap(), v2.lift(t, &obs).unwrap());
        }
    }

    #[test]
    fn sum_merges_breakpoints() {
        let m = |c: f64| PolynomialMap::constant(1, &[c]);
        let a = VectorField::piecewise(vec![
            TimePiece { start: 0.0, end: 0.5, map: m(1.0) },
            TimePiece { start: 0.5, end: 1.0, map: m(2.0) },
        ])
        .unwrap();
        let s = a.sum(&VectorField::constant(&[10.0])).unwrap();
        assert_eq!(s.breakpoints(), vec![0.5]);
        assert_eq!(s.eval(0.7, &pt(&[0.0])).unwrap(), vec![12.0]);
    }

    #[test]
    fn witness_bounds_lifted_norm_at_center() {
        let [v1, _] = VectorField::heisenberg();
        let phi = Observable::coordinate(3, 2, 2);
        let w = LocallyBoundedWitness::sample_lift_bound(&v1, &phi, &pt(&[0.0, 1.0, 0.0]), 0.5, 1, 200).unwrap();
        // |V̂1 z| = |y|/2 ≤ 0.75 on the ball; the center alone gives 0.5.
        assert!(w.bound >= 0.5 && w.bound <= 0.75);
        assert!(w.contains(&pt(&[0.0, 1.2, 0.0])));
    }
}
