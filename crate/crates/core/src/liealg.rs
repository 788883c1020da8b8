//! Lie brackets of polynomial fields, bracket expressions and commutators of flows.
//!
//! Composition convention: the bracket of flows is the point map
//! `[P, Q] = Q^{-1} ∘ P^{-1} ∘ Q ∘ P`, i.e. run `P`, then `Q`, then `P^{-1}`, then
//! `Q^{-1}`. As operators on observables the order reverses:
//! `[P, Q]^ = P̂ ∘ Q̂ ∘ P̂^{-1} ∘ Q̂^{-1}`. Nested expressions are compiled into a
//! flat program of signed segments by applying this rule recursively.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::chrono::{fit_order, sample_grid, OrderEstimate};
use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Observable, VectorField};
use crate::flow::{fd_jacobian, FlowMap, FlowSolver, NumericalField, PushforwardField};
use crate::linalg::{self, Matrix};
use crate::poly::PolynomialMap;
use crate::quadrature::GaussLegendre;

/// Residuals at or below this level count as exact cancellation in the asymptotic checks.
pub const EXACT_CANCELLATION: f64 = 1e-12;

/// Direction of a flow segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

/// Iterated bracket over field indices (0-based; written `V1, V2, …` in text).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BracketExpression {
    Leaf(usize),
    Pair(Box<BracketExpression>, Box<BracketExpression>),
}

impl BracketExpression {
    pub fn leaf(index: usize) -> Self {
        BracketExpression::Leaf(index)
    }

    pub fn pair(left: BracketExpression, right: BracketExpression) -> Self {
        BracketExpression::Pair(Box::new(left), Box::new(right))
    }

    /// Number of leaves.
    pub fn degree(&self) -> usize {
        match self {
            BracketExpression::Leaf(_) => 1,
            BracketExpression::Pair(l, r) => l.degree() + r.degree(),
        }
    }

    pub fn max_index(&self) -> usize {
        match self {
            BracketExpression::Leaf(i) => *i,
            BracketExpression::Pair(l, r) => l.max_index().max(r.max_index()),
        }
    }

    fn check_indices(&self, len: usize) -> Result<()> {
        let index = self.max_index();
        if index >= len {
            return Err(Error::Index { index, len });
        }
        Ok(())
    }

    /// Swaps the children of the top-level pair (negates the value).
    pub fn swapped(&self) -> Option<BracketExpression> {
        match self {
            BracketExpression::Leaf(_) => None,
            BracketExpression::Pair(l, r) => Some(BracketExpression::Pair(r.clone(), l.clone())),
        }
    }

    /// Every canonical expression over `num_fields` generators with degree `1..=max_degree`.
    ///
    /// A pair is kept only when its left child sorts strictly before its right
    /// child (degree first, then structure), so `[A, B]` and `[B, A]` are not
    /// both listed and `[A, A]` never is. Output is sorted by degree, then structure.
    pub fn enumerate(num_fields: usize, max_degree: usize) -> Vec<BracketExpression> {
        let mut by_degree: Vec<Vec<BracketExpression>> = vec![Vec::new(); max_degree + 1];
        if max_degree >= 1 {
            by_degree[1] = (0..num_fields).map(BracketExpression::Leaf).collect();
        }
        for d in 2..=max_degree {
            let mut level = Vec::new();
            for dl in 1..d {
                let dr = d - dl;
                if dl > dr {
                    break;
                }
                for l in &by_degree[dl] {
                    for r in &by_degree[dr] {
                        if l < r {
                            level.push(BracketExpression::pair(l.clone(), r.clone()));
                        }
                    }
                }
            }
            level.sort();
            by_degree[d] = level;
        }
        by_degree.into_iter().flatten().collect()
    }
}

impl Ord for BracketExpression {
    fn cmp(&self, other: &Self) -> Ordering {
        use BracketExpression::*;
        self.degree().cmp(&other.degree()).then_with(|| match (self, other) {
            (Leaf(a), Leaf(b)) => a.cmp(b),
            (Leaf(_), Pair(..)) => Ordering::Less,
            (Pair(..), Leaf(_)) => Ordering::Greater,
            (Pair(al, ar), Pair(bl, br)) => al.cmp(bl).then_with(|| ar.cmp(br)),
        })
    }
}

impl PartialOrd for BracketExpression {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BracketExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketExpression::Leaf(i) => write!(f, "V{}", i + 1),
            BracketExpression::Pair(l, r) => write!(f, "[{l},{r}]"),
        }
    }
}

impl FromStr for BracketExpression {
    type Err = Error;

    /// Grammar: `expr := 'V' digits | '[' expr ',' expr ']'`, whitespace ignored, indices 1-based.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let expr = parse_expr(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(Error::Parse(format!("trailing input at position {pos} in {s:?}")));
        }
        Ok(expr)
    }
}

fn parse_expr(c: &[char], pos: &mut usize) -> Result<BracketExpression> {
    match c.get(*pos) {
        Some('V') | Some('v') => {
            *pos += 1;
            let start = *pos;
            while c.get(*pos).is_some_and(|ch| ch.is_ascii_digit()) {
                *pos += 1;
            }
            let digits: String = c[start..*pos].iter().collect();
            let n: usize = digits.parse().map_err(|_| Error::Parse(format!("expected field number at position {start}")))?;
            if n == 0 {
                return Err(Error::Parse(String::from("field numbers start at V1")));
            }
            Ok(BracketExpression::Leaf(n - 1))
        }
        Some('[') => {
            *pos += 1;
            let l = parse_expr(c, pos)?;
            expect(c, pos, ',')?;
            let r = parse_expr(c, pos)?;
            expect(c, pos, ']')?;
            Ok(BracketExpression::pair(l, r))
        }
        Some(ch) => Err(Error::Parse(format!("unexpected {ch:?} at position {pos}"))),
        None => Err(Error::Parse(String::from("unexpected end of bracket expression"))),
    }
}

fn expect(c: &[char], pos: &mut usize, want: char) -> Result<()> {
    if c.get(*pos) == Some(&want) {
        *pos += 1;
        Ok(())
    } else {
        Err(Error::Parse(format!("expected {want:?} at position {pos}")))
    }
}

/// One segment of a flow-composition program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramStep {
    pub field_index: usize,
    pub sign: Sign,
    /// The segment runs for duration `t^time_exponent`.
    pub time_exponent: u32,
}

/// Flat list of signed flow segments realizing a bracket of flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowBracketProgram {
    pub steps: Vec<ProgramStep>,
}

impl FlowBracketProgram {
    pub fn compile(expr: &BracketExpression) -> Self {
        Self::compile_with_exponents(expr, &|_| 1)
    }

    /// Leaf `i` runs for `t^exponent(i)`, giving families `P_t = Id + t^m X + ô(t^m)`.
    pub fn compile_with_exponents(expr: &BracketExpression, exponent: &dyn Fn(usize) -> u32) -> Self {
        FlowBracketProgram { steps: compile_steps(expr, exponent) }
    }

    /// The program of the inverse composition.
    pub fn inverse(&self) -> Self {
        FlowBracketProgram { steps: invert(&self.steps) }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of signed unit durations per field index.
    pub fn net_time(&self, num_fields: usize) -> Vec<i64> {
        let mut net = vec![0i64; num_fields];
        for s in &self.steps {
            net[s.field_index] += if s.sign == Sign::Plus { 1 } else { -1 };
        }
        net
    }

    /// Runs the segments in order from `q`.
    pub fn run(&self, fields: &[VectorField], t: f64, q: &ChartPoint, solver: &FlowSolver) -> Result<ChartPoint> {
        let mut p = q.clone();
        for (idx, step) in self.steps.iter().enumerate() {
            let field = fields.get(step.field_index).ok_or(Error::Index { index: step.field_index, len: fields.len() })?;
            let dur = libm::pow(t, f64::from(step.time_exponent));
            let map = FlowMap::new(field, 0.0, dur, *solver);
            let next = match step.sign {
                Sign::Plus => map.apply(&p),
                Sign::Minus => map.inverse(&p),
            };
            p = next.map_err(|e| with_segment(e, idx))?;
        }
        Ok(p)
    }
}

pub(crate) fn with_segment(e: Error, idx: usize) -> Error {
    match e {
        Error::BlowUp { step, t, .. } => Error::BlowUp { step, t, segment: Some(idx) },
        other => other,
    }
}

fn compile_steps(expr: &BracketExpression, exponent: &dyn Fn(usize) -> u32) -> Vec<ProgramStep> {
    match expr {
        BracketExpression::Leaf(i) => vec![ProgramStep { field_index: *i, sign: Sign::Plus, time_exponent: exponent(*i) }],
        BracketExpression::Pair(l, r) => {
            let p = compile_steps(l, exponent);
            let q = compile_steps(r, exponent);
            let mut out = Vec::with_capacity(2 * (p.len() + q.len()));
            out.extend_from_slice(&p);
            out.extend_from_slice(&q);
            out.extend(invert(&p));
            out.extend(invert(&q));
            out
        }
    }
}

fn invert(steps: &[ProgramStep]) -> Vec<ProgramStep> {
    steps.iter().rev().map(|s| ProgramStep { sign: s.sign.flip(), ..*s }).collect()
}

/// `[V, W](q) = W'(q)·V(q) − V'(q)·W(q)` at time `t`.
pub fn lie_bracket(v: &VectorField, w: &VectorField, t: f64, q: &ChartPoint) -> Result<Vec<f64>> {
    if v.dim() != w.dim() {
        return Err(Error::Dimension { expected: v.dim(), found: w.dim() });
    }
    let (vq, wq) = (v.eval(t, q)?, w.eval(t, q)?);
    let a = w.jacobian(t, q)?.mul_vec(&vq);
    let b = v.jacobian(t, q)?.mul_vec(&wq);
    Ok(linalg::sub(&a, &b))
}

/// The bracket `[V, W]` as a polynomial field.
pub fn lie_bracket_field(v: &VectorField, w: &VectorField) -> Result<VectorField> {
    v.zip_with(w, PolynomialMap::lie_bracket)
}

/// The bracket expression as a polynomial map, built from the pieces active at `t`.
pub fn bracket_map(expr: &BracketExpression, fields: &[VectorField], t: f64) -> Result<PolynomialMap> {
    expr.check_indices(fields.len())?;
    build_bracket_map(expr, fields, t)
}

fn build_bracket_map(expr: &BracketExpression, fields: &[VectorField], t: f64) -> Result<PolynomialMap> {
    match expr {
        BracketExpression::Leaf(i) => Ok(fields[*i].piece_at(t)?.clone()),
        BracketExpression::Pair(l, r) => {
            PolynomialMap::lie_bracket(&build_bracket_map(l, fields, t)?, &build_bracket_map(r, fields, t)?)
        }
    }
}

/// The expression as an autonomous polynomial field (all leaves must be autonomous).
pub fn bracket_expression_field(expr: &BracketExpression, fields: &[VectorField]) -> Result<VectorField> {
    expr.check_indices(fields.len())?;
    if !fields.iter().all(VectorField::is_autonomous) {
        return Err(Error::invalid("bracket expression fields must be autonomous"));
    }
    VectorField::autonomous(build_bracket_map(expr, fields, 0.0)?)
}

pub fn eval_bracket_expression(expr: &BracketExpression, fields: &[VectorField], t: f64, q: &ChartPoint) -> Result<Vec<f64>> {
    let map = bracket_map(expr, fields, t)?;
    q.check_dim(map.dim_in())?;
    Ok(map.eval(q.coords()))
}

/// Residual of `Ad P̂_{0,t} Ŵ = Ŵ + ∫_0^t Ad P̂_{0,τ} ∘ ad V̂ ∘ Ŵ dτ` at `q`.
///
/// `Ad P̂_{0,τ} Ŵ` is the field `(P_{τ,0})_* W`, evaluated through [`PushforwardField`];
/// `ad V̂ ∘ Ŵ` is the bracket field `[V, W]`.
pub fn adjoint_check(v: &VectorField, w: &VectorField, q: &ChartPoint, t: f64, solver: &FlowSolver, nodes: usize) -> Result<f64> {
    if !(v.is_autonomous() && w.is_autonomous()) {
        return Err(Error::invalid("adjoint check expects autonomous fields"));
    }
    let lhs = PushforwardField::new(FlowMap::new(v, t, 0.0, *solver), w, 0.0)?.eval(q)?;
    let bracket = lie_bracket_field(v, w)?;
    let gl = GaussLegendre::new(nodes)?;
    let mut integral = vec![0.0; v.dim()];
    for (tau, weight) in gl.mapped(0.0, t) {
        let val = PushforwardField::new(FlowMap::new(v, tau, 0.0, *solver), &bracket, 0.0)?.eval(q)?;
        linalg::axpy(&mut integral, weight, &val);
    }
    let rhs = linalg::add(&w.eval(0.0, q)?, &integral);
    Ok(linalg::distance(&lhs, &rhs))
}

/// Point map of the flow bracket `B(P^1_t, …, P^k_t)` applied to `q`.
pub fn flow_bracket(expr: &BracketExpression, fields: &[VectorField], t: f64, q: &ChartPoint, solver: &FlowSolver) -> Result<ChartPoint> {
    expr.check_indices(fields.len())?;
    FlowBracketProgram::compile(expr).run(fields, t, q, solver)
}

/// Outcome of a log-log decay test with an exact-cancellation escape.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCheck {
    pub t_grid: Vec<f64>,
    pub norms: Vec<f64>,
    /// Absent when every sample sits at numerical zero.
    pub estimate: Option<OrderEstimate>,
    pub required_slope: f64,
    pub exact_cancellation: bool,
    pub passed: bool,
}

impl AsymptoticCheck {
    pub fn from_samples(t_grid: Vec<f64>, norms: Vec<f64>, required_slope: f64) -> Result<Self> {
        let exact_cancellation = norms.iter().all(|&n| n <= EXACT_CANCELLATION);
        let estimate = match fit_order(t_grid.clone(), norms.clone()) {
            Ok(e) => Some(e),
            Err(Error::DegenerateProbe) => None,
            Err(e) => return Err(e),
        };
        let slope_ok = estimate.as_ref().is_some_and(|e| e.fitted_slope >= required_slope);
        Ok(AsymptoticCheck { t_grid, norms, estimate, required_slope, exact_cancellation, passed: exact_cancellation || slope_ok })
    }

    pub fn slope(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.fitted_slope)
    }
}

/// Probes `‖B(P_t)(q) − q − t^k B(X)(q)‖ = o(t^k)`; passes on slope ≥ `k + 0.5`
/// or when every residual is at most [`EXACT_CANCELLATION`].
pub fn bracket_asymptotics_check(
    expr: &BracketExpression,
    fields: &[VectorField],
    q: &ChartPoint,
    t_max: f64,
    levels: usize,
    solver: &FlowSolver,
) -> Result<AsymptoticCheck> {
    let k = expr.degree();
    let leading = eval_bracket_expression(expr, fields, 0.0, q)?;
    let program = FlowBracketProgram::compile(expr);
    let (grid, norms) = sample_grid(
        |t| {
            let end = program.run(fields, t, q, solver)?;
            let tk = libm::pow(t, k as f64);
            let resid: Vec<f64> =
                end.coords().iter().zip(q.coords()).zip(&leading).map(|((e, q0), b)| e - q0 - tk * b).collect();
            Ok(linalg::norm(&resid))
        },
        t_max,
        levels,
    )?;
    AsymptoticCheck::from_samples(grid, norms, k as f64 + 0.5)
}

/// Probes `‖P_t^{-1}(q) − q + t V(q)‖ = o(t)`; passes on slope ≥ 1.8 or exact cancellation.
pub fn inverse_expansion_check(v: &VectorField, q: &ChartPoint, t_max: f64, levels: usize, solver: &FlowSolver) -> Result<AsymptoticCheck> {
    let vq = v.eval(0.0, q)?;
    let (grid, norms) = sample_grid(
        |t| {
            let back = FlowMap::new(v, 0.0, t, *solver).inverse(q)?;
            let resid: Vec<f64> = back.coords().iter().zip(q.coords()).zip(&vq).map(|((b, q0), vi)| b - q0 + t * vi).collect();
            Ok(linalg::norm(&resid))
        },
        t_max,
        levels,
    )?;
    AsymptoticCheck::from_samples(grid, norms, 1.8)
}

/// Probes the first-order flow expansion `‖P_{0,t}(q) − q − t V(q)‖ = o(t)` (slope ≥ 1.8).
pub fn first_order_expansion_check(v: &VectorField, q: &ChartPoint, t_max: f64, levels: usize, solver: &FlowSolver) -> Result<AsymptoticCheck> {
    let vq = v.eval(0.0, q)?;
    let (grid, norms) = sample_grid(
        |t| {
            let fwd = FlowMap::new(v, 0.0, t, *solver).apply(q)?;
            let resid: Vec<f64> = fwd.coords().iter().zip(q.coords()).zip(&vq).map(|((f, q0), vi)| f - q0 - t * vi).collect();
            Ok(linalg::norm(&resid))
        },
        t_max,
        levels,
    )?;
    AsymptoticCheck::from_samples(grid, norms, 1.8)
}

/// Central-difference Lie bracket of two numerical fields at `q`.
pub fn fd_lie_bracket<A, B>(a: &A, b: &B, t: f64, q: &[f64]) -> Result<Vec<f64>>
where
    A: NumericalField + ?Sized,
    B: NumericalField + ?Sized,
{
    let (aq, bq) = (a.eval_at(t, q)?, b.eval_at(t, q)?);
    let db: Matrix = fd_jacobian(b, t, q)?;
    let da: Matrix = fd_jacobian(a, t, q)?;
    Ok(linalg::sub(&db.mul_vec(&aq), &da.mul_vec(&bq)))
}

/// `‖F_*[V, W](q) − [F_*V, F_*W](q)‖`: the left side pushes the exact bracket
/// field forward, the right side brackets the two pushed-forward fields by
/// central differences. `V` and `W` are evaluated at `F.t0`.
pub fn pushforward_invariance_check(f: &FlowMap<'_>, v: &VectorField, w: &VectorField, q: &ChartPoint) -> Result<f64> {
    let bracket = lie_bracket_field(v, w)?;
    let lhs = PushforwardField::new(*f, &bracket, f.t0)?.eval(q)?;
    let fv = PushforwardField::new(*f, v, f.t0)?;
    let fw = PushforwardField::new(*f, w, f.t0)?;
    let rhs = fd_lie_bracket(&fv, &fw, f.t0, q.coords())?;
    Ok(linalg::distance(&lhs, &rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapAtom {
    P,
    PInv,
    Q,
    QInv,
}

/// Linear combination of composed flow operators; a word `[A1, …, Aj]` is
/// `Â1 ∘ … ∘ Âj`, which as a point map runs `A1` first.
#[derive(Debug, Clone)]
struct OperatorSum {
    terms: Vec<(f64, Vec<MapAtom>)>,
}

impl OperatorSum {
    fn identity() -> Self {
        OperatorSum { terms: vec![(1.0, Vec::new())] }
    }

    fn atom(a: MapAtom) -> Self {
        OperatorSum { terms: vec![(1.0, vec![a])] }
    }

    fn lin(&self, a: f64, other: &OperatorSum, b: f64) -> Self {
        let mut terms: Vec<_> = self.terms.iter().map(|(c, w)| (a * c, w.clone())).collect();
        terms.extend(other.terms.iter().map(|(c, w)| (b * c, w.clone())));
        OperatorSum { terms }
    }

    fn compose(&self, other: &OperatorSum) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ca, wa) in &self.terms {
            for (cb, wb) in &other.terms {
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                terms.push((ca * cb, w));
            }
        }
        OperatorSum { terms }
    }
}

/// Exact operator decomposition of a single flow bracket.
///
/// With `P̂^{-1} = Id − V̂1`, `P̂ = Id + V̂2`, `Q̂^{-1} = Id − Ŵ1`, `Q̂ = Id + Ŵ2`:
/// `[P, Q]^ = Id + (V̂1∘Ŵ1 − Ŵ2∘V̂1) + R̂` with
/// `R̂ = Ŵ2V̂1Ŵ1 − V̂2Ŵ2V̂1 + V̂2V̂1Ŵ1 + V̂2Ŵ2V̂1Ŵ1`. All three pieces are applied
/// to `obs` at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBracketDecomposition {
    /// `([P, Q]^ − Id)φ(q)`.
    pub bracket: Vec<f64>,
    /// `(V̂1∘Ŵ1 − Ŵ2∘V̂1)φ(q)`, which is `t^{m+n}[X̂, Ŷ]φ(q) + ô(t^{m+n})`.
    pub leading: Vec<f64>,
    /// `R̂φ(q)`.
    pub remainder: Vec<f64>,
}

/// Decomposes `[P_t, Q_t]` for the flows `P` of `x` run for `t^m` and `Q` of `y` run for `t^n`.
#[allow(clippy::too_many_arguments)]
pub fn one_bracket_decomposition(
    x: &VectorField,
    y: &VectorField,
    m: u32,
    n: u32,
    t: f64,
    obs: &Observable,
    q: &ChartPoint,
    solver: &FlowSolver,
) -> Result<OneBracketDecomposition> {
    use MapAtom::*;
    let id = OperatorSum::identity();
    let v1 = id.lin(1.0, &OperatorSum::atom(PInv), -1.0);
    let v2 = OperatorSum::atom(P).lin(1.0, &id, -1.0);
    let w1 = id.lin(1.0, &OperatorSum::atom(QInv), -1.0);
    let w2 = OperatorSum::atom(Q).lin(1.0, &id, -1.0);

    let bracket = OperatorSum { terms: vec![(1.0, vec![P, Q, PInv, QInv]), (-1.0, Vec::new())] };
    let leading = v1.compose(&w1).lin(1.0, &w2.compose(&v1), -1.0);
    let remainder = OperatorSum {
        terms: [
            (1.0, w2.compose(&v1).compose(&w1)),
            (-1.0, v2.compose(&w2).compose(&v1)),
            (1.0, v2.compose(&v1).compose(&w1)),
            (1.0, v2.compose(&w2).compose(&v1).compose(&w1)),
        ]
        .into_iter()
        .flat_map(|(s, op)| op.terms.into_iter().map(move |(c, w)| (s * c, w)))
        .collect(),
    };

    let p_map = FlowMap::new(x, 0.0, libm::pow(t, f64::from(m)), *solver);
    let q_map = FlowMap::new(y, 0.0, libm::pow(t, f64::from(n)), *solver);
    let apply = |op: &OperatorSum| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; obs.dim_out()];
        for (c, word) in &op.terms {
            let mut p = q.clone();
            for atom in word {
                p = match atom {
                    P => p_map.apply(&p)?,
                    PInv => p_map.inverse(&p)?,
                    Q => q_map.apply(&p)?,
                    QInv => q_map.inverse(&p)?,
                };
            }
            linalg::axpy(&mut acc, *c, &obs.eval(&p)?);
        }
        Ok(acc)
    };
    Ok(OneBracketDecomposition { bracket: apply(&bracket)?, leading: apply(&leading)?, remainder: apply(&remainder)? })
}
