//! Affine control systems `q' = Σ u_i V_i(q)` with admissible controls: piecewise
//! constant, one active field at a time, values ±1.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::ChartPoint;
use crate::fields::VectorField;
use crate::flow::{FlowMap, FlowSolver};
use crate::liealg::{bracket_map, with_segment, BracketExpression, FlowBracketProgram};
use crate::linalg::{self, Matrix};

pub use crate::liealg::Sign;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_STEP_FRACTION: f64 = 0.5;
/// Consecutive rejected steps (each halving the step fraction) before giving up.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineControlSystem {
    fields: Vec<VectorField>,
}

impl AffineControlSystem {
    pub fn new(fields: Vec<VectorField>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::invalid("control system needs at least one field"))?;
        let dim = first.dim();
        for f in &fields {
            if f.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: f.dim() });
            }
            if !f.is_autonomous() {
                return Err(Error::invalid("control fields must be autonomous"));
            }
        }
        Ok(AffineControlSystem { fields })
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Run field `field_index` (0-based) with control `sign` for `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub field_index: usize,
    pub sign: Sign,
    pub duration: f64,
}

impl Segment {
    pub fn new(field_index: usize, sign: Sign, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid("segment durations must be positive and finite"));
        }
        Ok(Segment { field_index, sign, duration })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSchedule {
    segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn empty() -> Self {
        ControlSchedule::default()
    }

    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            Segment::new(s.field_index, s.sign, s.duration)?;
        }
        Ok(ControlSchedule { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn concat(&self, other: &ControlSchedule) -> ControlSchedule {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        ControlSchedule { segments }
    }

    pub fn extend(&mut self, other: &ControlSchedule) {
        self.segments.extend_from_slice(&other.segments);
    }

    /// Checks every field index against a system with `num_fields` fields.
    pub fn validate_for(&self, num_fields: usize) -> Result<()> {
        match self.segments.iter().find(|s| s.field_index >= num_fields) {
            Some(s) => Err(Error::Index { index: s.field_index, len: num_fields }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub brackets: Vec<(BracketExpression, Vec<f64>)>,
    pub numerical_rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub schedule: ControlSchedule,
    pub endpoint: ChartPoint,
    pub residual: f64,
    pub iterations: usize,
}

pub fn simulate_schedule(sys: &AffineControlSystem, q0: &ChartPoint, sched: &ControlSchedule, solver: &FlowSolver) -> Result<ChartPoint> {
    q0.check_dim(sys.dim())?;
    sched.validate_for(sys.len())?;
    let mut p = q0.clone();
    for (idx, seg) in sched.segments.iter().enumerate() {
        let map = FlowMap::new(&sys.fields[seg.field_index], 0.0, seg.duration, *solver);
        let next = match seg.sign {
            Sign::Plus => map.apply(&p),
            Sign::Minus => map.inverse(&p),
        };
        p = next.map_err(|e| with_segment(e, idx))?;
    }
    Ok(p)
}

fn rank_of(singular_values: &[f64], rel_tol: f64) -> usize {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Evaluates every canonical bracket up to `max_degree` at `q` and reports the rank of their span.
pub fn bracket_rank(sys: &AffineControlSystem, q: &ChartPoint, max_degree: usize, rel_tol: f64) -> Result<RankReport> {
    if max_degree == 0 {
        return Err(Error::invalid("max_degree must be at least 1"));
    }
    q.check_dim(sys.dim())?;
    let brackets = BracketExpression::enumerate(sys.len(), max_degree)
        .into_iter()
        .map(|e| {
            let v = bracket_map(&e, &sys.fields, 0.0)?.eval(q.coords());
            Ok((e, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = brackets.iter().map(|(_, v)| v.clone()).collect();
    let singular_values = Matrix::from_rows(&rows).singular_values();
    let numerical_rank = rank_of(&singular_values, rel_tol);
    Ok(RankReport { brackets, numerical_rank, singular_values })
}

/// Schedule whose net displacement is `≈ sign · magnitude · B(q)` for the degree-`k`
/// bracket `B`: the flow-bracket program with every segment lasting `magnitude^{1/k}`.
pub fn bracket_motion(sys: &AffineControlSystem, expr: &BracketExpression, magnitude: f64, sign: Sign) -> Result<ControlSchedule> {
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(Error::invalid("bracket motion magnitude must be positive"));
    }
    if expr.max_index() >= sys.len() {
        return Err(Error::Index { index: expr.max_index(), len: sys.len() });
    }
    let k = expr.degree() as f64;
    let t = libm::pow(magnitude, 1.0 / k);
    let program = FlowBracketProgram::compile(expr);
    let program = match sign {
        Sign::Plus => program,
        Sign::Minus => program.inverse(),
    };
    let segments = program
        .steps
        .iter()
        .map(|s| Segment::new(s.field_index, s.sign, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSchedule { segments })
}

/// Greedy ε-reachability: repeatedly expand the residual in the bracket basis at
/// the current point, execute one bracket motion, and keep it only if the
/// residual shrinks.
///
/// The executed direction is the largest coefficient among those whose motion is
/// a descent direction for the residual (`c_j ⟨r, b_j⟩ > 0`); at least one such
/// direction exists whenever the least-squares expansion reproduces `r`. A
/// rejected step halves the step fraction; an accepted one restores it.
#[allow(clippy::too_many_arguments)]
pub fn plan_reach(
    sys: &AffineControlSystem,
    q0: &ChartPoint,
    target: &ChartPoint,
    epsilon: f64,
    max_degree: usize,
    max_iters: usize,
    solver: &FlowSolver,
) -> Result<PlanResult> {
    q0.check_dim(sys.dim())?;
    target.check_dim(sys.dim())?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon must be nonnegative"));
    }
    let report = bracket_rank(sys, q0, max_degree, DEFAULT_RANK_TOL)?;
    if report.numerical_rank < sys.dim() {
        return Err(Error::PlannerPrecondition { rank: report.numerical_rank, dim: sys.dim() });
    }
    let basis: Vec<BracketExpression> = report.brackets.into_iter().map(|(e, _)| e).collect();

    let mut schedule = ControlSchedule::empty();
    let mut current = q0.clone();
    let mut residual = current.distance(target);
    let mut fraction = DEFAULT_STEP_FRACTION;
    let mut halvings = 0;
    let mut iterations = 0;

    while residual > epsilon && iterations < max_iters {
        iterations += 1;
        let r = linalg::sub(target.coords(), current.coords());
        let rows = basis
            .iter()
            .map(|e| Ok(bracket_map(e, &sys.fields, 0.0)?.eval(current.coords())))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = Matrix::from_rows(&rows).transpose().svd().solve(&r, DEFAULT_RANK_TOL);
        let choice = coeffs
            .iter()
            .enumerate()
            .filter(|(j, c)| **c * linalg::dot(&r, &rows[*j]) > 0.0)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        let Some((j, &c)) = choice else {
            return Err(stalled(sys, q0, target, schedule, iterations, solver));
        };
        let motion = bracket_motion(sys, &basis[j], fraction * c.abs(), Sign::of(c))?;
        let candidate = simulate_schedule(sys, &current, &motion, solver)?;
        let candidate_residual = candidate.distance(target);
        if candidate_residual < residual {
            schedule.extend(&motion);
            current = candidate;
            residual = candidate_residual;
            fraction = DEFAULT_STEP_FRACTION;
            halvings = 0;
        } else {
            fraction *= 0.5;
            halvings += 1;
            if halvings >= MAX_HALVINGS {
                return Err(stalled(sys, q0, target, schedule, iterations, solver));
            }
        }
    }
    finish(sys, q0, target, schedule, iterations, solver)
}

fn finish(
    sys: &AffineControlSystem,
    q0: &ChartPoint,
    target: &ChartPoint,
    schedule: ControlSchedule,
    iterations: usize,
    solver: &FlowSolver,
) -> Result<PlanResult> {
    let endpoint = simulate_schedule(sys, q0, &schedule, solver)?;
    let residual = endpoint.distance(target);
    Ok(PlanResult { schedule, endpoint, residual, iterations })
}

fn stalled(
    sys: &AffineControlSystem,
    q0: &ChartPoint,
    target: &ChartPoint,
    schedule: ControlSchedule,
    iterations: usize,
    solver: &FlowSolver,
) -> Error {
    match finish(sys, q0, target, schedule, iterations, solver) {
        Ok(best) => Error::Stalled(Box::new(best)),
        Err(e) => e,
    }
}
