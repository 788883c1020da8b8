//! Numerical chronological calculus on a single finite-dimensional chart.
//!
//! Vector fields and observables are polynomial maps, so every derivative the
//! operator formalism asks for is exact. Flows are integrated with fixed-step
//! RK4 and treated as operators `φ ↦ φ∘P` on observables. On top of that sit:
//!
//! - [`chrono`]: truncated Volterra series, remainders and log-log order probes,
//! - [`liealg`]: coordinate Lie brackets, bracket expressions and flow commutators,
//! - [`paramflow`]: derivatives of flows with respect to a perturbation parameter,
//! - [`reach`]: admissible ±1 controls, the bracket rank test and a greedy planner.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod chrono;
pub mod error;
pub mod fields;
pub mod flow;
pub mod liealg;
pub mod linalg;
pub mod paramflow;
pub mod poly;
pub mod quadrature;
pub mod reach;

pub use error::{Error, Result};
pub use fields::{ChartPoint, LocallyBoundedWitness, Observable, TimePiece, TimeStructure, VectorField};
pub use flow::{FlowMap, FlowSolver, NumericalField, PushforwardField};
pub use liealg::BracketExpression;
pub use linalg::Matrix;
pub use poly::{Polynomial, PolynomialMap};
pub use reach::{AffineControlSystem, ControlSchedule, PlanResult, RankReport, Segment, Sign};
