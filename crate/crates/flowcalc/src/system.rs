//! JSON documents for polynomial fields and observables, and the builtin catalog.
//!
//! A field document:
//!
//! ```json
//! {"dim": 2, "components": [[{"coef": -1.0, "exps": [0, 1]}], [{"coef": 1.0, "exps": [1, 0]}]]}
//! ```
//!
//! A time-dependent field replaces `components` with
//! `"time_pieces": [{"start": 0.0, "end": 1.0, "components": [...]}, ...]`.
//! A system is `{"fields": [<field>, ...]}`; a bare field document is read as a
//! one-field system. Observables use `{"dim": n, "components": [...], "max_derivative_order": m}`.

use std::path::Path;

use flowcalc_core::{Matrix, Observable, Polynomial, PolynomialMap, TimePiece, TimeStructure, VectorField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Derivative budget given to observables that do not state one.
pub const DEFAULT_OBSERVABLE_ORDER: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub coef: f64,
    pub exps: Vec<u32>,
}

pub type ComponentsDoc = Vec<Vec<TermDoc>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePieceDoc {
    pub start: f64,
    pub end: f64,
    pub components: ComponentsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDoc {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ComponentsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_pieces: Option<Vec<TimePieceDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness_order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub fields: Vec<FieldDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDoc {
    pub dim: usize,
    pub components: ComponentsDoc,
    #[serde(default)]
    pub max_derivative_order: Option<u32>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyDoc {
    System(SystemDoc),
    Field(FieldDoc),
}

fn map_from_doc(dim: usize, comps: &ComponentsDoc) -> CliResult<PolynomialMap> {
    let components = comps
        .iter()
        .map(|terms| Polynomial::from_terms(dim, terms.iter().map(|t| (t.coef, t.exps.clone()))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolynomialMap::new(dim, components)?)
}

fn map_to_doc(map: &PolynomialMap) -> ComponentsDoc {
    map.components()
        .iter()
        .map(|p| p.terms().map(|(coef, exps)| TermDoc { coef, exps: exps.to_vec() }).collect())
        .collect()
}

impl FieldDoc {
    pub fn to_field(&self) -> CliResult<VectorField> {
        let field = match (&self.components, &self.time_pieces) {
            (Some(c), None) => VectorField::autonomous(map_from_doc(self.dim, c)?)?,
            (None, Some(pieces)) => VectorField::piecewise(
                pieces
                    .iter()
                    .map(|p| Ok(TimePiece { start: p.start, end: p.end, map: map_from_doc(self.dim, &p.components)? }))
                    .collect::<CliResult<Vec<_>>>()?,
            )?,
            _ => return Err(CliError::usage("a field needs exactly one of \"components\" or \"time_pieces\"")),
        };
        if field.dim() != self.dim || self.components.as_ref().is_some_and(|c| c.len() != self.dim) {
            return Err(CliError::usage(format!("field declares dim {} but has a different number of components", self.dim)));
        }
        Ok(match self.smoothness_order {
            Some(m) => field.with_smoothness(m),
            None => field,
        })
    }

    pub fn from_field(field: &VectorField) -> Self {
        let (components, time_pieces) = match field.time_structure() {
            TimeStructure::Autonomous(m) => (Some(map_to_doc(m)), None),
            TimeStructure::PiecewiseInTime(pieces) => (
                None,
                Some(pieces.iter().map(|p| TimePieceDoc { start: p.start, end: p.end, components: map_to_doc(&p.map) }).collect()),
            ),
        };
        FieldDoc { dim: field.dim(), components, time_pieces, smoothness_order: Some(field.smoothness_order()) }
    }
}

impl SystemDoc {
    pub fn to_fields(&self) -> CliResult<Vec<VectorField>> {
        if self.fields.is_empty() {
            return Err(CliError::usage("system has no fields"));
        }
        self.fields.iter().map(FieldDoc::to_field).collect()
    }

    pub fn from_fields(fields: &[VectorField]) -> Self {
        SystemDoc { fields: fields.iter().map(FieldDoc::from_field).collect() }
    }
}

impl ObservableDoc {
    pub fn to_observable(&self) -> CliResult<Observable> {
        Ok(Observable::new(
            map_from_doc(self.dim, &self.components)?,
            self.max_derivative_order.unwrap_or(DEFAULT_OBSERVABLE_ORDER),
        ))
    }
}

/// Names accepted by [`builtin_system`], for help text.
pub const BUILTIN_NAMES: &str = "rotation2d, heisenberg, brockett, unicycle, nilpotent2d, translations3d, \
zero:<n>, constant:<c1,c2,...>, linear:<a11,a12;a21,a22;...>";

/// Parses `1.5,-2,0` into a vector.
pub fn parse_vector(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::usage(format!("not a number: {x:?} in {s:?}"))))
        .collect()
}

pub fn builtin_system(name: &str) -> CliResult<Option<Vec<VectorField>>> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let fields = match (head, arg) {
        ("rotation2d", None) => vec![VectorField::rotation2d()],
        ("heisenberg", None) => VectorField::heisenberg().to_vec(),
        ("brockett", None) => VectorField::brockett().to_vec(),
        ("unicycle", None) => VectorField::unicycle().to_vec(),
        ("nilpotent2d", None) => vec![VectorField::linear(&Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]))?],
        ("translations3d", None) => vec![VectorField::constant(&[1.0, 0.0, 0.0]), VectorField::constant(&[0.0, 1.0, 0.0])],
        ("zero", Some(n)) => {
            let n: usize = n.trim().parse().map_err(|_| CliError::usage(format!("bad dimension in {name:?}")))?;
            if n == 0 {
                return Err(CliError::usage("zero field needs a positive dimension"));
            }
            vec![VectorField::zero(n)]
        }
        ("constant", Some(c)) => vec![VectorField::constant(&parse_vector(c)?)],
        ("linear", Some(rows)) => {
            let rows = rows.split(';').map(parse_vector).collect::<CliResult<Vec<_>>>()?;
            if rows.iter().any(|r| r.len() != rows.len()) {
                return Err(CliError::usage(format!("linear field needs a square matrix, got {name:?}")));
            }
            vec![VectorField::linear(&Matrix::from_rows(&rows))?]
        }
        _ => return Ok(None),
    };
    Ok(Some(fields))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// A builtin name, or the path of a system or field JSON document.
pub fn load_system(source: &str) -> CliResult<Vec<VectorField>> {
    if let Some(fields) = builtin_system(source)? {
        return Ok(fields);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(CliError::usage(format!("unknown system {source:?}: not a builtin ({BUILTIN_NAMES}) and no such file")));
    }
    let fields = match serde_json::from_str::<AnyDoc>(&read_file(path)?)? {
        AnyDoc::System(s) => s.to_fields()?,
        AnyDoc::Field(f) => vec![f.to_field()?],
    };
    let dim = fields[0].dim();
    if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
        return Err(flowcalc_core::Error::Dimension { expected: dim, found: bad.dim() }.into());
    }
    Ok(fields)
}

/// `identity`, `x<i>` (1-based coordinate), or the path of an observable JSON document.
pub fn load_observable(source: &str, dim: usize) -> CliResult<Observable> {
    if source == "identity" {
        return Ok(Observable::identity(dim, DEFAULT_OBSERVABLE_ORDER));
    }
    if let Some(i) = source.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
        if i == 0 || i > dim {
            return Err(flowcalc_core::Error::Index { index: i.saturating_sub(1), len: dim }.into());
        }
        return Ok(Observable::coordinate(dim, i - 1, DEFAULT_OBSERVABLE_ORDER));
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(CliError::usage(format!("unknown observable {source:?}: use identity, x<i> or a JSON file")));
    }
    let obs = serde_json::from_str::<ObservableDoc>(&read_file(path)?)?.to_observable()?;
    if obs.dim_in() != dim {
        return Err(flowcalc_core::Error::Dimension { expected: dim, found: obs.dim_in() }.into());
    }
    Ok(obs)
}
