//! Parametrised operator families: the waveguide built-ins and families
//! parsed from a JSON definition document with expression entries.

mod ast;
mod parser;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::ComplexMatrix;

pub use ast::{BinOp, Expr, Func};
pub use parser::{parse_expression, ParseError, Scope};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Where inside a family document an expression lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryRef {
    Entry(usize, usize),
    Parity(usize, usize),
}

impl fmt::Display for EntryRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryRef::Entry(r, c) => write!(f, "entries[{r}][{c}]"),
            EntryRef::Parity(r, c) => write!(f, "parity[{r}][{c}]"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("unknown built-in family `{0}`")]
    UnknownBuiltin(String),
    #[error("{entry}: syntax error at {line}:{column}: {message}")]
    Syntax {
        entry: EntryRef,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{entry}: unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier {
        entry: EntryRef,
        name: String,
        line: usize,
        column: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter list: {0}")]
    InvalidParameter(String),
    #[error("malformed family document: {0}")]
    Document(String),
    #[error("parameter point does not match family parameters: {0}")]
    PointMismatch(String),
    #[error("entry ({row}, {col}) is not finite at this parameter point")]
    NonFiniteEntry { row: usize, col: usize },
}

impl FamilyError {
    fn from_parse(entry: EntryRef, err: ParseError) -> Self {
        match err {
            ParseError::Syntax { line, column, message } => FamilyError::Syntax {
                entry,
                line,
                column,
                message,
            },
            ParseError::UnknownIdentifier { name, line, column } => FamilyError::UnknownIdentifier {
                entry,
                name,
                line,
                column,
            },
        }
    }
}

/// Coordinates of a point in parameter space, in the family's parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + t·(other − self)`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + t * (b - a)).collect())
    }
}

impl std::ops::Index<usize> for ParameterPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinFamily {
    /// `T(z, c)` of the three-channel waveguide, parameters `(re_z, im_z, c)`.
    #[serde(rename = "waveguide_T")]
    WaveguideT,
    /// Reduced operator `H` with equal couplings, parameters `(v1, p1, v3, p3, kappa)`.
    #[serde(rename = "waveguide_H")]
    WaveguideH,
}

impl BuiltinFamily {
    pub const ALL: [BuiltinFamily; 2] = [BuiltinFamily::WaveguideT, BuiltinFamily::WaveguideH];

    pub fn id(self) -> &'static str {
        match self {
            BuiltinFamily::WaveguideT => "waveguide_T",
            BuiltinFamily::WaveguideH => "waveguide_H",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            BuiltinFamily::WaveguideT => {
                "T(z,c) = [[z+2i, -sqrt2, 0], [-sqrt2, 0, -sqrt2], [0, -sqrt2, c z-2i]]"
            }
            BuiltinFamily::WaveguideH => {
                "H = [[v1+i p1, -kappa, 0], [-kappa, 0, -kappa], [0, -kappa, v3+i p3]]"
            }
        }
    }

    pub fn params(self) -> &'static [&'static str] {
        match self {
            BuiltinFamily::WaveguideT => &["re_z", "im_z", "c"],
            BuiltinFamily::WaveguideH => &["v1", "p1", "v3", "p3", "kappa"],
        }
    }

    fn evaluate(self, x: &[f64]) -> ComplexMatrix {
        let zero = Complex64::new(0.0, 0.0);
        let mut m = ComplexMatrix::zeros(3);
        match self {
            BuiltinFamily::WaveguideT => {
                let z = Complex64::new(x[0], x[1]);
                let c = Complex64::new(x[2], 0.0);
                let two_i = Complex64::new(0.0, 2.0);
                let k = Complex64::new(-SQRT_2, 0.0);
                m[(0, 0)] = z + two_i;
                m[(2, 2)] = c * z - two_i;
                m[(0, 1)] = k;
                m[(1, 0)] = k;
                m[(1, 2)] = k;
                m[(2, 1)] = k;
                m[(1, 1)] = zero;
            }
            BuiltinFamily::WaveguideH => {
                let k = Complex64::new(-x[4], 0.0);
                m[(0, 0)] = Complex64::new(x[0], x[1]);
                m[(2, 2)] = Complex64::new(x[2], x[3]);
                m[(0, 1)] = k;
                m[(1, 0)] = k;
                m[(1, 2)] = k;
                m[(2, 1)] = k;
            }
        }
        m
    }
}

impl std::str::FromStr for BuiltinFamily {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinFamily::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| FamilyError::UnknownBuiltin(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySource {
    Builtin(BuiltinFamily),
    Parsed { text: String, entries: Vec<Expr> },
}

/// JSON definition document for a parsed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDocument {
    pub n: usize,
    pub params: Vec<String>,
    pub entries: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Vec<Vec<String>>>,
}

/// A map from parameter points to `n x n` complex matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    n: usize,
    params: Vec<String>,
    source: FamilySource,
    parity: Option<ComplexMatrix>,
}

/// Looks up a built-in family by id.
pub fn builtin(id: &str) -> Result<OperatorFamily, FamilyError> {
    Ok(OperatorFamily::from_builtin(id.parse()?))
}

/// Parses a JSON family definition document.
pub fn parse_family(text: &str) -> Result<OperatorFamily, FamilyError> {
    let doc: FamilyDocument = serde_json::from_str(text).map_err(|e| FamilyError::Document(e.to_string()))?;
    OperatorFamily::from_document(&doc, text.to_string())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_grid(what: &str, grid: &[Vec<String>], n: usize) -> Result<(), FamilyError> {
    if grid.len() != n {
        return Err(FamilyError::DimensionMismatch(format!("{what} has {} rows, expected {n}", grid.len())));
    }
    for (r, row) in grid.iter().enumerate() {
        if row.len() != n {
            return Err(FamilyError::DimensionMismatch(format!(
                "{what} row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    Ok(())
}

impl OperatorFamily {
    pub fn from_builtin(b: BuiltinFamily) -> Self {
        Self {
            n: 3,
            params: b.params().iter().map(|s| s.to_string()).collect(),
            source: FamilySource::Builtin(b),
            parity: Some(ComplexMatrix::anti_diagonal_exchange(3)),
        }
    }

    /// Builds a family from an already-deserialised document; `text` is kept
    /// as the recorded source.
    pub fn from_document(doc: &FamilyDocument, text: String) -> Result<Self, FamilyError> {
        let n = doc.n;
        if n == 0 || n > crate::spectra::MAX_DIM {
            return Err(FamilyError::DimensionMismatch(format!("n = {n} outside 1..=8")));
        }
        for (k, p) in doc.params.iter().enumerate() {
            if !is_identifier(p) {
                return Err(FamilyError::InvalidParameter(format!("`{p}` is not an identifier")));
            }
            if p == "i" || Func::from_name(p).is_some() {
                return Err(FamilyError::InvalidParameter(format!("`{p}` is reserved")));
            }
            if doc.params[..k].contains(p) {
                return Err(FamilyError::InvalidParameter(format!("`{p}` declared twice")));
            }
        }
        check_grid("entries", &doc.entries, n)?;
        let scope = Scope::new(&doc.params);
        let mut entries = Vec::with_capacity(n * n);
        for (r, row) in doc.entries.iter().enumerate() {
            for (c, text) in row.iter().enumerate() {
                let e = parse_expression(text, &scope).map_err(|e| FamilyError::from_parse(EntryRef::Entry(r, c), e))?;
                entries.push(e);
            }
        }
        let parity = match &doc.parity {
            None => None,
            Some(grid) => {
                check_grid("parity", grid, n)?;
                let empty = Scope::new(&[]);
                let mut rows = Vec::with_capacity(n);
                for (r, row) in grid.iter().enumerate() {
                    let mut vals = Vec::with_capacity(n);
                    for (c, text) in row.iter().enumerate() {
                        let e = parse_expression(text, &empty)
                            .map_err(|e| FamilyError::from_parse(EntryRef::Parity(r, c), e))?;
                        let v = e.eval(&[]);
                        if !(v.re.is_finite() && v.im.is_finite()) {
                            return Err(FamilyError::NonFiniteEntry { row: r, col: c });
                        }
                        vals.push(v);
                    }
                    rows.push(vals);
                }
                Some(ComplexMatrix::from_rows(&rows).map_err(|e| FamilyError::DimensionMismatch(e.to_string()))?)
            }
        };
        Ok(Self {
            n,
            params: doc.params.clone(),
            source: FamilySource::Parsed { text, entries },
            parity,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    pub fn source(&self) -> &FamilySource {
        &self.source
    }

    pub fn parity(&self) -> Option<&ComplexMatrix> {
        self.parity.as_ref()
    }

    /// Short human-readable identifier.
    pub fn name(&self) -> String {
        match &self.source {
            FamilySource::Builtin(b) => b.id().to_string(),
            FamilySource::Parsed { .. } => format!("parsed({}x{})", self.n, self.n),
        }
    }

    /// Point from `(name, value)` pairs; every declared parameter exactly once.
    pub fn point(&self, coords: &[(&str, f64)]) -> Result<ParameterPoint, FamilyError> {
        if coords.len() != self.params.len() {
            return Err(FamilyError::PointMismatch(format!(
                "expected {} coordinates ({}), got {}",
                self.params.len(),
                self.params.join(", "),
                coords.len()
            )));
        }
        let mut values = vec![f64::NAN; self.params.len()];
        for (name, v) in coords {
            let k = self
                .param_index(name)
                .ok_or_else(|| FamilyError::PointMismatch(format!("undeclared parameter `{name}`")))?;
            if !values[k].is_nan() {
                return Err(FamilyError::PointMismatch(format!("`{name}` given twice")));
            }
            if !v.is_finite() {
                return Err(FamilyError::PointMismatch(format!("`{name}` is not finite")));
            }
            values[k] = *v;
        }
        Ok(ParameterPoint(values))
    }

    /// The matrix at `x`.
    pub fn evaluate(&self, x: &ParameterPoint) -> Result<ComplexMatrix, FamilyError> {
        if x.dim() != self.params.len() {
            return Err(FamilyError::PointMismatch(format!(
                "point has {} coordinates, family has {}",
                x.dim(),
                self.params.len()
            )));
        }
        let m = match &self.source {
            FamilySource::Builtin(b) => b.evaluate(x.coords()),
            FamilySource::Parsed { entries, .. } => {
                let mut m = ComplexMatrix::zeros(self.n);
                for (k, e) in entries.iter().enumerate() {
                    m[(k / self.n, k % self.n)] = e.eval(x.coords());
                }
                m
            }
        };
        if let Some(k) = m.entries().iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(FamilyError::NonFiniteEntry {
                row: k / self.n,
                col: k % self.n,
            });
        }
        Ok(m)
    }

    /// Re-serialises a parsed family's entries through the expression printer.
    pub fn to_document(&self) -> Option<FamilyDocument> {
        let FamilySource::Parsed { entries, .. } = &self.source else {
            return None;
        };
        let grid = |v: &[Expr]| -> Vec<Vec<String>> {
            v.chunks(self.n).map(|row| row.iter().map(|e| e.to_string()).collect()).collect()
        };
        Some(FamilyDocument {
            n: self.n,
            params: self.params.clone(),
            entries: grid(entries),
            parity: self.parity.as_ref().map(|p| {
                (0..self.n)
                    .map(|r| p.row(r).iter().map(|z| format_complex_literal(*z)).collect())
                    .collect()
            }),
        })
    }
}

fn format_complex_literal(z: Complex64) -> String {
    match (z.re, z.im) {
        (re, im) if im == 0.0 => Expr::Const(re).to_string(),
        (re, im) if re == 0.0 => format!("{}*i", Expr::Const(im)),
        (re, im) => format!("{}+{}*i", Expr::Const(re), Expr::Const(im)),
    }
}
