//! Iterated Lie brackets of the drift and control fields.
//!
//! Every field involved depends on `g` only through the body momentum
//! `c = gᵀ m_s g`, so it is stored left-trivialized as `X(g) = g φ(c)`.
//! Along `X`, `ċ = cφ - φc`, which gives the bracket in the same chart:
//!
//! ```text
//! [X, Y] ↦ [φ, ψ] + Dψ(c)[cφ - φc] - Dφ(c)[cψ - ψc]
//! ```
//!
//! Derivatives are central differences in `c`; brackets of left-invariant
//! fields have no `c` dependence and come out exact.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ControlError, ControlSystem};
use crate::inertia::InertiaOperator;
use crate::liecore::{check_dim, commutator, raw_coadjoint, upper_coords, AlgebraElement, GroupElement};
use crate::reduction::{OperatorField, ReductionError};

/// A bracket word over numbered letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Word {
    Letter(usize),
    Bracket(Box<Word>, Box<Word>),
}

impl Word {
    pub fn bracket(a: Word, b: Word) -> Word {
        Word::Bracket(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            Word::Letter(_) => 1,
            Word::Bracket(a, b) => a.depth() + b.depth(),
        }
    }

    /// All right-normed words `[a₁,[a₂,[…,a_d]]]` with `d ≤ depth`, shortest first.
    pub fn right_normed(letters: usize, depth: usize) -> Vec<Word> {
        let mut out: Vec<Word> = (0..letters).map(Word::Letter).collect();
        let mut level = out.clone();
        for _ in 1..depth {
            level = (0..letters)
                .flat_map(|i| level.iter().map(move |w| Word::bracket(Word::Letter(i), w.clone())))
                .collect();
            out.extend(level.iter().cloned());
        }
        out
    }

    pub fn label(&self, names: &[&str]) -> String {
        match self {
            Word::Letter(i) => names.get(*i).map_or_else(|| format!("x{i}"), |s| s.to_string()),
            Word::Bracket(a, b) => format!("[{},{}]", a.label(names), b.label(names)),
        }
    }

    /// Parses `f`, `[f,g]`, `[f,[f,g]]`, … with single-token letter names.
    pub fn parse(text: &str, names: &[&str]) -> Option<Word> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let (w, rest) = parse_inner(&s, names)?;
        rest.is_empty().then_some(w)
    }

    fn letters_used(&self, out: &mut Vec<usize>) {
        match self {
            Word::Letter(i) => out.push(*i),
            Word::Bracket(a, b) => {
                a.letters_used(out);
                b.letters_used(out);
            }
        }
    }

    pub(crate) fn uses(&self, letter: usize) -> bool {
        let mut v = Vec::new();
        self.letters_used(&mut v);
        v.contains(&letter)
    }
}

fn parse_inner<'a>(s: &'a str, names: &[&str]) -> Option<(Word, &'a str)> {
    if let Some(rest) = s.strip_prefix('[') {
        let (a, rest) = parse_inner(rest, names)?;
        let rest = rest.strip_prefix(',')?;
        let (b, rest) = parse_inner(rest, names)?;
        let rest = rest.strip_prefix(']')?;
        return Some((Word::bracket(a, b), rest));
    }
    let end = s.find([',', ']', '[']).unwrap_or(s.len());
    let idx = names.iter().position(|n| *n == &s[..end])?;
    Some((Word::Letter(idx), &s[end..]))
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(&[]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// The evaluation point (row-major group element, or plane coordinates).
    pub point: Vec<f64>,
    pub labels: Vec<String>,
    /// One row per word, in chart coordinates.
    pub directions: Vec<Vec<f64>>,
    pub rank: usize,
    pub depth: usize,
    pub singular_values: Vec<f64>,
}

pub(crate) fn numerical_rank(rows: &[Vec<f64>], tol: f64) -> (usize, Vec<f64>) {
    if rows.is_empty() || rows[0].is_empty() {
        return (0, Vec::new());
    }
    let m = DMatrix::from_row_iterator(rows.len(), rows[0].len(), rows.iter().flatten().copied());
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv[0];
    let rank = if max == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tol * max).count() };
    (rank, sv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    pub depth: usize,
    /// Relative singular-value cutoff.
    pub tol: f64,
    /// Include the drift among the generators (off for the driftless setting).
    pub include_drift: bool,
    /// Relative central-difference scale in the momentum chart.
    pub delta: f64,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self { depth: 3, tol: 1e-8, include_drift: true, delta: 1e-4 }
    }
}

struct Fields<'a> {
    operator: &'a InertiaOperator,
    lambda0: &'a DMatrix<f64>,
    controls: Vec<DMatrix<f64>>,
    include_drift: bool,
    delta: f64,
}

impl Fields<'_> {
    fn letters(&self) -> usize {
        self.controls.len() + usize::from(self.include_drift)
    }

    fn names(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.include_drift {
            v.push("v".to_string());
        }
        v.extend((1..=self.controls.len()).map(|i| format!("l{i}")));
        v
    }

    fn is_drift(&self, letter: usize) -> bool {
        self.include_drift && letter == 0
    }

    fn letter(&self, i: usize, c: &DMatrix<f64>) -> DMatrix<f64> {
        if self.is_drift(i) {
            self.operator.raw_apply_inverse(c) + self.lambda0
        } else {
            -&self.controls[i - usize::from(self.include_drift)]
        }
    }

    fn constant(&self, w: &Word) -> bool {
        !(self.include_drift && w.uses(0))
    }

    fn eval(&self, w: &Word, c: &DMatrix<f64>) -> DMatrix<f64> {
        match w {
            Word::Letter(i) => self.letter(*i, c),
            Word::Bracket(a, b) => {
                let phi = self.eval(a, c);
                let psi = self.eval(b, c);
                let mut out = commutator(&phi, &psi);
                if !self.constant(b) {
                    out += self.derivative(b, c, &commutator(c, &phi));
                }
                if !self.constant(a) {
                    out -= self.derivative(a, c, &commutator(c, &psi));
                }
                out
            }
        }
    }

    fn derivative(&self, w: &Word, c: &DMatrix<f64>, dir: &DMatrix<f64>) -> DMatrix<f64> {
        let dn = dir.norm();
        if dn == 0.0 {
            return DMatrix::zeros(c.nrows(), c.ncols());
        }
        let tau = self.delta * c.norm().max(1.0) / dn;
        (self.eval(w, &(c + dir * tau)) - self.eval(w, &(c - dir * tau))) / (2.0 * tau)
    }
}

/// Numerical rank at `g` of the right-normed brackets of the drift and the
/// control fields up to `opts.depth`.
pub fn lie_rank(csys: &ControlSystem, g: &GroupElement, opts: &RankOptions) -> Result<RankReport, ControlError> {
    check_dim(csys.n(), g.dim())?;
    if opts.depth == 0 {
        return Err(ControlError::InvalidParameters("depth must be at least 1"));
    }
    let operator = match csys.system().operator() {
        OperatorField::Constant(a) => a,
        OperatorField::StateDependent(_) => return Err(ReductionError::StateDependentOperator.into()),
    };
    let fields = Fields {
        operator,
        lambda0: csys.system().lambda().matrix(),
        controls: csys.control_dirs().iter().map(|c| c.matrix().clone()).collect(),
        include_drift: opts.include_drift,
        delta: opts.delta,
    };
    let c = raw_coadjoint(g.matrix(), csys.system().conserved_momentum().matrix());
    let names = fields.names();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let words = Word::right_normed(fields.letters(), opts.depth);
    let directions: Vec<Vec<f64>> = crate::parallel::map(words.clone(), |w| upper_coords(&fields.eval(&w, &c)));
    let (rank, singular_values) = numerical_rank(&directions, opts.tol);
    Ok(RankReport {
        point: g.matrix().transpose().as_slice().to_vec(),
        labels: words.iter().map(|w| w.label(&names)).collect(),
        directions,
        rank,
        depth: opts.depth,
        singular_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub generates: bool,
    pub dimension: usize,
    /// Bracket depth at which the dimension stopped growing.
    pub depth_used: usize,
}

/// Dimension of the Lie algebra generated by `λ₁, λ₂`, closing
/// right-normed brackets until the span stops growing or `depth` is reached.
pub fn two_generator_check(
    l1: &AlgebraElement,
    l2: &AlgebraElement,
    depth: usize,
    tol: f64,
) -> Result<GenerationReport, ControlError> {
    check_dim(l1.dim(), l2.dim())?;
    let n = l1.dim();
    let full = crate::liecore::algebra_dim(n);
    let scale = l1.norm().max(l2.norm());
    let mut span: Vec<DVector<f64>> = Vec::new();
    let add = |m: &DMatrix<f64>, span: &mut Vec<DVector<f64>>| {
        let v = DVector::from_vec(upper_coords(m));
        let norm = v.norm();
        if norm == 0.0 {
            return false;
        }
        let mut r = v.clone();
        for b in span.iter() {
            r -= b * b.dot(&r);
        }
        if r.norm() > tol * norm.max(scale) {
            span.push(r.normalize());
            true
        } else {
            false
        }
    };
    let gens = [l1.matrix().clone(), l2.matrix().clone()];
    let mut level: Vec<DMatrix<f64>> = gens.iter().filter(|g| add(g, &mut span)).cloned().collect();
    let mut depth_used = 1;
    while depth_used < depth && span.len() < full && !level.is_empty() {
        let mut next = Vec::new();
        for g in &gens {
            for w in &level {
                let b = commutator(g, w);
                if add(&b, &mut span) {
                    next.push(b);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
        depth_used += 1;
    }
    Ok(GenerationReport { generates: span.len() == full, dimension: span.len(), depth_used })
}
