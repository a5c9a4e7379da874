//! Vector fields on the cylinder `(x₁ mod 2π, x₂)`: bracket ranks by nested
//! finite differences, and escape-time probes for transversality.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::rank::{numerical_rank, RankReport, Word};

type Eval = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct PlanarField {
    pub name: String,
    eval: Eval,
    /// Whether the field is real-analytic.
    pub analytic: bool,
}

impl fmt::Debug for PlanarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarField").field("name", &self.name).field("analytic", &self.analytic).finish()
    }
}

pub(crate) fn wrap(x1: f64) -> f64 {
    x1.rem_euclid(TAU)
}

impl PlanarField {
    /// The evaluator receives `x₁` already reduced to `[0, 2π)`.
    pub fn new(name: &str, analytic: bool, f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), eval: Arc::new(f), analytic }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        Self::new(&format!("({a},{b})"), true, move |_| [a, b])
    }

    /// `(0, 1 - cos x₁)`.
    pub fn cosine_example() -> Self {
        Self::new("(0,1-cos x1)", true, |x| [0.0, 1.0 - x[0].cos()])
    }

    /// `(0, 0)` for `x₁ ∈ (0, π)` and `(0, sin x₁)` for `x₁ ∈ (π, 2π)`.
    pub fn nonanalytic_example() -> Self {
        Self::new("(0,[x1>pi] sin x1)", false, |x| [0.0, if x[0] > PI { x[0].sin() } else { 0.0 }])
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        (self.eval)([wrap(x[0]), x[1]])
    }
}

const FD_STEP: f64 = 1e-3;

fn eval_word(fields: &[&PlanarField], w: &Word, x: [f64; 2]) -> [f64; 2] {
    match w {
        Word::Letter(i) => fields[*i].eval(x),
        Word::Bracket(a, b) => {
            // [X, Y] = DY·X - DX·Y
            let xa = eval_word(fields, a, x);
            let xb = eval_word(fields, b, x);
            let dyx = jvp(fields, b, x, xa);
            let dxy = jvp(fields, a, x, xb);
            [dyx[0] - dxy[0], dyx[1] - dxy[1]]
        }
    }
}

fn jvp(fields: &[&PlanarField], w: &Word, x: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    let norm = v[0].hypot(v[1]);
    if norm == 0.0 {
        return [0.0, 0.0];
    }
    let t = FD_STEP / norm;
    let p = eval_word(fields, w, [x[0] + t * v[0], x[1] + t * v[1]]);
    let m = eval_word(fields, w, [x[0] - t * v[0], x[1] - t * v[1]]);
    [(p[0] - m[0]) / (2.0 * t), (p[1] - m[1]) / (2.0 * t)]
}

/// Rank at `point` of a chosen set of words in the letters `f` (0) and `g` (1).
pub fn planar_rank_of(f: &PlanarField, g: &PlanarField, point: [f64; 2], words: &[Word], tol: f64) -> RankReport {
    let fields = [f, g];
    let directions: Vec<Vec<f64>> = words.iter().map(|w| eval_word(&fields, w, point).to_vec()).collect();
    let (rank, singular_values) = numerical_rank(&directions, tol);
    RankReport {
        point: point.to_vec(),
        labels: words.iter().map(|w| w.label(&["f", "g"])).collect(),
        directions,
        rank,
        depth: words.iter().map(Word::depth).max().unwrap_or(0),
        singular_values,
    }
}

/// Rank at `point` of all right-normed brackets of `f, g` up to `depth`.
pub fn planar_bracket_rank(f: &PlanarField, g: &PlanarField, point: [f64; 2], depth: usize, tol: f64) -> RankReport {
    planar_rank_of(f, g, point, &Word::right_normed(2, depth.max(1)), tol)
}

/// A region of the cylinder, tested pointwise.
#[derive(Clone)]
pub struct Region {
    pub name: String,
    contains: Arc<dyn Fn([f64; 2]) -> bool + Send + Sync>,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region").field("name", &self.name).finish()
    }
}

impl Region {
    /// The predicate receives `x₁` reduced to `[0, 2π)`.
    pub fn new(name: &str, contains: impl Fn([f64; 2]) -> bool + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), contains: Arc::new(contains) }
    }

    /// The band `a ≤ x₁ ≤ b` (within `[0, 2π)`).
    pub fn band(a: f64, b: f64) -> Self {
        Self::new(&format!("{a}<=x1<={b}"), move |x| x[0] >= a - 1e-12 && x[0] <= b + 1e-12)
    }

    /// The circle `x₁ = c`.
    pub fn line(c: f64) -> Self {
        let c = wrap(c);
        Self::new(&format!("x1={c}"), move |x| {
            let d = (x[0] - c).abs();
            d.min(TAU - d) <= 1e-12
        })
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (self.contains)([wrap(x[0]), x[1]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub transversal: bool,
    pub forward_only: bool,
    pub samples: usize,
    /// Exit times per sample; `None` when the trajectory stayed inside up to `t_max`.
    pub forward_exit: Vec<Option<f64>>,
    pub backward_exit: Vec<Option<f64>>,
    pub worst_exit_time: Option<f64>,
}

fn exit_time(f: &PlanarField, region: &Region, x0: [f64; 2], t_max: f64, h: f64) -> Option<f64> {
    let mut x = x0;
    let steps = (t_max.abs() / h).ceil().max(1.0) as usize;
    let dt = t_max / steps as f64;
    let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    for step in 1..=steps {
        let k1 = f.eval(x);
        let k2 = f.eval(add(x, k1, 0.5 * dt));
        let k3 = f.eval(add(x, k2, 0.5 * dt));
        let k4 = f.eval(add(x, k3, dt));
        x = [
            wrap(x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])),
            x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if !region.contains(x) {
            return Some(step as f64 * dt.abs());
        }
    }
    None
}

/// Integrates `f` forward and backward from each sample of `region` for up to
/// `t_max` with RK4 steps of size `h`. With `measure_preserving` set, escaping
/// forward suffices.
pub fn transversality_probe(
    f: &PlanarField,
    region: &Region,
    samples: &[[f64; 2]],
    t_max: f64,
    h: f64,
    measure_preserving: bool,
) -> TransversalityReport {
    let inside: Vec<[f64; 2]> = samples.iter().copied().filter(|x| region.contains(*x)).collect();
    let forward_exit: Vec<Option<f64>> = inside.iter().map(|x| exit_time(f, region, *x, t_max, h)).collect();
    let backward_exit: Vec<Option<f64>> = if measure_preserving {
        Vec::new()
    } else {
        inside.iter().map(|x| exit_time(f, region, *x, -t_max, h)).collect()
    };
    let all = forward_exit.iter().chain(&backward_exit);
    let transversal = !inside.is_empty() && all.clone().all(Option::is_some);
    let worst_exit_time = if transversal { all.flatten().copied().reduce(f64::max) } else { None };
    TransversalityReport {
        transversal,
        forward_only: measure_preserving,
        samples: inside.len(),
        forward_exit,
        backward_exit,
        worst_exit_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(list: &[&str]) -> Vec<Word> {
        list.iter().map(|s| Word::parse(s, &["f", "g"]).unwrap()).collect()
    }

    #[test]
    fn cosine_example_needs_the_double_bracket() {
        let (f, g) = (PlanarField::constant(1.0, 0.0), PlanarField::cosine_example());
        assert_eq!(planar_rank_of(&f, &g, [0.0, 0.3], &words(&["f", "g"]), 1e-8).rank, 1);
        let r = planar_rank_of(&f, &g, [0.0, 0.3], &words(&["f", "[f,[f,g]]"]), 1e-8);
        assert_eq!(r.rank, 2);
        assert!((r.directions[1][1] - 1.0).abs() < 1e-5);
        assert_eq!(planar_rank_of(&f, &g, [PI / 2.0, 0.0], &words(&["f", "g"]), 1e-8).rank, 2);
    }

    #[test]
    fn nonanalytic_brackets_vanish_on_the_flat_half() {
        let (f, g) = (PlanarField::constant(1.0, 0.0), PlanarField::nonanalytic_example());
        for depth in 1..=4 {
            assert_eq!(planar_bracket_rank(&f, &g, [PI / 2.0, 0.0], depth, 1e-8).rank, 1);
        }
        assert_eq!(planar_bracket_rank(&f, &g, [1.5 * PI, 0.0], 1, 1e-8).rank, 2);
    }

    #[test]
    fn transversality_fixtures() {
        let horizontal = PlanarField::constant(1.0, 0.0);
        let line = Region::line(0.0);
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [0.0, i as f64 * 0.5]).collect();
        let r = transversality_probe(&horizontal, &line, &pts, 1.0, 0.01, false);
        assert!(r.transversal);
        assert!(r.worst_exit_time.unwrap() <= 0.01 + 1e-12);

        let band = Region::band(0.0, PI);
        let pts: Vec<[f64; 2]> = (0..=8).map(|i| [PI * i as f64 / 8.0, 0.0]).collect();
        assert!(transversality_probe(&horizontal, &band, &pts, TAU, 0.01, false).transversal);

        let vertical = PlanarField::constant(0.0, 1.0);
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [0.0, i as f64]).collect();
        assert!(!transversality_probe(&vertical, &line, &pts, 5.0, 0.01, false).transversal);
    }
}
