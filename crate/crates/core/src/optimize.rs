//! Dense BFGS with a strong-Wolfe line search.
//!
//! Accepted iterates never increase the objective. The minimizer is generic
//! over any `FnMut(&[f64]) -> (value, gradient)` closure.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    /// Stop once the Euclidean gradient norm is at or below this value.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-9, max_iterations: 2000, c1: 1e-4, c2: 0.9, max_line_search: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// The line search found no point that lowers the objective.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceRecord>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

struct Evaluator<F> {
    f: F,
    count: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Evaluator<F> {
    fn eval(&mut self, x: DVector<f64>) -> Point {
        self.count += 1;
        let (f, g) = (self.f)(x.as_slice());
        Point { x, f, g: DVector::from_vec(g) }
    }
}

/// Minimizes `f` from `x0` with BFGS.
pub fn minimize_bfgs<F>(f: F, x0: &[f64], config: &BfgsConfig) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut ev = Evaluator { f, count: 0 };
    let mut cur = ev.eval(DVector::from_column_slice(x0));
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut first_step = true;
    let mut trace = vec![TraceRecord { iteration: 0, value: cur.f, grad_norm: cur.g.norm() }];
    let mut iterations = 0;

    let termination = loop {
        if !cur.f.is_finite() {
            break Termination::LineSearchStalled;
        }
        if cur.g.norm() <= config.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= config.max_iterations {
            break Termination::MaxIterations;
        }

        let mut dir = -(&h_inv * &cur.g);
        if dir.dot(&cur.g) >= 0.0 {
            h_inv.fill_with_identity();
            first_step = true;
            dir = -cur.g.clone();
        }
        let alpha0 = if first_step { (1.0 / cur.g.norm()).min(1.0) } else { 1.0 };

        let next = match line_search(&mut ev, &cur, &dir, alpha0, config) {
            Some(p) => p,
            None if !first_step => {
                // Retry along steepest descent with a fresh curvature model.
                h_inv.fill_with_identity();
                first_step = true;
                let sd = -cur.g.clone();
                match line_search(&mut ev, &cur, &sd, (1.0 / cur.g.norm()).min(1.0), config) {
                    Some(p) => p,
                    None => break Termination::LineSearchStalled,
                }
            }
            None => break Termination::LineSearchStalled,
        };

        let s = &next.x - &cur.x;
        let y = &next.g - &cur.g;
        let sy = s.dot(&y);
        if sy > f64::EPSILON * s.norm() * y.norm() {
            if first_step {
                h_inv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            first_step = false;
        }
        cur = next;
        iterations += 1;
        trace.push(TraceRecord { iteration: iterations, value: cur.f, grad_norm: cur.g.norm() });
    };

    Minimum {
        grad_norm: cur.g.norm(),
        x: cur.x.as_slice().to_vec(),
        value: cur.f,
        gradient: cur.g.as_slice().to_vec(),
        iterations,
        evaluations: ev.count,
        termination,
        trace,
    }
}

/// Safeguarded cubic interpolation for the minimizer of φ on `[a, b]`.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let mid = 0.5 * (a + b);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * width && t < hi - 0.1 * width {
        t
    } else {
        mid
    }
}

/// Strong-Wolfe line search. Returns `None` when no point with a value at or
/// below the current one could be found.
fn line_search<F>(ev: &mut Evaluator<F>, start: &Point, dir: &DVector<f64>, alpha0: f64, cfg: &BfgsConfig) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let f0 = start.f;
    let d0 = start.g.dot(dir);
    if d0 >= 0.0 || !d0.is_finite() {
        return None;
    }
    let at = |ev: &mut Evaluator<F>, alpha: f64| {
        let p = ev.eval(&start.x + dir * alpha);
        let d = p.g.dot(dir);
        (p, d)
    };
    let armijo = |alpha: f64, f: f64| f <= f0 + cfg.c1 * alpha * d0 && f <= f0;
    let curvature = |d: f64| d.abs() <= -cfg.c2 * d0;

    // Best acceptable fallback: lowest value not above f0 with a smaller gradient.
    let mut fallback: Option<Point> = None;
    let consider = |p: &Point, fallback: &mut Option<Point>| {
        if p.f <= f0 && p.g.norm() < start.g.norm() && fallback.as_ref().is_none_or(|b| p.f < b.f) {
            *fallback = Some(Point { x: p.x.clone(), f: p.f, g: p.g.clone() });
        }
    };

    let mut lo = (0.0, f0, d0);
    let mut lo_point: Option<Point> = None;
    let mut hi: (f64, f64, f64);
    let mut alpha = alpha0;
    let mut prev = (0.0, f0, d0);
    let mut evals = 0;

    // Bracketing phase.
    loop {
        evals += 1;
        let (p, d) = at(ev, alpha);
        consider(&p, &mut fallback);
        if !p.f.is_finite() {
            hi = (alpha, f64::INFINITY, 0.0);
            break;
        }
        if !armijo(alpha, p.f) || (evals > 1 && p.f >= prev.1) {
            hi = (alpha, p.f, d);
            break;
        }
        if curvature(d) {
            return Some(p);
        }
        if d >= 0.0 {
            hi = prev;
            lo = (alpha, p.f, d);
            lo_point = Some(p);
            break;
        }
        prev = (alpha, p.f, d);
        lo = prev;
        lo_point = Some(p);
        if evals >= cfg.max_line_search {
            return lo_point.or(fallback);
        }
        alpha *= 2.0;
    }

    // Zoom phase.
    while evals < cfg.max_line_search {
        evals += 1;
        let a = if hi.1.is_finite() {
            cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2)
        } else {
            0.5 * (lo.0 + hi.0)
        };
        if (a - lo.0).abs() <= f64::EPSILON * a.abs().max(1e-300) {
            break;
        }
        let (p, d) = at(ev, a);
        consider(&p, &mut fallback);
        if !p.f.is_finite() || !armijo(a, p.f) || p.f >= lo.1 {
            hi = (a, p.f, d);
        } else {
            if curvature(d) {
                return Some(p);
            }
            if d * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, p.f, d);
            lo_point = Some(p);
        }
    }
    lo_point.or(fallback).or_else(|| derivative_search(ev, start, dir, alpha0, cfg))
}

/// Line search on the directional derivative alone, for when value changes
/// along `dir` are at round-off level. Steps may raise the value by at most
/// that noise floor and must satisfy the strong curvature condition.
fn derivative_search<F>(ev: &mut Evaluator<F>, start: &Point, dir: &DVector<f64>, alpha0: f64, cfg: &BfgsConfig) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let f0 = start.f;
    let d0 = start.g.dot(dir);
    let noise = 1e-12 * (1.0 + f0.abs());
    let (mut lo, mut lo_d) = (0.0, d0);
    let mut hi: Option<(f64, Option<f64>)> = None;
    let mut best: Option<Point> = None;
    let mut alpha = alpha0;
    for _ in 0..cfg.max_line_search {
        let p = ev.eval(&start.x + dir * alpha);
        let d = p.g.dot(dir);
        if !p.f.is_finite() || p.f > f0 + noise {
            hi = Some((alpha, None));
        } else if d.abs() <= -cfg.c2 * d0 {
            return Some(p);
        } else if d > 0.0 {
            hi = Some((alpha, Some(d)));
        } else {
            lo = alpha;
            lo_d = d;
            best = Some(p);
        }
        alpha = match hi {
            None => 2.0 * alpha,
            Some((h, hd)) => {
                let w = h - lo;
                let secant = hd.map(|hd| lo - lo_d * w / (hd - lo_d));
                match secant {
                    Some(a) if a > lo + 0.1 * w && a < h - 0.1 * w => a,
                    _ => lo + 0.5 * w,
                }
            }
        };
        if (alpha - lo).abs() <= f64::EPSILON * alpha.abs() {
            break;
        }
    }
    best
}
