//! Max-margin training of the instance weights from bag labels only.
//!
//! The objective `sum_n (L_n - R_n) + lambda/2 |w|^2` is a difference of convex functions.
//! Each outer iteration fixes the labeling that attains `R_n` at the current weights, which
//! replaces `-R_n` by a linear function and yields a convex upper bound that touches the
//! objective at the current point. The bound is minimized by the inner solver, and a candidate is
//! only accepted if it does not increase the bound, so the recorded objective never increases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inference::{infer_from_scores, loss_augmented_from_scores};
use super::{Bag, CardinalityModel, Label, ModelWeights};
use crate::error::{Error, Result};

/// Solver for the convex problem inside each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Projected subgradient descent with step `eta0 / sqrt(t)`.
    Subgradient,
    /// Bundle-style cutting planes on the empirical risk with a small dual QP per step.
    CuttingPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecay {
    /// `eta_t = eta0 / sqrt(t)`
    InvSqrt,
    /// `eta_t = eta0 / t`
    Inverse,
}

/// Starting point of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    Zero,
    /// Difference of the mean instance of positive and negative bags, with the bias placed at
    /// the midpoint of the two means.
    MeanDifference,
    /// Small Gaussian weights drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_outer_iters: usize,
    pub inner_solver: InnerSolver,
    pub inner_tolerance: f64,
    pub max_inner_iters: usize,
    /// Relative decrease of the objective below which the outer loop stops.
    pub outer_tolerance: f64,
    pub step_initial: f64,
    pub step_decay: StepDecay,
    pub bias: bool,
    pub init: InitStrategy,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            max_outer_iters: 50,
            inner_solver: InnerSolver::Subgradient,
            inner_tolerance: 1e-4,
            max_inner_iters: 500,
            outer_tolerance: 1e-6,
            step_initial: 1.0,
            step_decay: StepDecay::InvSqrt,
            bias: true,
            init: InitStrategy::MeanDifference,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("inner_tolerance", self.inner_tolerance)?;
        positive("outer_tolerance", self.outer_tolerance)?;
        positive("step_initial", self.step_initial)?;
        if self.max_outer_iters < 1 || self.max_inner_iters < 1 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub outer_iter: usize,
    pub objective: f64,
    pub inner_iters: usize,
    pub training_errors: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelWeights,
    /// Objective at the initial point (iteration 0) and after every outer iteration.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

/// Bag rows with the constant bias feature already appended.
struct Problem<'a> {
    rows: Vec<Vec<Vec<f64>>>,
    labels: Vec<Label>,
    model: &'a CardinalityModel,
    lambda: f64,
    dim: usize,
}

/// Linearization of `R_n` at the current weights: `R_n(w) >= w . psi + offset`.
struct Linearization {
    psi: Vec<f64>,
    offset: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn scores(w: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().map(|x| dot(w, x)).collect()
}

/// Joint feature map `sum_i y_i x_i`.
fn joint_feature(rows: &[Vec<f64>], labels: &[Label], dim: usize) -> Vec<f64> {
    let mut psi = vec![0.0; dim];
    for (x, y) in rows.iter().zip(labels) {
        let s = y.sign();
        for (p, v) in psi.iter_mut().zip(x) {
            *p += s * v;
        }
    }
    psi
}

impl Problem<'_> {
    fn objective(&self, w: &[f64]) -> Result<f64> {
        let hinges: Vec<Result<f64>> = (0..self.rows.len())
            .into_par_iter()
            .map(|n| {
                let s = scores(w, &self.rows[n]);
                super::inference::bag_hinge(&s, self.model, self.labels[n])
            })
            .collect();
        let mut total = 0.0;
        for h in hinges {
            total += h?;
        }
        let value = total + 0.5 * self.lambda * norm_sq(w);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite (|w|^2 = {})",
                norm_sq(w)
            )));
        }
        Ok(value)
    }

    fn training_errors(&self, w: &[f64]) -> usize {
        (0..self.rows.len())
            .filter(|&n| {
                let s = scores(w, &self.rows[n]);
                super::inference::predict_from_scores(&s, self.model)
                    .map(|p| p.label != self.labels[n])
                    .unwrap_or(true)
            })
            .count()
    }

    fn linearize(&self, w: &[f64]) -> Result<Vec<Linearization>> {
        (0..self.rows.len())
            .into_par_iter()
            .map(|n| {
                let rows = &self.rows[n];
                let truth = self.labels[n];
                let (labels, value) = infer_from_scores(&scores(w, rows), self.model, truth)
                    .ok_or(Error::Infeasible(truth.as_i8()))?;
                let m_pos = labels.iter().filter(|&&l| l == Label::Positive).count();
                let offset = self
                    .model
                    .potential(m_pos, labels.len() - m_pos, truth)
                    .finite()
                    .unwrap_or(value);
                Ok(Linearization {
                    psi: joint_feature(rows, &labels, self.dim),
                    offset,
                })
            })
            .collect()
    }

    /// Empirical part of the convex bound, `sum_n [L_n(w) - w . psi_n - offset_n]`, and a
    /// subgradient of it.
    fn bound_risk(&self, w: &[f64], lin: &[Linearization]) -> Result<(f64, Vec<f64>)> {
        let parts: Vec<Result<(f64, Vec<f64>)>> = (0..self.rows.len())
            .into_par_iter()
            .map(|n| {
                let rows = &self.rows[n];
                let (_, labels, l) =
                    loss_augmented_from_scores(&scores(w, rows), self.model, self.labels[n])?;
                let mut g = joint_feature(rows, &labels, self.dim);
                for (gi, pi) in g.iter_mut().zip(&lin[n].psi) {
                    *gi -= pi;
                }
                Ok((l - dot(w, &lin[n].psi) - lin[n].offset, g))
            })
            .collect();
        let mut risk = 0.0;
        let mut grad = vec![0.0; self.dim];
        for part in parts {
            let (r, g) = part?;
            risk += r;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((risk, grad))
    }

    fn bound(&self, w: &[f64], lin: &[Linearization]) -> Result<(f64, Vec<f64>)> {
        let (risk, grad) = self.bound_risk(w, lin)?;
        let value = risk + 0.5 * self.lambda * norm_sq(w);
        if !value.is_finite() {
            return Err(Error::Numerical("convex bound became non-finite".into()));
        }
        Ok((value, grad))
    }
}

/// Trains with the standard multiple-instance cardinality model.
pub fn train(bags: &[Bag], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_model(bags, &CardinalityModel::StandardMil, config)
}

pub fn train_with_model(
    bags: &[Bag],
    model: &CardinalityModel,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let problem = build_problem(bags, model, config)?;

    let mut w = initial_weights(&problem, config);
    let mut current = problem.objective(&w)?;
    let mut trace = vec![TraceEntry {
        outer_iter: 0,
        objective: current,
        inner_iters: 0,
        training_errors: problem.training_errors(&w),
    }];
    let mut converged = false;

    for outer in 1..=config.max_outer_iters {
        let lin = problem.linearize(&w)?;
        let (candidate, inner_iters) = match config.inner_solver {
            InnerSolver::Subgradient => subgradient(&problem, &lin, &w, config)?,
            InnerSolver::CuttingPlane => cutting_plane(&problem, &lin, &w, config)?,
        };
        let mut next = problem.objective(&candidate)?;
        let accepted = next <= current;
        if accepted {
            w = candidate;
        } else {
            // Rounding can push a tiny improvement of the bound above the true objective.
            next = current;
        }
        trace.push(TraceEntry {
            outer_iter: outer,
            objective: next,
            inner_iters,
            training_errors: problem.training_errors(&w),
        });
        log::debug!("outer {outer}: objective {next:.9} ({inner_iters} inner steps)");
        let decrease = current - next;
        current = next;
        if !accepted || decrease < config.outer_tolerance * current.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let fingerprint = String::new();
    let model = ModelWeights::new(w, config.lambda, fingerprint, config.bias)?;
    Ok(TrainOutcome {
        model,
        trace,
        converged,
    })
}

fn build_problem<'a>(
    bags: &[Bag],
    model: &'a CardinalityModel,
    config: &TrainConfig,
) -> Result<Problem<'a>> {
    let Some(first) = bags.first() else {
        return Err(Error::Training("no training bags".into()));
    };
    let feature_dim = first.dim();
    let mut labels = Vec::with_capacity(bags.len());
    let mut rows = Vec::with_capacity(bags.len());
    for bag in bags {
        let label = bag
            .label
            .ok_or_else(|| Error::Contract(format!("bag `{}` is unlabeled", bag.bag_id)))?;
        if bag.dim() != feature_dim {
            return Err(Error::Dimension {
                expected: feature_dim,
                actual: bag.dim(),
            });
        }
        labels.push(label);
        rows.push(
            bag.instances
                .iter()
                .map(|x| {
                    let mut r = x.features.clone();
                    if config.bias {
                        r.push(1.0);
                    }
                    r
                })
                .collect::<Vec<_>>(),
        );
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Training(format!(
            "training needs both classes, got {n_pos} positive and {n_neg} negative bags"
        )));
    }
    Ok(Problem {
        rows,
        labels,
        model,
        lambda: config.lambda,
        dim: feature_dim + usize::from(config.bias),
    })
}

fn initial_weights(problem: &Problem<'_>, config: &TrainConfig) -> Vec<f64> {
    let dim = problem.dim;
    match config.init {
        InitStrategy::Zero => vec![0.0; dim],
        InitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let normal = Normal::new(0.0, 0.01).expect("valid normal");
            (0..dim).map(|_| normal.sample(&mut rng)).collect()
        }
        InitStrategy::MeanDifference => {
            let feature_dim = dim - usize::from(config.bias);
            let mut means = [vec![0.0; feature_dim], vec![0.0; feature_dim]];
            let mut counts = [0usize; 2];
            for (rows, label) in problem.rows.iter().zip(&problem.labels) {
                let c = usize::from(*label == Label::Positive);
                for x in rows {
                    for (m, v) in means[c].iter_mut().zip(x) {
                        *m += v;
                    }
                    counts[c] += 1;
                }
            }
            for c in 0..2 {
                for m in means[c].iter_mut() {
                    *m /= counts[c] as f64;
                }
            }
            let mut w: Vec<f64> = means[1].iter().zip(&means[0]).map(|(p, n)| p - n).collect();
            if config.bias {
                let mid: Vec<f64> = means[1].iter().zip(&means[0]).map(|(p, n)| 0.5 * (p + n)).collect();
                let b = -dot(&w, &mid);
                w.push(b);
            }
            w
        }
    }
}

fn project_to_ball(w: &mut [f64], radius: f64) {
    let n = norm_sq(w).sqrt();
    if n > radius {
        let s = radius / n;
        w.iter_mut().for_each(|v| *v *= s);
    }
}

/// Projected subgradient descent on the convex bound, started at the current weights.
/// Returns the best iterate seen, which is never worse than the start.
fn subgradient(
    problem: &Problem<'_>,
    lin: &[Linearization],
    start: &[f64],
    config: &TrainConfig,
) -> Result<(Vec<f64>, usize)> {
    const PATIENCE: usize = 50;
    let n = problem.rows.len() as f64;
    // Any minimizer satisfies lambda/2 |w|^2 <= bound(0).
    let zero = vec![0.0; problem.dim];
    let (at_zero, _) = problem.bound(&zero, lin)?;
    let radius = (2.0 * at_zero.max(0.0) / problem.lambda).sqrt();

    let mut w = start.to_vec();
    let mut best_w = w.clone();
    let mut best = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut reference = f64::INFINITY;
    let mut iters = 0;
    for t in 1..=config.max_inner_iters {
        iters = t;
        let (value, mut grad) = problem.bound(&w, lin)?;
        if value < best {
            best = value;
            best_w.copy_from_slice(&w);
        }
        if reference - best > config.inner_tolerance * best.abs().max(1.0) {
            reference = best;
            last_improvement = t;
        } else if t - last_improvement >= PATIENCE {
            break;
        }
        for (g, wi) in grad.iter_mut().zip(&w) {
            *g = (*g + problem.lambda * wi) / n;
        }
        let step = match config.step_decay {
            StepDecay::InvSqrt => config.step_initial / (t as f64).sqrt(),
            StepDecay::Inverse => config.step_initial / t as f64,
        };
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= step * g;
        }
        project_to_ball(&mut w, radius);
    }
    Ok((best_w, iters))
}

/// Projection onto `{a >= 0, sum a <= 1}`.
fn project_capped_simplex(a: &mut [f64]) {
    for v in a.iter_mut() {
        *v = v.max(0.0);
    }
    if a.iter().sum::<f64>() <= 1.0 {
        return;
    }
    let mut sorted = a.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for v in a.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Maximizes `sum a_j b_j - 1/(2 lambda) a' G a` over the capped simplex with accelerated
/// projected gradient, warm-started from `alpha`.
fn solve_plane_dual(gram: &[Vec<f64>], offsets: &[f64], lambda: f64, alpha: &mut Vec<f64>) {
    let k = offsets.len();
    alpha.resize(k, 0.0);
    let lipschitz = gram
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        / lambda;
    if lipschitz <= 0.0 {
        // Every plane is flat: the best offset wins outright.
        alpha.iter_mut().for_each(|a| *a = 0.0);
        if let Some((j, &b)) = offsets.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)) {
            if b > 0.0 {
                alpha[j] = 1.0;
            }
        }
        return;
    }
    let step = 1.0 / lipschitz;
    let mut y = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..2000 {
        let mut next: Vec<f64> = (0..k)
            .map(|j| {
                let ga: f64 = gram[j].iter().zip(&y).map(|(g, a)| g * a).sum();
                y[j] + step * (offsets[j] - ga / lambda)
            })
            .collect();
        project_capped_simplex(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        let mut change = 0.0f64;
        for j in 0..k {
            change = change.max((next[j] - alpha[j]).abs());
            y[j] = next[j] + momentum * (next[j] - alpha[j]);
        }
        *alpha = next;
        t = t_next;
        if change < 1e-12 {
            break;
        }
    }
}

/// Cutting-plane minimization of the convex bound: the empirical risk is approximated from
/// below by the maximum of its accumulated tangent planes (and zero, since it is non-negative).
fn cutting_plane(
    problem: &Problem<'_>,
    lin: &[Linearization],
    start: &[f64],
    config: &TrainConfig,
) -> Result<(Vec<f64>, usize)> {
    let lambda = problem.lambda;
    let mut planes: Vec<Vec<f64>> = Vec::new();
    let mut offsets: Vec<f64> = Vec::new();
    let mut gram: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();

    let mut w = start.to_vec();
    let mut best_w = w.clone();
    let mut best = f64::INFINITY;
    let mut iters = 0;
    for t in 1..=config.max_inner_iters {
        iters = t;
        let (risk, a) = problem.bound_risk(&w, lin)?;
        let value = risk + 0.5 * lambda * norm_sq(&w);
        if value < best {
            best = value;
            best_w.copy_from_slice(&w);
        }
        let b = risk - dot(&a, &w);
        let row: Vec<f64> = planes.iter().map(|p| dot(p, &a)).collect();
        for (g, v) in gram.iter_mut().zip(&row) {
            g.push(*v);
        }
        let mut new_row = row;
        new_row.push(norm_sq(&a));
        gram.push(new_row);
        planes.push(a);
        offsets.push(b);

        solve_plane_dual(&gram, &offsets, lambda, &mut alpha);
        w = vec![0.0; problem.dim];
        for (p, &al) in planes.iter().zip(&alpha) {
            if al != 0.0 {
                for (wi, pi) in w.iter_mut().zip(p) {
                    *wi -= al * pi / lambda;
                }
            }
        }
        // The dual value lower-bounds the minimum of the convex bound.
        let dual = dot(&alpha, &offsets) - 0.5 * lambda * norm_sq(&w);
        if best - dual <= config.inner_tolerance * best.abs().max(1.0) {
            break;
        }
    }
    let (value, _) = problem.bound(&w, lin)?;
    if value < best {
        best_w = w;
    }
    Ok((best_w, iters))
}
