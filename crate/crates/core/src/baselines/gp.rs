//! Symbolic regression by genetic programming.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Estimator;
use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub max_tree_depth: usize,
    pub crossover_probability: f64,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 50,
            tournament_size: 7,
            max_tree_depth: 6,
            crossover_probability: 0.9,
            seed: 42,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.tournament_size == 0 || self.max_tree_depth < 1 {
            return Err(Error::config(
                "GP needs population >= 2, tournament >= 1 and depth >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(Error::config("crossover probability must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Feature(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Protected: a zero denominator yields 1.
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Feature(i) => x[*i],
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => {
                let d = b.eval(x);
                if d == 0.0 {
                    1.0
                } else {
                    a.eval(x) / d
                }
            }
        }
    }

    /// A lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        match self.children() {
            Some((a, b)) => 1 + a.depth().max(b.depth()),
            None => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self.children() {
            Some((a, b)) => 1 + a.size() + b.size(),
            None => 1,
        }
    }

    fn children(&self) -> Option<(&Expr, &Expr)> {
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => Some((a, b)),
            _ => None,
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Expr::Feature(i) => Some(*i),
            Expr::Const(_) => None,
            _ => {
                let (a, b) = self.children().expect("operator");
                a.max_feature().max(b.max_feature())
            }
        }
    }

    /// Pre-order node `n`.
    fn node(&self, n: usize) -> &Expr {
        if n == 0 {
            return self;
        }
        let (a, b) = self.children().expect("index within tree");
        let left = a.size();
        if n <= left {
            a.node(n - 1)
        } else {
            b.node(n - 1 - left)
        }
    }

    fn node_mut(&mut self, n: usize) -> &mut Expr {
        if n == 0 {
            return self;
        }
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let left = a.size();
                if n <= left {
                    a.node_mut(n - 1)
                } else {
                    b.node_mut(n - 1 - left)
                }
            }
            _ => unreachable!("index within tree"),
        }
    }

    fn node_depth(&self, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        let (a, b) = self.children().expect("index within tree");
        let left = a.size();
        1 + if n <= left {
            a.node_depth(n - 1)
        } else {
            b.node_depth(n - 1 - left)
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Feature(i) => write!(f, "x{i}"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub expression: Expr,
    pub schema: FeatureSchema,
    pub config: GpConfig,
    pub train_rmse: f64,
}

impl Estimator for GpModel {
    fn name(&self) -> &'static str {
        "GeneticP"
    }

    fn schema(&self) -> Option<&FeatureSchema> {
        Some(&self.schema)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.schema.len() || self.expression.max_feature().is_some_and(|m| m >= x.len()) {
            return Err(Error::contract(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.schema.len()
            )));
        }
        let y = self.expression.eval(x);
        Ok(if y.is_nan() { 0.0 } else { y.max(0.0) })
    }
}

pub fn gp_fit(train: &Dataset, cfg: &GpConfig) -> Result<GpModel> {
    gp_fit_with_history(train, cfg).map(|(m, _)| m)
}

/// Also returns the best-of-run fitness after each generation
/// (index 0 is the initial population).
pub fn gp_fit_with_history(train: &Dataset, cfg: &GpConfig) -> Result<(GpModel, Vec<f64>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    let n_features = train.schema.len();
    if n_features == 0 {
        return Err(Error::contract("GP needs at least one feature"));
    }
    let xs: Vec<&[f64]> = train.rows.iter().map(|r| r.features.values.as_slice()).collect();
    let ys = train.targets();
    let fitness = |e: &Expr| rmse(e, &xs, &ys);
    let ctx = Breeder {
        cfg,
        n_features,
    };

    let mut population: Vec<Expr> = (0..cfg.population)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, 0, i);
            // ramped half-and-half over depths 1..=max
            let depth = 1 + i % cfg.max_tree_depth;
            ctx.random_tree(&mut rng, depth, i % 2 == 0)
        })
        .collect();
    let mut scores: Vec<f64> = population.par_iter().map(fitness).collect();

    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut best = argmin(&scores);
    history.push(scores[best]);

    for generation in 1..=cfg.generations {
        let elite = population[best].clone();
        let elite_score = scores[best];
        let offspring: Vec<Expr> = (1..cfg.population)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(cfg.seed, generation, i);
                let a = ctx.tournament(&mut rng, &scores);
                if rng.gen::<f64>() < cfg.crossover_probability {
                    let b = ctx.tournament(&mut rng, &scores);
                    ctx.crossover(&mut rng, &population[a], &population[b])
                } else {
                    ctx.point_mutation(&mut rng, &population[a])
                }
            })
            .collect();
        let offspring_scores: Vec<f64> = offspring.par_iter().map(fitness).collect();

        population = std::iter::once(elite).chain(offspring).collect();
        scores = std::iter::once(elite_score).chain(offspring_scores).collect();
        best = argmin(&scores);
        history.push(scores[best]);
    }

    Ok((
        GpModel {
            expression: population.swap_remove(best),
            schema: train.schema.clone(),
            config: cfg.clone(),
            train_rmse: scores[best],
        },
        history,
    ))
}

fn stream_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn rmse(e: &Expr, xs: &[&[f64]], ys: &[f64]) -> f64 {
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let p = e.eval(x);
        let p = if p.is_nan() { 0.0 } else { p.max(0.0) };
        sse += (p - y) * (p - y);
    }
    let v = (sse / ys.len() as f64).sqrt();
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// First index of the smallest score.
fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}

struct Breeder<'a> {
    cfg: &'a GpConfig,
    n_features: usize,
}

impl Breeder<'_> {
    fn terminal(&self, rng: &mut ChaCha8Rng) -> Expr {
        if rng.gen_bool(0.75) {
            Expr::Feature(rng.gen_range(0..self.n_features))
        } else {
            Expr::Const((rng.gen_range(-5.0..5.0f64) * 100.0).round() / 100.0)
        }
    }

    fn operator(&self, rng: &mut ChaCha8Rng, a: Expr, b: Expr) -> Expr {
        let (a, b) = (Box::new(a), Box::new(b));
        match rng.gen_range(0..4) {
            0 => Expr::Add(a, b),
            1 => Expr::Sub(a, b),
            2 => Expr::Mul(a, b),
            _ => Expr::Div(a, b),
        }
    }

    /// `full` grows every branch to `depth`; otherwise branches may stop early.
    fn random_tree(&self, rng: &mut ChaCha8Rng, depth: usize, full: bool) -> Expr {
        let stop = depth == 0 || (!full && rng.gen_bool(0.3));
        if stop {
            return self.terminal(rng);
        }
        let a = self.random_tree(rng, depth - 1, full);
        let b = self.random_tree(rng, depth - 1, full);
        self.operator(rng, a, b)
    }

    fn tournament(&self, rng: &mut ChaCha8Rng, scores: &[f64]) -> usize {
        let mut best = rng.gen_range(0..scores.len());
        for _ in 1..self.cfg.tournament_size {
            let c = rng.gen_range(0..scores.len());
            if scores[c] < scores[best] || (scores[c] == scores[best] && c < best) {
                best = c;
            }
        }
        best
    }

    /// Replaces a random subtree of `a` with a random subtree of `b`;
    /// falls back to `a` when the child would be too deep.
    fn crossover(&self, rng: &mut ChaCha8Rng, a: &Expr, b: &Expr) -> Expr {
        let at = rng.gen_range(0..a.size());
        let donor = b.node(rng.gen_range(0..b.size()));
        if a.node_depth(at) + donor.depth() > self.cfg.max_tree_depth {
            return a.clone();
        }
        let mut child = a.clone();
        *child.node_mut(at) = donor.clone();
        child
    }

    /// Swaps one node for another of the same arity.
    fn point_mutation(&self, rng: &mut ChaCha8Rng, a: &Expr) -> Expr {
        let mut child = a.clone();
        let node = child.node_mut(rng.gen_range(0..a.size()));
        *node = match std::mem::replace(node, Expr::Const(0.0)) {
            Expr::Feature(_) | Expr::Const(_) => self.terminal(rng),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                self.operator(rng, *l, *r)
            }
        };
        child
    }
}
