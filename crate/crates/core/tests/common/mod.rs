//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod grad_cases;

use b2m::autodiff::{Graph, Tensor, Var};
use b2m::rng::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Largest relative error between reverse-mode gradients and central finite
/// differences over every entry of every parameter. The denominator is
/// floored at 1e-3 so entries whose true gradient is essentially zero are
/// judged on absolute error.
pub fn gradcheck(params: &[Tensor], build: impl Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |ps: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|t| g.param(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
    let loss = build(&mut g, &vars);
    g.backward(loss).expect("scalar loss");
    let mut worst = 0.0f64;
    for (i, p) in params.iter().enumerate() {
        let analytic = g.grad(vars[i]).expect("leaf gradient");
        for j in 0..p.numel() {
            let mut plus = params.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = params.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            let a = analytic.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), rng.normals(n)).unwrap()
}

/// InfoNCE written straight from its definition: for every anchor `i`,
/// `-log(exp(S_ii) / sum_j exp(S_ij))` with `S = T M^T / tau`, summed.
pub fn naive_contrastive(teacher: &[Vec<f64>], model: &[Vec<f64>], tau: f64) -> f64 {
    let b = teacher.len();
    let sim = |i: usize, j: usize| {
        teacher[i]
            .iter()
            .zip(&model[j])
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / tau
    };
    let mut total = 0.0;
    for i in 0..b {
        let mut denom = 0.0;
        for j in 0..b {
            denom += sim(i, j).exp();
        }
        total += -(sim(i, i).exp() / denom).ln();
    }
    total
}

/// One-sided rank-sum p-value by brute force over every way of choosing
/// which pooled observations belong to the first sample. Ranks are midranks;
/// the statistic is the first sample's rank sum.
pub fn enumerated_rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n_total = pooled.len();
    let midrank = |x: f64| {
        let below = pooled.iter().filter(|&&y| y < x).count() as f64;
        let equal = pooled.iter().filter(|&&y| y == x).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = pooled.iter().map(|&x| midrank(x)).collect();
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n_total) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: f64 = (0..n_total)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| ranks[k])
            .sum();
        total += 1;
        if s >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}
