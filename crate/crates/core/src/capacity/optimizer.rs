//! Grid search plus projected-gradient polish over products of simplices.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::rng::{domain, stream};

use super::SolverConfig;

/// Evaluations allowed in the global grid phase.
const GRID_BUDGET: usize = 200_000;
/// Grid candidates carried into refinement.
const POLISH_TOP: usize = 4;

/// A point: `w` on Δ(k) and one conditional `q_u` on Δ(a) per component.
/// Prior-only problems use `w` alone with `q` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub w: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

impl Point {
    fn prior(w: Vec<f64>) -> Self {
        Self { w, q: Vec::new() }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        for q in &self.q {
            v.extend_from_slice(q);
        }
        v
    }

    fn rebuild(&self, flat: &[f64]) -> Self {
        let k = self.w.len();
        let w = flat[..k].to_vec();
        let mut q = Vec::with_capacity(self.q.len());
        let mut off = k;
        for block in &self.q {
            q.push(flat[off..off + block.len()].to_vec());
            off += block.len();
        }
        Self { w, q }
    }

    fn project(&self, flat: &mut [f64]) {
        let k = self.w.len();
        project_simplex(&mut flat[..k]);
        let mut off = k;
        for block in &self.q {
            project_simplex(&mut flat[off..off + block.len()]);
            off += block.len();
        }
    }

    /// Marginal on the input alphabet, `Σ_u w_u q_u`.
    pub fn input_marginal(&self) -> Vec<f64> {
        if self.q.is_empty() {
            return self.w.clone();
        }
        let mut m = vec![0.0; self.q[0].len()];
        for (wu, qu) in self.w.iter().zip(&self.q) {
            for (mi, qi) in m.iter_mut().zip(qu) {
                *mi += wu * qi;
            }
        }
        m
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Points of Δ(dim) with coordinates in multiples of `1/(res-1)`.
pub fn simplex_grid(dim: usize, res: usize) -> Vec<Vec<f64>> {
    let steps = res.saturating_sub(1).max(1);
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, steps: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            cur[pos] = c;
            rec(pos + 1, left - c, cur, steps, out);
        }
    }
    if dim == 1 {
        return vec![vec![1.0]];
    }
    rec(0, steps, &mut cur, steps, &mut out);
    out
}

fn grid_size(dim: usize, res: usize) -> usize {
    // C(res - 1 + dim - 1, dim - 1)
    let n = res - 1 + dim - 1;
    let k = dim - 1;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Largest resolution ≤ `res` whose grid (raised to `power`) fits the budget.
fn fitted_resolution(dim: usize, res: usize, power: u32, extra: usize) -> usize {
    let mut r = res.max(2);
    while r > 2 {
        let g = grid_size(dim, r);
        let total = (g as u128).pow(power) * extra as u128;
        if total <= GRID_BUDGET as u128 {
            break;
        }
        r -= 1;
    }
    r
}

fn dirichlet<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Numerical-gradient ascent with step halving; only improvements are kept.
fn polish<F>(start: Point, value: f64, f: &F, iters: usize) -> (f64, Point)
where
    F: Fn(&Point) -> f64 + Sync,
{
    let mut x = start.flatten();
    let mut fx = value;
    let mut step = 0.1;
    let h = 1e-6;
    for _ in 0..iters {
        if step < 1e-10 {
            break;
        }
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            start.project(&mut up);
            start.project(&mut dn);
            grad[i] = (f(&start.rebuild(&up)) - f(&start.rebuild(&dn))) / (2.0 * h);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 1e-14) {
            break;
        }
        loop {
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + step * g / norm).collect();
            start.project(&mut cand);
            let fc = f(&start.rebuild(&cand));
            if fc > fx {
                x = cand;
                fx = fc;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
    }
    (fx, start.rebuild(&x))
}

fn best_of(results: Vec<(f64, Point)>) -> (f64, Point) {
    let mut it = results.into_iter();
    let mut best = it.next().expect("at least one candidate");
    for r in it {
        if r.0 > best.0 {
            best = r;
        }
    }
    best
}

/// Indices of the `m` best values, ties to the lower index.
fn top_indices(values: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

fn polish_all<F>(cands: Vec<Point>, f: &F, iters: usize) -> Vec<(f64, Point)>
where
    F: Fn(&Point) -> f64 + Sync,
{
    cands
        .into_par_iter()
        .map(|p| {
            let v = f(&p);
            polish(p, v, f, iters)
        })
        .collect()
}

/// Maximise `f` over priors on an alphabet of size `a`.
pub fn maximize_prior<F>(a: usize, f: &F, cfg: &SolverConfig, salt: u64) -> (f64, Point)
where
    F: Fn(&Point) -> f64 + Sync,
{
    let res = fitted_resolution(a, cfg.grid_resolution, 1, 1);
    let grid: Vec<Point> = simplex_grid(a, res).into_iter().map(Point::prior).collect();
    let values: Vec<f64> = grid.par_iter().map(f).collect();
    let mut cands: Vec<Point> = top_indices(&values, POLISH_TOP).into_iter().map(|i| grid[i].clone()).collect();
    for r in 0..cfg.restarts {
        let mut rng = stream(cfg.seed, domain::RESTART, &[salt, 1, r as u64]);
        cands.push(Point::prior(dirichlet(a, &mut rng)));
    }
    let mut results = polish_all(cands, f, cfg.refine_iters);
    // the raw grid optimum stays a candidate in case polishing stalls
    let g = top_indices(&values, 1)[0];
    results.insert(0, (values[g], grid[g].clone()));
    best_of(results)
}

/// Maximise `f` over an auxiliary variable with up to `k` values feeding an
/// alphabet of size `a`. The candidate set for `k` contains the one for
/// `k − 1`, so the optimum is nondecreasing in `k`.
pub fn maximize_aux<F>(a: usize, k: usize, f: &F, cfg: &SolverConfig, salt: u64) -> (f64, Point)
where
    F: Fn(&Point) -> f64 + Sync,
{
    let uniform = vec![1.0 / a as f64; a];
    if k == 1 {
        let p = Point { w: vec![1.0], q: vec![uniform] };
        return (f(&p), p);
    }
    // pairs of conditionals times a weight grid
    let wres = cfg.grid_resolution.max(2);
    let res = fitted_resolution(a, cfg.grid_resolution, 2, wres);
    let g = simplex_grid(a, res);
    let weights = simplex_grid(2, wres);
    let mut grid: Vec<Point> = Vec::with_capacity(g.len() * g.len() * weights.len());
    for i in 0..g.len() {
        for j in i..g.len() {
            for w in &weights {
                grid.push(Point { w: w.clone(), q: vec![g[i].clone(), g[j].clone()] });
            }
        }
    }
    // auxiliary equal to the input itself
    if k >= a {
        let pres = fitted_resolution(a, cfg.grid_resolution, 1, 1);
        for w in simplex_grid(a, pres) {
            let q = (0..a)
                .map(|x| (0..a).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
                .collect();
            grid.push(Point { w, q });
        }
    }
    let values: Vec<f64> = grid.par_iter().map(f).collect();
    let mut cands: Vec<Point> = top_indices(&values, POLISH_TOP).into_iter().map(|i| grid[i].clone()).collect();
    for kk in 2..=k {
        for r in 0..cfg.restarts {
            let mut rng = stream(cfg.seed, domain::RESTART, &[salt, kk as u64, r as u64]);
            let w = dirichlet(kk, &mut rng);
            let q = (0..kk).map(|_| dirichlet(a, &mut rng)).collect();
            cands.push(Point { w, q });
        }
    }
    let mut results = polish_all(cands, f, cfg.refine_iters);
    let top = top_indices(&values, 1)[0];
    results.insert(0, (values[top], grid[top].clone()));
    best_of(results)
}
