//! Earth Mover's distance between equal-size clouds.
//!
//! The exact mode solves the linear assignment problem on squared distances
//! (shortest augmenting paths with potentials, cubic time). The approximate
//! mode solves entropy-regularized transport in the log domain with an
//! epsilon-scaling schedule, then rounds the plan onto the exact uniform
//! marginals. Because the rounded plan is feasible,
//!
//! `exact <= approximate <= exact + eps_final * ln(N)` (up to the marginal
//! tolerance of the last Sinkhorn stage), where `eps_final` is
//! `EmdConfig::epsilon` times the mean pairwise cost.

use serde::{Deserialize, Serialize};

use super::chamfer::LossValue;
use crate::cloud::{dist2, Point3};
use crate::{Error, Result};

/// Largest cloud size the `Auto` mode solves exactly.
pub const EXACT_EMD_MAX_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmdMode {
    Exact,
    Approximate,
    /// Exact up to [`EXACT_EMD_MAX_POINTS`], approximate above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdConfig {
    pub mode: EmdMode,
    /// Final entropic regularization, relative to the mean pairwise cost.
    pub epsilon: f64,
    /// Per-stage Sinkhorn iteration cap.
    pub max_stage_iters: usize,
    /// L1 row-marginal tolerance, relative to the marginal mass.
    pub tolerance: f64,
}

impl Default for EmdConfig {
    fn default() -> Self {
        Self {
            mode: EmdMode::Auto,
            epsilon: 1e-4,
            max_stage_iters: 2000,
            tolerance: 1e-3,
        }
    }
}

/// Minimum-cost perfect matching on a square row-major cost matrix.
/// Returns `assignment[row] = col`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::Shape(format!("{} costs for a {n}x{n} problem", cost.len())));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost".into()));
    }
    // 1-based potentials; column 0 is a virtual source.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    Ok(assignment)
}

fn cost_matrix(p: &[Point3], q: &[Point3]) -> Vec<f64> {
    let mut c = Vec::with_capacity(p.len() * q.len());
    for a in p {
        for b in q {
            c.push(dist2(a, b));
        }
    }
    c
}

/// `min over bijections phi: (1/N) sum |p - phi(p)|^2`, gradient w.r.t. `q`.
pub fn emd(p: &[Point3], q: &[Point3], config: &EmdConfig) -> Result<LossValue> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "EMD needs equal point counts, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::InvalidInput("EMD of empty clouds".into()));
    }
    let exact = match config.mode {
        EmdMode::Exact => true,
        EmdMode::Approximate => false,
        EmdMode::Auto => p.len() <= EXACT_EMD_MAX_POINTS,
    };
    if exact {
        emd_exact(p, q)
    } else {
        emd_sinkhorn(p, q, config)
    }
}

pub fn emd_exact(p: &[Point3], q: &[Point3]) -> Result<LossValue> {
    let n = p.len();
    let cost = cost_matrix(p, q);
    let assignment = solve_assignment(&cost, n)?;
    let nf = n as f64;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; n];
    for (i, &j) in assignment.iter().enumerate() {
        value += cost[i * n + j];
        for a in 0..3 {
            grad[j][a] = 2.0 * (q[j][a] - p[i][a]) / nf;
        }
    }
    Ok(LossValue {
        value: value / nf,
        grad,
    })
}

// `eps * (log_marginal - logsumexp((pot - row) / eps))` over one row.
fn soft_min(row: &[f64], pot: &[f64], inv_eps: f64, eps: f64, log_marginal: f64, buf: &mut [f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for ((b, &c), &p) in buf.iter_mut().zip(row).zip(pot) {
        *b = (p - c) * inv_eps;
        m = m.max(*b);
    }
    let s: f64 = buf.iter().map(|&v| (v - m).exp()).sum();
    eps * (log_marginal - (m + s.ln()))
}

/// Entropic transport plan (row-major, marginals `1/N`) for the cost matrix.
fn sinkhorn_plan(cost: &[f64], n: usize, config: &EmdConfig) -> Vec<f64> {
    const CHECK_EVERY: usize = 10;
    let nf = n as f64;
    let log_marginal = -nf.ln();
    let mean_cost = cost.iter().sum::<f64>() / cost.len() as f64;
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let eps_final = (config.epsilon * mean_cost).max(f64::MIN_POSITIVE);
    let mut eps = max_cost.max(eps_final);
    let mut cost_t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost_t[j * n + i] = cost[i * n + j];
        }
    }
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut buf = vec![0.0; n];

    loop {
        let inv = 1.0 / eps;
        for it in 0..config.max_stage_iters.max(1) {
            for i in 0..n {
                f[i] = soft_min(&cost[i * n..(i + 1) * n], &g, inv, eps, log_marginal, &mut buf);
            }
            for j in 0..n {
                g[j] = soft_min(&cost_t[j * n..(j + 1) * n], &f, inv, eps, log_marginal, &mut buf);
            }
            if (it + 1) % CHECK_EVERY != 0 {
                continue;
            }
            // Columns are exact after the g-update; check the rows.
            let mut err = 0.0;
            for i in 0..n {
                let row = &cost[i * n..(i + 1) * n];
                let r: f64 = row.iter().zip(&g).map(|(&c, &gj)| ((f[i] + gj - c) * inv).exp()).sum();
                err += (r - 1.0 / nf).abs();
            }
            if err < config.tolerance {
                break;
            }
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps * 0.5).max(eps_final);
    }

    let inv = 1.0 / eps;
    let mut plan: Vec<f64> = (0..n * n)
        .map(|k| ((f[k / n] + g[k % n] - cost[k]) * inv).exp())
        .collect();
    round_to_marginals(&mut plan, n);
    plan
}

// Projects a nonnegative plan onto the transport polytope with uniform
// marginals: scale rows down, scale columns down, then add the rank-one
// correction for the remaining mass.
fn round_to_marginals(plan: &mut [f64], n: usize) {
    let target = 1.0 / n as f64;
    for i in 0..n {
        let row = &mut plan[i * n..(i + 1) * n];
        let s: f64 = row.iter().sum();
        if s > target {
            let x = target / s;
            row.iter_mut().for_each(|v| *v *= x);
        }
    }
    for j in 0..n {
        let s: f64 = (0..n).map(|i| plan[i * n + j]).sum();
        if s > target {
            let y = target / s;
            (0..n).for_each(|i| plan[i * n + j] *= y);
        }
    }
    let err_r: Vec<f64> = (0..n)
        .map(|i| target - plan[i * n..(i + 1) * n].iter().sum::<f64>())
        .collect();
    let err_c: Vec<f64> = (0..n)
        .map(|j| target - (0..n).map(|i| plan[i * n + j]).sum::<f64>())
        .collect();
    let l1: f64 = err_r.iter().sum();
    if l1 > 0.0 {
        for i in 0..n {
            for j in 0..n {
                plan[i * n + j] += err_r[i] * err_c[j] / l1;
            }
        }
    }
}

pub fn emd_sinkhorn(p: &[Point3], q: &[Point3], config: &EmdConfig) -> Result<LossValue> {
    let n = p.len();
    let cost = cost_matrix(p, q);
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("EMD cost".into()));
    }
    let plan = sinkhorn_plan(&cost, n, config);
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in 0..n {
            let w = plan[i * n + j];
            value += w * cost[i * n + j];
            for a in 0..3 {
                grad[j][a] += 2.0 * w * (q[j][a] - p[i][a]);
            }
        }
    }
    Ok(LossValue { value, grad })
}

/// EMD value only; the evaluation metric.
pub fn emd_distance(p: &[Point3], q: &[Point3], config: &EmdConfig) -> Result<f64> {
    Ok(emd(p, q, config)?.value)
}
