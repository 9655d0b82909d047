//! Classical entropic latent search over discrete joint distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::verdict::{decide, BetaRun, Verdict};

pub const PMF_SUM_TOL: f64 = 1e-12;
const DIV_FLOOR: f64 = 1e-300;

/// Row-major probability table over a product of finite supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    supports: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(supports: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if supports.is_empty() || supports.contains(&0) {
            return Err(Error::InvalidPmf(format!("bad supports {supports:?}")));
        }
        let size: usize = supports.iter().product();
        if probs.len() != size {
            return Err(Error::InvalidPmf(format!(
                "{} probabilities for supports {supports:?}",
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidPmf(format!("entry {i} is {}", probs[i])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidPmf(format!("probabilities sum to {total}")));
        }
        Ok(Self { supports, probs })
    }

    /// Clamps tiny negatives to zero and rescales to unit mass.
    pub fn normalized(supports: Vec<usize>, mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidPmf(format!("cannot normalize mass {total}")));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        Self::new(supports, probs)
    }

    pub fn supports(&self) -> &[usize] {
        &self.supports
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn ndim(&self) -> usize {
        self.supports.len()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let mut off = 0;
        for (i, (&k, &s)) in index.iter().zip(&self.supports).enumerate() {
            debug_assert!(k < s, "index {i} out of range");
            off = off * s + k;
        }
        self.probs[off]
    }

    /// Marginal over the listed axes, kept in ascending axis order.
    pub fn marginal(&self, keep: &[usize]) -> JointPmf {
        let mut axes: Vec<usize> = keep.to_vec();
        axes.sort_unstable();
        axes.dedup();
        let out_supports: Vec<usize> = axes.iter().map(|&a| self.supports[a]).collect();
        let mut out = vec![0.0; out_supports.iter().product()];
        let mut idx = vec![0usize; self.supports.len()];
        for &p in &self.probs {
            let mut off = 0;
            for &a in &axes {
                off = off * self.supports[a] + idx[a];
            }
            out[off] += p;
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.supports[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        JointPmf {
            supports: out_supports,
            probs: out,
        }
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }
}

/// `-Σ p log₂ p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
    h.max(0.0)
}

/// I(X;Y) of a two-way table.
pub fn mutual_information(p: &JointPmf) -> Result<f64> {
    if p.ndim() != 2 {
        return Err(Error::InvalidPmf("mutual information needs a two-way table".into()));
    }
    Ok(p.marginal(&[0]).entropy() + p.marginal(&[1]).entropy() - p.entropy())
}

/// I(X;Y|Z) of a three-way table over (x, y, z).
pub fn classical_cmi(q: &JointPmf) -> Result<f64> {
    if q.ndim() != 3 {
        return Err(Error::InvalidPmf("conditional mutual information needs a three-way table".into()));
    }
    Ok(q.marginal(&[0, 2]).entropy() + q.marginal(&[1, 2]).entropy() - q.marginal(&[2]).entropy() - q.entropy())
}

/// q(z | x, y) stored row-major over (x, y, z); each (x, y) row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    r: usize,
    m: usize,
    n: usize,
    probs: Vec<f64>,
}

impl ConditionalTable {
    pub fn new(r: usize, m: usize, n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != r * m * n || n == 0 {
            return Err(Error::InvalidPmf(format!(
                "{} entries for a {r}x{m}x{n} conditional",
                probs.len()
            )));
        }
        for (cell, row) in probs.chunks(n).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidPmf(format!("row {cell} is not a distribution")));
            }
        }
        Ok(Self { r, m, n, probs })
    }

    pub fn uniform(r: usize, m: usize, n: usize) -> Self {
        Self {
            r,
            m,
            n,
            probs: vec![1.0 / n as f64; r * m * n],
        }
    }

    /// Each row drawn as `n` independent uniform(0,1) variates, normalized.
    pub fn random(r: usize, m: usize, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probs = Vec::with_capacity(r * m * n);
        for _ in 0..r * m {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                probs.extend(row.iter().map(|v| v / s));
            } else {
                probs.extend(std::iter::repeat_n(1.0 / n as f64, n));
            }
        }
        Self { r, m, n, probs }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.r, self.m, self.n)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// q(x,y,z) = q(z|x,y) p(x,y).
    pub fn joint(&self, p: &JointPmf) -> JointPmf {
        let n = self.n;
        let probs = self
            .probs
            .chunks(n)
            .zip(p.probs())
            .flat_map(|(row, &pxy)| row.iter().map(move |&c| c * pxy))
            .collect();
        JointPmf {
            supports: vec![self.r, self.m, n],
            probs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub dim_z: usize,
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.dim_z == 0 || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }
}

fn check_pair(p: &JointPmf) -> Result<(usize, usize)> {
    if p.ndim() != 2 {
        return Err(Error::InvalidPmf("expected a two-way table p(x,y)".into()));
    }
    Ok((p.supports[0], p.supports[1]))
}

/// One application of the update map `q(z|x,y) ∝ q(z|x) q(z|y) q(z)^(β-1)`.
pub fn update_conditional(p: &JointPmf, cond: &ConditionalTable, beta: f64) -> ConditionalTable {
    let (r, m, n) = cond.dims();
    let q = cond.joint(p);
    let qxz = q.marginal(&[0, 2]);
    let qyz = q.marginal(&[1, 2]);
    let qz = q.marginal(&[2]);
    let px = p.marginal(&[0]);
    let py = p.marginal(&[1]);

    let zx: Vec<f64> = (0..r * n)
        .map(|i| {
            let x = i / n;
            if px.probs[x] > 0.0 {
                qxz.probs[i] / px.probs[x]
            } else {
                0.0
            }
        })
        .collect();
    let zy: Vec<f64> = (0..m * n)
        .map(|i| {
            let y = i / n;
            if py.probs[y] > 0.0 {
                qyz.probs[i] / py.probs[y]
            } else {
                0.0
            }
        })
        .collect();
    let denom: Vec<f64> = qz.probs.iter().map(|&v| v.powf(1.0 - beta).max(DIV_FLOOR)).collect();

    let mut out = vec![0.0; r * m * n];
    for x in 0..r {
        for y in 0..m {
            let row = &mut out[(x * m + y) * n..(x * m + y + 1) * n];
            if p.probs[x * m + y] > 0.0 {
                for z in 0..n {
                    row[z] = zx[x * n + z] * zy[y * n + z] / denom[z];
                }
                let f: f64 = row.iter().sum();
                if f > 0.0 && f.is_finite() {
                    row.iter_mut().for_each(|v| *v /= f);
                    continue;
                }
            }
            row.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        }
    }
    ConditionalTable { r, m, n, probs: out }
}

/// Runs `params.iterations` updates and returns the final joint q(x,y,z).
pub fn latent_search(p: &JointPmf, params: &SearchParams, init: Option<&ConditionalTable>) -> Result<JointPmf> {
    latent_search_observed(p, params, init, |_, _| {})
}

/// As [`latent_search`], calling `observer(i, q_i)` for every formed joint,
/// i = 0 for the initial one through i = N for the returned one.
pub fn latent_search_observed(
    p: &JointPmf,
    params: &SearchParams,
    init: Option<&ConditionalTable>,
    mut observer: impl FnMut(usize, &JointPmf),
) -> Result<JointPmf> {
    params.validate()?;
    let (r, m) = check_pair(p)?;
    let n = params.dim_z;
    let mut cond = match init {
        Some(c) => {
            if c.dims() != (r, m, n) {
                return Err(Error::DimensionMismatch(format!(
                    "initial conditional {:?} does not match ({r},{m},{n})",
                    c.dims()
                )));
            }
            c.clone()
        }
        None => ConditionalTable::random(r, m, n, params.seed),
    };
    for i in 0..params.iterations {
        observer(i, &cond.joint(p));
        cond = update_conditional(p, &cond, params.beta);
    }
    let q = cond.joint(p);
    observer(params.iterations, &q);
    Ok(q)
}

/// Runs one search per β (times `restarts`) and applies the latent-graph
/// decision rule with θ = α·min(H(X), H(Y)).
#[allow(clippy::too_many_arguments)]
pub fn infer_graph(
    p: &JointPmf,
    threshold: f64,
    alpha: f64,
    betas: &[f64],
    iterations: usize,
    dim_z: usize,
    seed: u64,
) -> Result<Verdict> {
    let runs = trade_off(p, betas, iterations, dim_z, seed, 1)?;
    Ok(decide(runs, theta_for(p, alpha)?, threshold))
}

pub fn theta_for(p: &JointPmf, alpha: f64) -> Result<f64> {
    check_pair(p)?;
    Ok(alpha * p.marginal(&[0]).entropy().min(p.marginal(&[1]).entropy()))
}

/// Final (β, I(X;Y|Z), H(Z)) for every β and restart, in β-major order.
pub fn trade_off(
    p: &JointPmf,
    betas: &[f64],
    iterations: usize,
    dim_z: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<BetaRun>> {
    if betas.is_empty() || restarts == 0 {
        return Err(Error::InvalidParameter("need at least one β and one restart".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..betas.len())
        .flat_map(|b| (0..restarts).map(move |r| (b, r)))
        .collect();
    jobs.par_iter()
        .map(|&(b, r)| {
            let params = SearchParams {
                beta: betas[b],
                iterations,
                seed: derive_seed(seed, &[b as u64, r as u64]),
                dim_z,
            };
            let q = latent_search(p, &params, None)?;
            Ok(BetaRun {
                beta: betas[b],
                restart: r,
                cmi: classical_cmi(&q)?,
                entropy_z: q.marginal(&[2]).entropy(),
            })
        })
        .collect()
}
