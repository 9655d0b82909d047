//! Decision rule shared by the classical and quantum inference drivers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    Latent,
    TriangleOrDirect,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Latent => "Latent",
            GraphKind::TriangleOrDirect => "TriangleOrDirect",
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one search run at a given β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaRun {
    pub beta: f64,
    #[serde(default)]
    pub restart: usize,
    /// I(X;Y|Z) achieved by the final iterate, in bits.
    pub cmi: f64,
    /// Entropy of the latent marginal, in bits.
    pub entropy_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: GraphKind,
    /// Smallest latent entropy among qualifying runs.
    pub min_entropy_z: Option<f64>,
    /// Indices into `per_beta` of runs with cmi ≤ threshold.
    pub qualifying: Vec<usize>,
    pub per_beta: Vec<BetaRun>,
    pub theta: f64,
    pub threshold: f64,
}

impl Verdict {
    /// The qualifying run with the smallest latent entropy.
    pub fn best_run(&self) -> Option<&BetaRun> {
        self.qualifying
            .iter()
            .map(|&i| &self.per_beta[i])
            .min_by(|a, b| a.entropy_z.total_cmp(&b.entropy_z))
    }
}

/// Latent iff some run reaches cmi ≤ `threshold` and the least latent
/// entropy among those is ≤ `theta` (equality counts as Latent).
pub fn decide(per_beta: Vec<BetaRun>, theta: f64, threshold: f64) -> Verdict {
    let qualifying: Vec<usize> = per_beta
        .iter()
        .enumerate()
        .filter(|(_, r)| r.cmi <= threshold)
        .map(|(i, _)| i)
        .collect();
    let min_entropy_z = qualifying
        .iter()
        .map(|&i| per_beta[i].entropy_z)
        .min_by(|a, b| a.total_cmp(b));
    let kind = match min_entropy_z {
        Some(h) if h <= theta => GraphKind::Latent,
        _ => GraphKind::TriangleOrDirect,
    };
    Verdict {
        kind,
        min_entropy_z,
        qualifying,
        per_beta,
        theta,
        threshold,
    }
}

/// `count` points strictly inside `(lo, hi)`, evenly spaced and excluding
/// both endpoints.
pub fn open_interval_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64)
        .collect()
}
