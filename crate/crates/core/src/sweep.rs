//! Grid sweeps over the channel models: one inference per grid cell, cells
//! computed independently from per-cell seeds.
//!
//! Latent models sweep (p1, p2) and produce one table per α. Direct models
//! sweep p and produce a single table with one row per α. The β runs of a
//! cell do not depend on α, so they are computed once and every α reuses
//! them.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{theta_for, trade_off, JointPmf};
use crate::error::{Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::models::{
    bsc2_direct, bsc2_latent, depolarizing_direct, depolarizing_latent, gqsc_direct, gqsc_latent, rotate_to_pmf,
    Amplitudes,
};
use crate::quantum::{q_theta, q_trade_off, SweepRuns, UpdateRule};
use crate::seeds::derive_seed;
use crate::states::DensityMatrix;
use crate::verdict::{decide, open_interval_grid, BetaRun, GraphKind};

/// The standard 11-point error-probability grid.
pub const P_GRID: [f64; 11] = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];
/// The 5-point subgrid of the fast profile.
pub const FAST_P_GRID: [f64; 5] = [0.01, 0.3, 0.5, 0.7, 0.99];
pub const ALPHAS: [f64; 4] = [0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Bsc2Latent,
    Bsc2Direct,
    GqscLatent,
    GqscDirect,
    DepolLatent,
    DepolDirect,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Bsc2Latent,
        ModelKind::Bsc2Direct,
        ModelKind::GqscLatent,
        ModelKind::GqscDirect,
        ModelKind::DepolLatent,
        ModelKind::DepolDirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bsc2Latent => "bsc2-latent",
            ModelKind::Bsc2Direct => "bsc2-direct",
            ModelKind::GqscLatent => "gqsc-latent",
            ModelKind::GqscDirect => "gqsc-direct",
            ModelKind::DepolLatent => "depol-latent",
            ModelKind::DepolDirect => "depol-direct",
        }
    }

    pub fn is_latent(self) -> bool {
        matches!(self, ModelKind::Bsc2Latent | ModelKind::GqscLatent | ModelKind::DepolLatent)
    }

    /// The verdict a correct inference returns for this model.
    pub fn truth(self) -> GraphKind {
        if self.is_latent() {
            GraphKind::Latent
        } else {
            GraphKind::TriangleOrDirect
        }
    }

    /// Size of the latent alphabet the model was built with.
    pub fn natural_dim_z(self) -> usize {
        match self {
            ModelKind::Bsc2Latent | ModelKind::Bsc2Direct => 4,
            _ => 2,
        }
    }

    pub fn has_pmf(self) -> bool {
        matches!(self, ModelKind::Bsc2Latent | ModelKind::Bsc2Direct)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Quantum,
    Classical,
    RotateThenClassical,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Quantum => "quantum",
            Engine::Classical => "classical",
            Engine::RotateThenClassical => "rotate-then-classical",
        }
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            Engine::Quantum => 0.05,
            Engine::Classical | Engine::RotateThenClassical => 0.001,
        }
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Engine::Quantum, Engine::Classical, Engine::RotateThenClassical]
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown engine `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 5×5 subgrid, 20 β, N = 200.
    Fast,
    /// Full grids and iteration counts.
    Full,
}

/// Mixture weight and amplitudes. The gqsc models use the first pair; the
/// depolarizing models mix the two pairs as `q·ρ^{a1} + (1−q)·ρ^{a2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub amplitudes: Vec<Amplitudes>,
}

impl ModelParams {
    pub fn default_for(model: ModelKind) -> Self {
        let amplitudes = match model {
            ModelKind::Bsc2Latent | ModelKind::Bsc2Direct => vec![],
            ModelKind::GqscLatent | ModelKind::GqscDirect => vec![Amplitudes::balanced()],
            // 0.4·ρ^{0.6,0.8} + 0.6·ρ^{1/√2,1/√2}
            ModelKind::DepolLatent | ModelKind::DepolDirect => {
                vec![Amplitudes::new(0.6, 0.8).expect("unit norm"), Amplitudes::balanced()]
            }
        };
        Self { q: 0.4, amplitudes }
    }

    fn amp(&self, i: usize) -> Result<Amplitudes> {
        self.amplitudes
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("model needs amplitude pair #{}", i + 1)))
    }
}

/// States (and the probability table, when the model has one) of one
/// model instance.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub rho_xy: DensityMatrix,
    pub rho_zxy: Option<DensityMatrix>,
    pub pmf: Option<JointPmf>,
}

/// Builds a model instance. Direct models read `p1` as their single error
/// probability and ignore `p2`.
pub fn build_model(model: ModelKind, params: &ModelParams, p1: f64, p2: f64) -> Result<ModelInstance> {
    let q = params.q;
    Ok(match model {
        ModelKind::Bsc2Latent => {
            let (pmf, rho_xy) = bsc2_latent(q, p1, p2)?;
            ModelInstance {
                rho_xy,
                rho_zxy: None,
                pmf: Some(pmf),
            }
        }
        ModelKind::Bsc2Direct => {
            let (pmf, rho_xy) = bsc2_direct(q, p1)?;
            ModelInstance {
                rho_xy,
                rho_zxy: None,
                pmf: Some(pmf),
            }
        }
        ModelKind::GqscLatent => {
            let (zxy, xy) = gqsc_latent(params.amp(0)?, q, p1, p2)?;
            ModelInstance {
                rho_xy: xy,
                rho_zxy: Some(zxy),
                pmf: None,
            }
        }
        ModelKind::GqscDirect => ModelInstance {
            rho_xy: gqsc_direct(params.amp(0)?, q, p1)?,
            rho_zxy: None,
            pmf: None,
        },
        ModelKind::DepolLatent => {
            let (zxy, xy) = depolarizing_latent(params.amp(0)?, params.amp(1)?, q, p1, p2)?;
            ModelInstance {
                rho_xy: xy,
                rho_zxy: Some(zxy),
                pmf: None,
            }
        }
        ModelKind::DepolDirect => ModelInstance {
            rho_xy: depolarizing_direct(params.amp(0)?, params.amp(1)?, q, p1)?,
            rho_zxy: None,
            pmf: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub engine: Engine,
    pub p_grid: Vec<f64>,
    pub alphas: Vec<f64>,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub beta_count: usize,
    pub iterations: usize,
    pub threshold: f64,
    pub dim_z: usize,
    pub seed: u64,
    pub restarts: usize,
    pub rule: UpdateRule,
    pub params: ModelParams,
}

impl SweepConfig {
    /// Defaults for a model and engine under a profile. β counts follow the
    /// 100 for the 2-bit channel, 50 for the qubit models.
    pub fn new(model: ModelKind, engine: Engine, profile: Profile) -> Self {
        let (p_grid, beta_count, iterations) = match profile {
            Profile::Fast => (FAST_P_GRID.to_vec(), 20, 200),
            Profile::Full => (P_GRID.to_vec(), if model.has_pmf() { 100 } else { 50 }, 500),
        };
        let dim_z = match engine {
            Engine::RotateThenClassical => 2,
            _ => model.natural_dim_z(),
        };
        Self {
            model,
            engine,
            p_grid,
            alphas: ALPHAS.to_vec(),
            beta_lo: 0.7,
            beta_hi: 0.8,
            beta_count,
            iterations,
            threshold: engine.default_threshold(),
            dim_z,
            seed: 0,
            restarts: 1,
            rule: UpdateRule::Ordered,
            params: ModelParams::default_for(model),
        }
    }

    /// The profile used when none is requested: the quantum sweep of the
    /// 2-bit channel works on 64×64 matrices and defaults to the fast
    /// settings; everything else defaults to the full settings.
    pub fn default_profile(model: ModelKind, engine: Engine) -> Profile {
        if model.has_pmf() && engine == Engine::Quantum {
            Profile::Fast
        } else {
            Profile::Full
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        open_interval_grid(self.beta_lo, self.beta_hi, self.beta_count)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.p_grid.is_empty() || self.alphas.is_empty() {
            return bad("p grid and α list must be nonempty".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("grid probability {p} outside [0, 1]"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return bad(format!("α = {a} must be positive"));
        }
        if !(self.beta_lo < self.beta_hi) || !self.beta_lo.is_finite() || !self.beta_hi.is_finite() {
            return bad(format!("β interval ({}, {}) is not ordered", self.beta_lo, self.beta_hi));
        }
        if self.beta_count == 0 || self.iterations == 0 || self.restarts == 0 || self.dim_z == 0 {
            return bad("β count, iterations, restarts and dim_z must be positive".into());
        }
        if !(self.threshold >= 0.0) {
            return bad(format!("threshold {} must be nonnegative", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.params.q) {
            return bad(format!("q = {} outside [0, 1]", self.params.q));
        }
        if self.engine == Engine::Classical && !self.model.has_pmf() {
            return bad(format!(
                "model {} has no probability table; use the quantum or rotate-then-classical engine",
                self.model
            ));
        }
        Ok(())
    }

    /// Rows and columns of the result tables: (p1, p2) for latent models
    /// and (α, p) for direct ones.
    fn input_cells(&self) -> Vec<(usize, usize)> {
        let n = self.p_grid.len();
        if self.model.is_latent() {
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
        } else {
            (0..n).map(|j| (0, j)).collect()
        }
    }
}

/// Runs and verdict inputs of one grid point, shared by every α.
#[derive(Debug, Clone)]
pub struct CellRuns {
    pub runs: Vec<BetaRun>,
    /// min(S(X), S(Y)) of the analysed state or table.
    pub min_marginal_entropy: f64,
    pub warning: Option<String>,
}

/// All β runs for the grid point (p1, p2) with the given cell seed.
pub fn run_cell(config: &SweepConfig, p1: f64, p2: f64, seed: u64) -> Result<CellRuns> {
    let inst = build_model(config.model, &config.params, p1, p2)?;
    let betas = config.betas();
    match config.engine {
        Engine::Quantum => {
            let runs = SweepRuns {
                iterations: config.iterations,
                dim_z: config.dim_z,
                restarts: config.restarts,
                rule: config.rule,
            };
            Ok(CellRuns {
                runs: q_trade_off(&inst.rho_xy, &betas, &runs, seed)?,
                min_marginal_entropy: q_theta(&inst.rho_xy, 1.0)?,
                warning: None,
            })
        }
        Engine::Classical | Engine::RotateThenClassical => {
            let (pmf, warning) = match config.engine {
                Engine::Classical => (
                    inst.pmf
                        .ok_or_else(|| Error::InvalidParameter(format!("model {} has no probability table", config.model)))?,
                    None,
                ),
                _ => {
                    let rot = rotate_to_pmf(&inst.rho_xy)?;
                    let warning = rot
                        .degenerate
                        .then(|| "degenerate marginal spectrum; rotated table is not unique".to_string());
                    (rot.pmf, warning)
                }
            };
            Ok(CellRuns {
                runs: trade_off(&pmf, &betas, config.iterations, config.dim_z, seed, config.restarts)?,
                min_marginal_entropy: theta_for(&pmf, 1.0)?,
                warning,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// None when the cell failed numerically.
    pub verdict: Option<GraphKind>,
    pub min_entropy_z: Option<f64>,
    pub theta: Option<f64>,
    pub qualifying: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl CellSummary {
    /// T when the verdict matches the model's truth.
    pub fn mark(&self, truth: GraphKind) -> char {
        match self.verdict {
            Some(v) if v == truth => 'T',
            Some(_) => 'F',
            None => '!',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    /// Set for latent models, whose tables are per α.
    pub alpha: Option<f64>,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    /// Row-major, `rows.len() × cols.len()`.
    pub cells: Vec<Vec<CellSummary>>,
}

impl GridTable {
    pub fn verdicts(&self) -> Vec<Vec<Option<GraphKind>>> {
        self.cells.iter().map(|r| r.iter().map(|c| c.verdict).collect()).collect()
    }

    pub fn count(&self, kind: GraphKind) -> usize {
        self.cells.iter().flatten().filter(|c| c.verdict == Some(kind)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictGrid {
    pub schema_version: u32,
    pub config: SweepConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
    pub tables: Vec<GridTable>,
}

fn summarize(cell: &std::result::Result<CellRuns, String>, alpha: f64, threshold: f64) -> CellSummary {
    match cell {
        Ok(c) => {
            let v = decide(c.runs.clone(), alpha * c.min_marginal_entropy, threshold);
            CellSummary {
                verdict: Some(v.kind),
                min_entropy_z: v.min_entropy_z,
                theta: Some(v.theta),
                qualifying: v.qualifying.len(),
                warning: c.warning.clone(),
                error: None,
            }
        }
        Err(e) => CellSummary {
            verdict: None,
            min_entropy_z: None,
            theta: None,
            qualifying: 0,
            warning: None,
            error: Some(e.clone()),
        },
    }
}

/// Runs the whole grid. Cell seeds are `derive_seed(seed, [row, col])` and
/// results are placed by index, so the output does not depend on
/// scheduling. Numeric failures are recorded in the failing cell.
pub fn run_sweep(config: &SweepConfig) -> Result<VerdictGrid> {
    config.validate()?;
    let grid = &config.p_grid;
    let cells = config.input_cells();
    let results: Vec<std::result::Result<CellRuns, String>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (p1, p2) = if config.model.is_latent() { (grid[i], grid[j]) } else { (grid[j], 0.0) };
            let seed = derive_seed(config.seed, &[i as u64, j as u64]);
            run_cell(config, p1, p2, seed).map_err(|e| e.to_string())
        })
        .collect();

    let n = grid.len();
    let tables = if config.model.is_latent() {
        config
            .alphas
            .iter()
            .map(|&alpha| GridTable {
                alpha: Some(alpha),
                row_label: "p1".into(),
                col_label: "p2".into(),
                rows: grid.clone(),
                cols: grid.clone(),
                cells: (0..n)
                    .map(|i| (0..n).map(|j| summarize(&results[i * n + j], alpha, config.threshold)).collect())
                    .collect(),
            })
            .collect()
    } else {
        vec![GridTable {
            alpha: None,
            row_label: "alpha".into(),
            col_label: "p".into(),
            rows: config.alphas.clone(),
            cols: grid.clone(),
            cells: config
                .alphas
                .iter()
                .map(|&alpha| results.iter().map(|r| summarize(r, alpha, config.threshold)).collect())
                .collect(),
        }]
    };
    Ok(VerdictGrid {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        timestamp: None,
        tables,
    })
}

/// Aligned T/F rendering, rows p1 and columns p2 (or α and p). `!` marks a failed cell.
pub fn render_text(grid: &VerdictGrid) -> String {
    let truth = grid.config.model.truth();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} via {} (T = {} found)",
        grid.config.model,
        grid.config.engine.as_str(),
        truth
    );
    for t in &grid.tables {
        out.push('\n');
        match t.alpha {
            Some(a) => {
                let _ = writeln!(out, "alpha = {a}  (rows {}, columns {})", t.row_label, t.col_label);
            }
            None => {
                let _ = writeln!(out, "rows {}, columns {}", t.row_label, t.col_label);
            }
        }
        let _ = write!(out, "{:>6}", "");
        for c in &t.cols {
            let _ = write!(out, "{:>6}", c);
        }
        out.push('\n');
        for (r, row) in t.rows.iter().zip(&t.cells) {
            let _ = write!(out, "{:>6}", r);
            for cell in row {
                let _ = write!(out, "{:>6}", cell.mark(truth));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(model: ModelKind, engine: Engine) -> SweepConfig {
        SweepConfig {
            p_grid: vec![0.1, 0.5],
            alphas: vec![0.8, 1.0],
            beta_count: 2,
            iterations: 15,
            seed: 11,
            ..SweepConfig::new(model, engine, Profile::Fast)
        }
    }

    #[test]
    fn names_roundtrip() {
        for m in ModelKind::ALL {
            assert_eq!(m.as_str().parse::<ModelKind>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("bsc3".parse::<ModelKind>().is_err());
        assert_eq!("rotate-then-classical".parse::<Engine>().unwrap(), Engine::RotateThenClassical);
    }

    #[test]
    fn profiles() {
        let fast = SweepConfig::new(ModelKind::Bsc2Latent, Engine::Quantum, Profile::Fast);
        assert_eq!((fast.p_grid.len(), fast.beta_count, fast.iterations), (5, 20, 200));
        let full = SweepConfig::new(ModelKind::Bsc2Latent, Engine::Quantum, Profile::Full);
        assert_eq!((full.p_grid.len(), full.beta_count, full.iterations, full.dim_z), (11, 100, 500, 4));
        let depol = SweepConfig::new(ModelKind::DepolLatent, Engine::Quantum, Profile::Full);
        assert_eq!((depol.beta_count, depol.dim_z, depol.threshold), (50, 2, 0.05));
        assert_eq!(
            SweepConfig::default_profile(ModelKind::Bsc2Latent, Engine::Quantum),
            Profile::Fast
        );
        assert_eq!(
            SweepConfig::default_profile(ModelKind::GqscLatent, Engine::Quantum),
            Profile::Full
        );
    }

    #[test]
    fn default_depol_params_match_table_mixture() {
        let p = ModelParams::default_for(ModelKind::DepolLatent);
        let swapped = ModelParams {
            q: 0.6,
            amplitudes: vec![p.amplitudes[1], p.amplitudes[0]],
        };
        let a = build_model(ModelKind::DepolLatent, &p, 0.2, 0.3).unwrap();
        let b = build_model(ModelKind::DepolLatent, &swapped, 0.2, 0.3).unwrap();
        let diff = crate::qmath::max_abs(&(a.rho_xy.mat() - b.rho_xy.mat()));
        assert!(diff < 1e-15, "{diff}");
    }

    #[test]
    fn validation() {
        let mut c = tiny(ModelKind::GqscLatent, Engine::Quantum);
        assert!(c.validate().is_ok());
        c.beta_hi = c.beta_lo;
        assert!(c.validate().is_err());
        let mut c = tiny(ModelKind::GqscLatent, Engine::Quantum);
        c.p_grid.clear();
        assert!(c.validate().is_err());
        let c = tiny(ModelKind::GqscLatent, Engine::Classical);
        assert!(c.validate().is_err());
        let mut c = tiny(ModelKind::Bsc2Direct, Engine::Classical);
        c.p_grid.push(1.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn latent_grid_shape_and_determinism() {
        let c = tiny(ModelKind::GqscLatent, Engine::Quantum);
        let a = run_sweep(&c).unwrap();
        assert_eq!(a.tables.len(), 2);
        for t in &a.tables {
            assert_eq!(t.cells.len(), 2);
            assert!(t.cells.iter().all(|r| r.len() == 2));
        }
        let b = run_sweep(&c).unwrap();
        assert_eq!(crate::io::to_json(&a), crate::io::to_json(&b));
    }

    #[test]
    fn direct_grid_rows_are_alphas() {
        let c = tiny(ModelKind::Bsc2Direct, Engine::Classical);
        let g = run_sweep(&c).unwrap();
        assert_eq!(g.tables.len(), 1);
        assert_eq!(g.tables[0].rows, vec![0.8, 1.0]);
        assert_eq!(g.tables[0].cells[0].len(), 2);
        let text = render_text(&g);
        assert!(text.contains("rows alpha, columns p"));
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("0.8")).count(), 1);
    }

    #[test]
    fn cell_matches_direct_call() {
        // A cell recomputed on its own gives the same runs as inside the sweep.
        let c = tiny(ModelKind::GqscDirect, Engine::Quantum);
        let g = run_sweep(&c).unwrap();
        let alone = run_cell(&c, c.p_grid[1], 0.0, derive_seed(c.seed, &[0, 1])).unwrap();
        let v = decide(alone.runs, c.alphas[0] * alone.min_marginal_entropy, c.threshold);
        assert_eq!(g.tables[0].cells[0][1].verdict, Some(v.kind));
        assert_eq!(g.tables[0].cells[0][1].min_entropy_z, v.min_entropy_z);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let cell: std::result::Result<CellRuns, String> = Err("boom".into());
        let s = summarize(&cell, 0.8, 0.05);
        assert_eq!(s.verdict, None);
        assert_eq!(s.mark(GraphKind::Latent), '!');
    }
}
