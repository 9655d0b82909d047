#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use qconfound::classical::{theta_for, trade_off};
use qconfound::io::{self, Input, Versioned, VerdictRecord};
use qconfound::models::rotate_to_pmf;
use qconfound::quantum::{q_theta, q_trade_off, SweepRuns, UpdateRule};
use qconfound::states::from_pmf_diagonal;
use qconfound::sweep::{build_model, render_text, run_sweep, ModelParams, Profile};
use qconfound::verdict::{decide, open_interval_grid, BetaRun, Verdict};
use qconfound::{Amplitudes, DensityMatrix, Engine, Error, JointPmf, ModelKind, Result, SweepConfig, SystemLayout};

#[derive(Parser, Debug)]
#[command(
    name = "qconfound",
    version,
    about = "Latent-confounder discovery for probability tables and density matrices"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the states (and table) of one model instance.
    Channel(ChannelArgs),
    /// Run the latent-graph inference on a matrix or PMF file.
    Infer(InferArgs),
    /// Sweep a model over its error-probability grid.
    Sweep(SweepArgs),
    /// Write the (β, I_Q, S(Z)) curve of a state.
    Tradeoff(TradeoffArgs),
    /// Convert a two-party state to a PMF in its marginal eigenbases.
    Rotate(RotateArgs),
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_prob(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// bsc2-latent, bsc2-direct, gqsc-latent, gqsc-direct, depol-latent or depol-direct.
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,

    /// Mixture weight of the first component.
    #[arg(long, value_parser = parse_prob)]
    q: Option<f64>,

    /// Amplitude γ; repeat for the second mixture component.
    #[arg(long)]
    gamma: Vec<f64>,

    /// Amplitude λ; repeat for the second mixture component.
    #[arg(long)]
    lambda: Vec<f64>,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::default_for(self.model);
        if let Some(q) = self.q {
            p.q = q;
        }
        if self.gamma.len() != self.lambda.len() {
            return Err(Error::InvalidParameter("--gamma and --lambda must be given the same number of times".into()));
        }
        for (i, (&g, &l)) in self.gamma.iter().zip(&self.lambda).enumerate() {
            let a = Amplitudes::new(g, l)?;
            if i < p.amplitudes.len() {
                p.amplitudes[i] = a;
            } else {
                p.amplitudes.push(a);
            }
        }
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.7)]
    beta_lo: f64,
    #[arg(long, default_value_t = 0.8)]
    beta_hi: f64,
    /// Points strictly inside (beta-lo, beta-hi).
    #[arg(long, default_value_t = 50)]
    beta_count: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Latent dimension (default: the smaller observed dimension).
    #[arg(long)]
    dim_z: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts per β.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Experimental: symmetrized quantum update.
    #[arg(long)]
    symmetrized: bool,
}

impl SearchArgs {
    fn betas(&self) -> Result<Vec<f64>> {
        if !(self.beta_lo < self.beta_hi) || self.beta_count == 0 {
            return Err(Error::InvalidParameter(format!(
                "need beta-lo < beta-hi and beta-count ≥ 1, got ({}, {}) × {}",
                self.beta_lo, self.beta_hi, self.beta_count
            )));
        }
        Ok(open_interval_grid(self.beta_lo, self.beta_hi, self.beta_count))
    }

    fn rule(&self) -> UpdateRule {
        if self.symmetrized {
            UpdateRule::Symmetrized
        } else {
            UpdateRule::Ordered
        }
    }
}

#[derive(Args, Debug)]
struct ChannelArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Error probability of a direct model.
    #[arg(long, value_parser = parse_prob)]
    p: Option<f64>,
    #[arg(long, value_parser = parse_prob)]
    p1: Option<f64>,
    #[arg(long, value_parser = parse_prob)]
    p2: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Matrix or PMF file.
    input: PathBuf,
    #[arg(long, value_parser = parse_engine, default_value = "quantum")]
    engine: Engine,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// CMI threshold (default 0.05 quantum, 0.001 classical).
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    search: SearchArgs,
    /// Write the record here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_engine, default_value = "quantum")]
    engine: Engine,
    /// 5×5 subgrid, 20 β, N = 200.
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    /// Full grids and iteration counts.
    #[arg(long)]
    full: bool,
    /// α values; repeatable.
    #[arg(long)]
    alpha: Vec<f64>,
    /// Comma-separated error-probability grid.
    #[arg(long, value_delimiter = ',', value_parser = parse_prob)]
    p_grid: Vec<f64>,
    #[arg(long)]
    beta_lo: Option<f64>,
    #[arg(long)]
    beta_hi: Option<f64>,
    #[arg(long)]
    beta_count: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    dim_z: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    /// Experimental: symmetrized quantum update.
    #[arg(long)]
    symmetrized: bool,
    /// Record the wall-clock time in the grid file.
    #[arg(long)]
    timestamp: bool,
    /// Grid file (JSON); the text table goes next to it with a .txt extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TradeoffArgs {
    /// Matrix or PMF file; a PMF is embedded as a diagonal state.
    input: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// CSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RotateArgs {
    /// Two-party matrix file.
    input: PathBuf,
    /// PMF output.
    #[arg(long)]
    out: PathBuf,
}

fn xy_state(p: &JointPmf) -> Result<DensityMatrix> {
    let s = p.supports();
    if s.len() != 2 {
        return Err(Error::InvalidPmf(format!("expected a two-variable table, got supports {s:?}")));
    }
    from_pmf_diagonal(p, SystemLayout::new([("X", s[0]), ("Y", s[1])])?)
}

fn state_dim_z(rho: &DensityMatrix) -> Result<usize> {
    let dims = rho.layout().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidLayout(format!("expected a two-factor state, got dims {dims:?}")));
    }
    Ok(dims[0].min(dims[1]))
}

fn quantum_runs(rho: &DensityMatrix, s: &SearchArgs) -> Result<Vec<BetaRun>> {
    let runs = SweepRuns {
        iterations: s.iters,
        dim_z: match s.dim_z {
            Some(n) => n,
            None => state_dim_z(rho)?,
        },
        restarts: s.restarts,
        rule: s.rule(),
    };
    q_trade_off(rho, &s.betas()?, &runs, s.seed)
}

fn classical_runs(p: &JointPmf, s: &SearchArgs) -> Result<Vec<BetaRun>> {
    let sup = p.supports();
    let dim_z = s.dim_z.unwrap_or_else(|| sup.iter().copied().min().unwrap_or(1));
    trade_off(p, &s.betas()?, s.iters, dim_z, s.seed, s.restarts)
}

fn infer(a: &InferArgs) -> Result<()> {
    let threshold = a.threshold.unwrap_or(a.engine.default_threshold());
    let verdict: Verdict = match (a.engine, io::read_input(&a.input)?) {
        (Engine::Quantum, input) => {
            let rho = match input {
                Input::State(r) => r,
                Input::Pmf(p) => xy_state(&p)?,
            };
            decide(quantum_runs(&rho, &a.search)?, q_theta(&rho, a.alpha)?, threshold)
        }
        (Engine::Classical, Input::Pmf(p)) => {
            decide(classical_runs(&p, &a.search)?, theta_for(&p, a.alpha)?, threshold)
        }
        (Engine::Classical, Input::State(_)) => {
            return Err(Error::InvalidParameter(
                "the classical engine needs a PMF file; use rotate-then-classical for states".into(),
            ))
        }
        (Engine::RotateThenClassical, input) => {
            let rho = match input {
                Input::State(r) => r,
                Input::Pmf(p) => xy_state(&p)?,
            };
            let rot = rotate_to_pmf(&rho)?;
            if rot.degenerate {
                eprintln!("warning: degenerate marginal spectrum; the rotated table is not unique");
            }
            decide(classical_runs(&rot.pmf, &a.search)?, theta_for(&rot.pmf, a.alpha)?, threshold)
        }
    };
    let record = Versioned::new(VerdictRecord::from(&verdict));
    match &a.out {
        Some(path) => io::write_json(path, &record),
        None => {
            print!("{}", io::to_json(&record));
            Ok(())
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn channel(a: &ChannelArgs) -> Result<()> {
    let model = a.model.model;
    let (p1, p2) = if model.is_latent() {
        if a.p.is_some() {
            return Err(Error::InvalidParameter(format!("{model} takes --p1 and --p2, not --p")));
        }
        match (a.p1, a.p2) {
            (Some(p1), Some(p2)) => (p1, p2),
            _ => return Err(Error::InvalidParameter(format!("{model} needs --p1 and --p2"))),
        }
    } else {
        if a.p1.is_some() || a.p2.is_some() {
            return Err(Error::InvalidParameter(format!("{model} takes --p, not --p1/--p2")));
        }
        let p = a.p.ok_or_else(|| Error::InvalidParameter(format!("{model} needs --p")))?;
        (p, 0.0)
    };
    let inst = build_model(model, &a.model.params()?, p1, p2)?;
    create_dir(&a.out)?;
    let path = a.out.join("rho_xy.json");
    io::write_state(&path, &inst.rho_xy)?;
    println!("{}", path.display());
    if let Some(zxy) = &inst.rho_zxy {
        let path = a.out.join("rho_zxy.json");
        io::write_state(&path, zxy)?;
        println!("{}", path.display());
    }
    if let Some(pmf) = &inst.pmf {
        let path = a.out.join("pmf.json");
        io::write_pmf(&path, pmf)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let model = a.model.model;
    let profile = if a.fast {
        Profile::Fast
    } else if a.full {
        Profile::Full
    } else {
        SweepConfig::default_profile(model, a.engine)
    };
    let mut c = SweepConfig::new(model, a.engine, profile);
    c.params = a.model.params()?;
    c.seed = a.seed;
    if !a.alpha.is_empty() {
        c.alphas = a.alpha.clone();
    }
    if !a.p_grid.is_empty() {
        c.p_grid = a.p_grid.clone();
    }
    c.beta_lo = a.beta_lo.unwrap_or(c.beta_lo);
    c.beta_hi = a.beta_hi.unwrap_or(c.beta_hi);
    c.beta_count = a.beta_count.unwrap_or(c.beta_count);
    c.iterations = a.iters.unwrap_or(c.iterations);
    c.dim_z = a.dim_z.unwrap_or(c.dim_z);
    c.threshold = a.threshold.unwrap_or(c.threshold);
    c.restarts = a.restarts.unwrap_or(c.restarts);
    if a.symmetrized {
        c.rule = UpdateRule::Symmetrized;
    }
    let mut grid = run_sweep(&c)?;
    if a.timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        grid.timestamp = Some(format!("unix:{secs}"));
    }
    io::write_json(&a.out, &grid)?;
    let text = render_text(&grid);
    let txt = a.out.with_extension("txt");
    std::fs::write(&txt, &text).map_err(|source| Error::Io {
        path: txt.display().to_string(),
        source,
    })?;
    print!("{text}");
    let failed: usize = grid
        .tables
        .first()
        .map(|t| t.cells.iter().flatten().filter(|c| c.error.is_some()).count())
        .unwrap_or(0);
    if failed > 0 {
        eprintln!("warning: {failed} cell(s) failed; see the error fields in {}", a.out.display());
    }
    Ok(())
}

fn tradeoff(a: &TradeoffArgs) -> Result<()> {
    let rho = match io::read_input(&a.input)? {
        Input::State(r) => r,
        Input::Pmf(p) => xy_state(&p)?,
    };
    let runs = quantum_runs(&rho, &a.search)?;
    io::write_curve(&a.out, &runs)
}

fn rotate(a: &RotateArgs) -> Result<()> {
    let rho = io::read_state(&a.input)?;
    let rot = rotate_to_pmf(&rho)?;
    if rot.degenerate {
        eprintln!("warning: degenerate marginal spectrum; the rotated table is not unique");
    }
    io::write_pmf(&a.out, &rot.pmf)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        3
    } else if e.is_numeric() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Channel(a) => channel(a),
        Command::Infer(a) => infer(a),
        Command::Sweep(a) => sweep(a),
        Command::Tradeoff(a) => tradeoff(a),
        Command::Rotate(a) => rotate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
