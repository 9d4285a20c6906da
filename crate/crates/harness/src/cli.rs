//! `fracfold` command line. Flags override the config file; `--out`
//! overrides `FRACFOLD_OUT`, which overrides the config's output dir.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracfold::continuation::{fold_round, multiplicity_scan, trace_minimal, Branch};
use fracfold::linalg::{sup_distance, sup_norm};
use fracfold::singular::{solve_min, solve_pure_singular};
use fracfold::{assemble_operator, build_grid, Nonlinearity, NonlocalOperator};
use serde::Serialize;

use crate::artifacts::{branch_csv, export_plot_data, export_profile, multiplicity_csv, write_atomic, write_json, GridJson, SolutionJson};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::oracle::getoor_solution;
use crate::suite::{verify_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "fracfold", version, about = "Singular fractional problems on an interval: solves, branches, verification")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Power of `u^p`; 0 drops the nonlinearity.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub half_width: Option<f64>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "FRACFOLD_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble the operator and check its structure against the torsion oracle.
    AssembleCheck {
        /// Write the matrix as `i j value` triplets.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Pure singular solve `A u = λ K u^{-δ}`.
    SolvePs,
    /// Minimal solution of the full problem at `--lambda`.
    SolvePlambda,
    /// Minimal branch and its continuation through the fold.
    Branch,
    /// Fold location and bending coefficients.
    Fold,
    /// Second solutions on the upper segment.
    Multiplicity,
    /// Run verification suites.
    Verify {
        /// Comma separated suite names, or `all`.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
}

impl Common {
    /// Resolves the effective configuration.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        set!(s, delta, beta, p, lambda, n, half_width, seed);
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn say(path: &Path, summary: impl std::fmt::Display) {
    println!("{}: {summary}", path.display());
}

fn operator(cfg: &RunConfig) -> Result<NonlocalOperator> {
    Ok(assemble_operator(&build_grid(cfg.half_width, cfg.n)?, cfg.s)?)
}

#[derive(Serialize)]
struct OperatorJson {
    grid: GridJson,
    s: f64,
    normalization: f64,
    norm_inf: f64,
    min_diagonal: f64,
    max_offdiagonal: f64,
    asymmetry: f64,
    min_row_sum: f64,
    principal_eigenvalue: f64,
    /// Relative sup error of the torsion function against the Getoor
    /// profile; only on `L = 1`.
    torsion_error: Option<f64>,
}

fn assemble_check(cfg: &RunConfig, dump: Option<&Path>) -> Result<()> {
    let op = operator(cfg)?;
    let a = op.matrix();
    let n = op.len();
    let mut min_diag = f64::INFINITY;
    let mut max_off = f64::NEG_INFINITY;
    let mut asym: f64 = 0.0;
    let mut min_row = f64::INFINITY;
    for i in 0..n {
        min_diag = min_diag.min(a[(i, i)]);
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)];
            if i != j {
                max_off = max_off.max(a[(i, j)]);
            }
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
        min_row = min_row.min(row);
    }
    let torsion_error = if cfg.half_width == 1.0 {
        let w = op.torsion()?;
        let exact: Vec<f64> = op.grid().nodes().iter().map(|x| getoor_solution(cfg.s, *x)).collect();
        Some(sup_distance(&w, &exact) / sup_norm(&exact))
    } else {
        None
    };
    let report = OperatorJson {
        grid: GridJson {
            half_width: cfg.half_width,
            n,
        },
        s: cfg.s,
        normalization: op.normalization(),
        norm_inf: op.norm_inf(),
        min_diagonal: min_diag,
        max_offdiagonal: max_off,
        asymmetry: asym,
        min_row_sum: min_row,
        principal_eigenvalue: op.principal()?.value,
        torsion_error,
    };
    let path = cfg.out.join("operator.json");
    write_json(&path, &report)?;
    let structure = if min_diag > 0.0 && max_off <= 0.0 && asym == 0.0 && min_row > 0.0 {
        "M-matrix structure ok"
    } else {
        "M-matrix structure VIOLATED"
    };
    match torsion_error {
        Some(e) => say(&path, format!("n={n}, s={}, {structure}, torsion error {e:.3e}", cfg.s)),
        None => say(&path, format!("n={n}, s={}, {structure}", cfg.s)),
    }
    if let Some(dump) = dump {
        let mut bytes = Vec::new();
        op.dump_triplets(&mut bytes).map_err(|e| HarnessError::io(dump, e))?;
        write_atomic(dump, &bytes)?;
        say(dump, format!("{} triplets", n * n));
    }
    Ok(())
}

fn solve_ps(cfg: &RunConfig) -> Result<()> {
    let op = operator(cfg)?;
    let spec = cfg.problem()?.with_nonlinearity(Nonlinearity::None)?;
    let u = solve_pure_singular(&spec, &op, &cfg.solver())?;
    let path = cfg.out.join("solution_ps.json");
    write_json(&path, &SolutionJson::new(&u, op.grid()))?;
    let alpha = u.report.as_ref().and_then(|r| r.fitted_exponent);
    say(
        &path,
        format!(
            "sup {:.6e}, residual {:.2e}, fitted exponent {}",
            u.sup_norm(),
            u.residual,
            alpha.map_or("n/a".into(), |a| format!("{a:.4}"))
        ),
    );
    let prof = export_profile(&u, op.grid(), &cfg.out, "profile_ps.dat")?;
    say(&prof, format!("{} boundary profile rows", op.len().div_ceil(2)));
    Ok(())
}

fn solve_plambda(cfg: &RunConfig) -> Result<()> {
    let op = operator(cfg)?;
    let u = solve_min(cfg.lambda, &cfg.problem()?, &op, &cfg.solver())?;
    let path = cfg.out.join("solution_plambda.json");
    write_json(&path, &SolutionJson::new(&u, op.grid()))?;
    say(&path, format!("lambda {}, sup {:.6e}, residual {:.2e}", cfg.lambda, u.sup_norm(), u.residual));
    Ok(())
}

fn rounded_branch(cfg: &RunConfig, op: &NonlocalOperator) -> Result<Branch> {
    let spec = cfg.problem()?;
    let (policy, opts) = (cfg.policy(), cfg.solver());
    let traced = trace_minimal(&spec, op, &policy, &opts)?;
    Ok(fold_round(&traced, op, &spec, &policy, &opts)?)
}

fn write_branch(cfg: &RunConfig, branch: &Branch) -> Result<()> {
    let path = cfg.out.join("branch.csv");
    write_atomic(&path, branch_csv(branch).as_bytes())?;
    let minimal = branch.minimal().count();
    say(
        &path,
        format!(
            "{} points ({minimal} minimal), Lambda in [{:.6}, {:.6}]",
            branch.points.len(),
            branch.bracket.map_or(f64::NAN, |b| b.0),
            branch.bracket.map_or(f64::NAN, |b| b.1)
        ),
    );
    let dia = export_plot_data(branch, &cfg.out)?;
    say(&dia, "lambda vs sup-norm diagram");
    Ok(())
}

#[derive(Serialize)]
struct FoldJson {
    lambda_estimate: f64,
    bracket: (f64, f64),
    quadratic_coeff: f64,
    normalized_slope: f64,
    lambda_max: f64,
    fit_residual: f64,
    sup_norm: f64,
}

fn fold(cfg: &RunConfig) -> Result<()> {
    let op = operator(cfg)?;
    let branch = rounded_branch(cfg, &op)?;
    write_branch(cfg, &branch)?;
    let f = branch
        .fold
        .as_ref()
        .ok_or_else(|| HarnessError::Refused("continuation did not locate a fold".into()))?;
    let path = cfg.out.join("fold.json");
    write_json(
        &path,
        &FoldJson {
            lambda_estimate: f.lambda_estimate,
            bracket: f.bracket,
            quadratic_coeff: f.quadratic_coeff,
            normalized_slope: f.normalized_slope,
            lambda_max: f.lambda_max,
            fit_residual: f.fit_residual,
            sup_norm: f.u_at_fold.sup_norm(),
        },
    )?;
    say(
        &path,
        format!(
            "Lambda {:.6}, lambda'' {:.4e}, normalized lambda' {:.2e}",
            f.lambda_estimate, f.quadratic_coeff, f.normalized_slope
        ),
    );
    let sol = cfg.out.join("solution_fold.json");
    write_json(&sol, &SolutionJson::new(&f.u_at_fold, op.grid()))?;
    say(&sol, format!("sup {:.6e}", f.u_at_fold.sup_norm()));
    Ok(())
}

fn multiplicity(cfg: &RunConfig) -> Result<()> {
    let op = operator(cfg)?;
    let branch = rounded_branch(cfg, &op)?;
    let est = branch
        .lambda_estimate()
        .ok_or_else(|| HarnessError::Refused("branch carries no Lambda bracket".into()))?;
    let targets: Vec<f64> = cfg.multiplicity_fractions.iter().map(|f| f * est).collect();
    let rows = multiplicity_scan(&cfg.problem()?, &op, &branch, &targets, &cfg.solver())?;
    let path = cfg.out.join("multiplicity.csv");
    write_atomic(&path, multiplicity_csv(&rows).as_bytes())?;
    let distinct = rows.iter().filter(|r| r.distinct).count();
    say(&path, format!("{} targets, {distinct} with two distinct solutions", rows.len()));
    Ok(())
}

fn verify(cfg: &RunConfig, suites: &[String]) -> Result<bool> {
    let chosen = if suites.is_empty() { &cfg.suites } else { suites };
    let suites = Suite::parse_list(chosen)?;
    let report = verify_suite(cfg, &suites);
    let path = cfg.out.join("verification.json");
    write_json(&path, &report)?;
    let failed = report.failures().count();
    say(&path, format!("{} records, {failed} failed, seed {}", report.records.len(), report.seed));
    let table = cfg.out.join("verification.txt");
    write_atomic(&table, report.table().as_bytes())?;
    say(&table, "human-readable table");
    Ok(report.passed())
}

/// Exit status: 0 on success, 1 on usage or runtime error, 2 when a
/// verification record fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let out = cli.common.resolve().and_then(|cfg| match &cli.command {
        Command::AssembleCheck { dump_matrix } => assemble_check(&cfg, dump_matrix.as_deref()).map(|_| true),
        Command::SolvePs => solve_ps(&cfg).map(|_| true),
        Command::SolvePlambda => solve_plambda(&cfg).map(|_| true),
        Command::Branch => {
            let op = operator(&cfg)?;
            write_branch(&cfg, &rounded_branch(&cfg, &op)?).map(|_| true)
        }
        Command::Fold => fold(&cfg).map(|_| true),
        Command::Multiplicity => multiplicity(&cfg).map(|_| true),
        Command::Verify { suite } => verify(&cfg, suite),
    });
    match out {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("fracfold: {e}");
            1
        }
    }
}
