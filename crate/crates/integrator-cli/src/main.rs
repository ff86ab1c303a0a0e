//! intlab: batch experiments on the local times of Gaussian integrators.
//!
//! Every subcommand resolves its knobs the same way (preset, then config
//! file, then flags), computes fully in memory, and only then writes: a
//! failed run leaves no partial output. The first line of every CSV names
//! the tool version, the hash of the canonical physics config, and the
//! seed, which together pin the bytes that follow.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration or I/O error.

mod config;
mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{need, need_ref, ExperimentConfig};
use integrator_lab::local_time::{mc_selfoverlap, occupation_density, Bins};
use integrator_lab::moments::{lt_convergence_experiment, second_moment_exact};
use integrator_lab::noise::sample_noise_stream;
use integrator_lab::path::integrator_path;
use integrator_lab::selfx::{classify_limit, et2_1d_exact, et2_planar_exact, mc_t2_conditional};
use integrator_lab::suites::run_verify_suites;
use integrator_lab::{Error as LabError, GridSpec, KernelTable, L2Operator, VerifyReport};
use output::{provenance_line, CsvDoc};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "intlab", version, about = "Gaussian integrator local-time experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Knobs shared by every experiment. Flags override the config file,
/// which overrides the preset.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML config file; unknown keys are errors, and its `subcommand`
    /// key, if set, must match the invoked subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named defaults bundle (available: desk).
    #[arg(long)]
    preset: Option<String>,
    /// Master seed for every stochastic stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of grid cells.
    #[arg(long)]
    grid: Option<u64>,
    /// Smoothing bandwidth.
    #[arg(long)]
    eps: Option<f64>,
    /// Monte Carlo replicate count.
    #[arg(long)]
    reps: Option<u64>,
    /// Quadrature refinement level (default 2).
    #[arg(long)]
    refinement: Option<u32>,
    /// Driving operator: identity | mult:v1,v2,... | volterra:c |
    /// perturb:e (default identity).
    #[arg(long)]
    operator: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the resolved canonical config here after a successful run.
    #[arg(long, value_name = "FILE")]
    emit_config: Option<PathBuf>,
    /// Size of the worker pool (default: all cores). Outputs do not
    /// depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            grid: self.grid,
            operator: self.operator.clone(),
            eps: self.eps,
            reps: self.reps,
            seed: self.seed,
            refinement: self.refinement,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample paths, or their binned occupation densities with --bins.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Bin width for occupation densities; 0 picks a width from the
        /// path range. Omit to emit raw paths.
        #[arg(long)]
        bins: Option<f64>,
    },
    /// Run the analytic check suites and report worst margins.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Integrated squared local time: quadrature vs Monte Carlo.
    LtMoments {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mean-square local-time distance along a perturbation sequence.
    LtConverge {
        #[command(flatten)]
        common: CommonArgs,
        /// Sequence indices, comma separated (e.g. 1,2,4,8).
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<u64>>,
        /// Largest singular value of the perturbing kernel (default 0.5).
        #[arg(long)]
        kscale: Option<f64>,
    },
    /// Scalar pair-mass functional at fixed endpoints.
    #[command(name = "selfx-1d")]
    Selfx1d {
        #[command(flatten)]
        common: CommonArgs,
        /// Endpoints, comma separated.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        /// Moment order for the Monte Carlo column (default 1).
        #[arg(long)]
        p: Option<u32>,
        /// Add Monte Carlo columns (needs grid, eps, reps, seed).
        #[arg(long)]
        mc: bool,
    },
    /// Planar pair-mass functional with separation exponent alpha.
    SelfxPlanar {
        #[command(flatten)]
        common: CommonArgs,
        /// Endpoint norms, comma separated.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        /// Separation exponent.
        #[arg(long)]
        alpha: Option<f64>,
        /// Moment order for the Monte Carlo column (default 1).
        #[arg(long)]
        p: Option<u32>,
        /// Add Monte Carlo columns (needs grid, eps, reps, seed).
        #[arg(long)]
        mc: bool,
    },
    /// Split an output CSV into gnuplot-ready two-column series.
    Plotdata {
        /// CSV produced by another subcommand.
        input: PathBuf,
        /// Name of the x column (default: the first column).
        #[arg(long)]
        x: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { common, bins } => {
            let mut flags = common.flags();
            flags.bins = bins;
            let cfg = resolve(&common, "simulate", flags)?;
            let doc = in_pool(&common, || cmd_simulate(&cfg))?;
            deliver(&common, &cfg, &doc, true)?;
            Ok(0)
        }
        Command::Verify { common } => {
            let cfg = resolve(&common, "verify", common.flags())?;
            let (suite, doc) = in_pool(&common, || cmd_verify(&cfg))?;
            println!("{suite}");
            deliver(&common, &cfg, &doc, false)?;
            Ok(if suite.passed() { 0 } else { 1 })
        }
        Command::LtMoments { common } => {
            let cfg = resolve(&common, "lt-moments", common.flags())?;
            let doc = in_pool(&common, || cmd_lt_moments(&cfg))?;
            deliver(&common, &cfg, &doc, true)?;
            Ok(0)
        }
        Command::LtConverge { common, ns, kscale } => {
            let mut flags = common.flags();
            flags.ns = ns;
            flags.kscale = kscale;
            let cfg = resolve(&common, "lt-converge", flags)?;
            let doc = in_pool(&common, || cmd_lt_converge(&cfg))?;
            deliver(&common, &cfg, &doc, true)?;
            Ok(0)
        }
        Command::Selfx1d { common, a, p, mc } => {
            let mut flags = common.flags();
            flags.a = a;
            flags.p = p;
            flags.mc = mc.then_some(true);
            let cfg = resolve(&common, "selfx-1d", flags)?;
            let doc = in_pool(&common, || cmd_selfx_1d(&cfg))?;
            deliver(&common, &cfg, &doc, true)?;
            Ok(0)
        }
        Command::SelfxPlanar { common, a, alpha, p, mc } => {
            let mut flags = common.flags();
            flags.a = a;
            flags.alpha = alpha;
            flags.p = p;
            flags.mc = mc.then_some(true);
            let cfg = resolve(&common, "selfx-planar", flags)?;
            let doc = in_pool(&common, || cmd_selfx_planar(&cfg))?;
            deliver(&common, &cfg, &doc, true)?;
            Ok(0)
        }
        Command::Plotdata { input, x } => {
            for path in cmd_plotdata(&input, x.as_deref())? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn resolve(common: &CommonArgs, subcommand: &str, flags: ExperimentConfig) -> Result<ExperimentConfig> {
    config::resolve(
        subcommand,
        common.preset.as_deref(),
        common.config.as_deref(),
        flags,
    )
}

/// Run `f` inside a pool of the requested size, or on the global pool.
fn in_pool<T: Send>(common: &CommonArgs, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match common.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building worker pool")?
            .install(f),
        None => f(),
    }
}

/// Write the finished document and, last of all, the resolved config.
fn deliver(common: &CommonArgs, cfg: &ExperimentConfig, doc: &CsvDoc, csv_to_stdout: bool) -> Result<()> {
    let text = doc.render();
    match &common.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None if csv_to_stdout => print!("{text}"),
        None => {}
    }
    if let Some(path) = &common.emit_config {
        std::fs::write(path, cfg.canonical_toml()?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn grid_of(cfg: &ExperimentConfig) -> Result<GridSpec> {
    let n = need(cfg.grid, "grid")?;
    Ok(GridSpec::new(n as usize)?)
}

fn operator_of(cfg: &ExperimentConfig, grid: GridSpec) -> Result<L2Operator> {
    build_operator(cfg.operator.as_deref().unwrap_or("identity"), grid)
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {:?} in operator spec", tok.trim()))
        })
        .collect()
}

/// Operator grammar: `identity`, `mult:v1,v2,...` (a step function with
/// the listed values on equal blocks), `volterra:c` (constant kernel c),
/// `perturb:e` (identity plus e times the constant-kernel integral).
fn build_operator(spec: &str, grid: GridSpec) -> Result<L2Operator> {
    if spec == "identity" {
        return Ok(L2Operator::identity(grid));
    }
    if let Some(rest) = spec.strip_prefix("mult:") {
        let vals = parse_f64_list(rest)?;
        if vals.is_empty() {
            bail!("mult: needs at least one value");
        }
        let n = grid.n_cells();
        let k = vals.len();
        if k > n {
            bail!("mult: lists {k} values but the grid has only {n} cells");
        }
        let coeffs: Vec<f64> = (0..n).map(|i| vals[i * k / n]).collect();
        return Ok(L2Operator::multiplication(grid, &coeffs)?);
    }
    if let Some(rest) = spec.strip_prefix("volterra:") {
        let c: f64 = rest
            .trim()
            .parse()
            .with_context(|| format!("bad kernel constant {:?}", rest.trim()))?;
        let kernel = KernelTable::constant(grid.n_cells(), c);
        return Ok(L2Operator::volterra(grid, &kernel)?);
    }
    if let Some(rest) = spec.strip_prefix("perturb:") {
        let e: f64 = rest
            .trim()
            .parse()
            .with_context(|| format!("bad perturbation size {:?}", rest.trim()))?;
        let kernel = KernelTable::constant(grid.n_cells(), 1.0);
        let k = L2Operator::volterra(grid, &kernel)?;
        return Ok(L2Operator::perturbation(&k, e));
    }
    bail!("unknown operator {spec:?} (grammar: identity | mult:v1,... | volterra:c | perturb:e)")
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<CsvDoc> {
    let grid = grid_of(cfg)?;
    let op = operator_of(cfg, grid)?;
    let reps = need(cfg.reps, "reps")?;
    let seed = need(cfg.seed, "seed")?;
    let paths = (0..reps)
        .map(|r| integrator_path(&op, &sample_noise_stream(grid, seed, "simulate", r)))
        .collect::<integrator_lab::Result<Vec<_>>>()?;
    let prov = provenance_line(cfg)?;
    match cfg.bins {
        None => {
            let mut header = String::from("t");
            for r in 0..reps {
                header.push_str(&format!(",path_{r}"));
            }
            let mut doc = CsvDoc::new(prov, &header);
            for k in 0..=grid.n_cells() {
                let mut cells = vec![grid.node(k).to_string()];
                cells.extend(paths.iter().map(|p| p.values()[k].to_string()));
                doc.push_row(&cells);
            }
            Ok(doc)
        }
        Some(w) => {
            let rule = if w == 0.0 { Bins::Auto } else { Bins::Width(w) };
            let mut doc = CsvDoc::new(prov, "rep,u,density");
            for (r, path) in paths.iter().enumerate() {
                let est = occupation_density(path, rule)?;
                for (u, v) in est.u_grid.iter().zip(&est.values) {
                    doc.push_row(&[r.to_string(), u.to_string(), v.to_string()]);
                }
            }
            Ok(doc)
        }
    }
}

fn cmd_verify(cfg: &ExperimentConfig) -> Result<(integrator_lab::SuiteResult, CsvDoc)> {
    let seed = need(cfg.seed, "seed")?;
    let suite = run_verify_suites(seed);
    let mut doc = CsvDoc::new(provenance_line(cfg)?, VerifyReport::CSV_HEADER);
    for report in &suite.reports {
        doc.push_raw(report.csv_row());
    }
    Ok((suite, doc))
}

fn cmd_lt_moments(cfg: &ExperimentConfig) -> Result<CsvDoc> {
    let grid = grid_of(cfg)?;
    let op = operator_of(cfg, grid)?;
    let eps = need(cfg.eps, "eps")?;
    let reps = need(cfg.reps, "reps")?;
    let seed = need(cfg.seed, "seed")?;
    let refinement = cfg.refinement.unwrap_or(2);
    let quad = second_moment_exact(&op, refinement)?;
    let (mean, se) = mc_selfoverlap(&op, eps, reps, seed)?;
    let mut doc = CsvDoc::new(
        provenance_line(cfg)?,
        "n,exact_value,mc_mean,mc_se,refinement_error",
    );
    doc.push_row(&[
        grid.n_cells().to_string(),
        quad.value.to_string(),
        mean.to_string(),
        se.to_string(),
        quad.error_estimate.to_string(),
    ]);
    Ok(doc)
}

fn cmd_lt_converge(cfg: &ExperimentConfig) -> Result<CsvDoc> {
    let grid = grid_of(cfg)?;
    let ns = need_ref(&cfg.ns, "ns")?;
    if ns.is_empty() {
        bail!("ns must list at least one sequence index");
    }
    if ns.iter().any(|&n| n == 0) {
        bail!("sequence indices start at 1");
    }
    if !ns.windows(2).all(|w| w[0] < w[1]) {
        bail!("ns must be strictly increasing");
    }
    let kscale = cfg.kscale.unwrap_or(0.5);
    if !(kscale > 0.0) {
        bail!("kscale must be positive, got {kscale}");
    }
    let refinement = cfg.refinement.unwrap_or(2);
    let kernel = KernelTable::constant(grid.n_cells(), 1.0);
    let v = L2Operator::volterra(grid, &kernel)?;
    let (_, smax) = v.sigma_extremes();
    let scale = kscale / smax;
    let id = L2Operator::identity(grid);
    let run = lt_convergence_experiment(
        |n| Ok(L2Operator::perturbation(&v, scale / n as f64)),
        &id,
        ns,
        refinement,
    )?;
    // the experiment is meaningful only while 1/sigma_min stays bounded
    // along the sequence; surface the measured sup rather than assuming it
    eprintln!(
        "sup 1/sigma_min over the sequence: {}",
        run.sup_inverse_norm
    );
    let mut doc = CsvDoc::new(
        provenance_line(cfg)?,
        "n,exact_value,mc_mean,mc_se,refinement_error",
    );
    for point in &run.points {
        doc.push_row(&[
            point.n.to_string(),
            point.value.to_string(),
            String::new(),
            String::new(),
            point.error_estimate.to_string(),
        ]);
    }
    Ok(doc)
}

fn mc_cells(cfg: &ExperimentConfig, a: &[f64], p: u32, alpha: Option<f64>) -> Result<(String, String)> {
    let grid = grid_of(cfg)?;
    let eps = need(cfg.eps, "eps")?;
    let reps = need(cfg.reps, "reps")?;
    let seed = need(cfg.seed, "seed")?;
    let (mean, se) = mc_t2_conditional(grid, a, p, alpha, eps, reps, seed)?;
    Ok((mean.to_string(), se.to_string()))
}

const SELFX_HEADER: &str = "a,alpha,exact,mc_mean,mc_se,classification";

fn cmd_selfx_1d(cfg: &ExperimentConfig) -> Result<CsvDoc> {
    let a_list = need_ref(&cfg.a, "a")?;
    if a_list.is_empty() {
        bail!("a must list at least one endpoint");
    }
    let p = cfg.p.unwrap_or(1);
    let refinement = cfg.refinement.unwrap_or(2);
    let mc_on = cfg.mc.unwrap_or(false);
    let mut doc = CsvDoc::new(provenance_line(cfg)?, SELFX_HEADER);
    for &a in a_list {
        // the quadrature covers the first moment only; higher orders get
        // a Monte Carlo column and an empty exact cell
        let exact = if p == 1 {
            et2_1d_exact(a, refinement)?.to_string()
        } else {
            String::new()
        };
        let (mean, se) = if mc_on {
            mc_cells(cfg, &[a], p, None)?
        } else {
            (String::new(), String::new())
        };
        doc.push_row(&[a.to_string(), String::new(), exact, mean, se, String::new()]);
    }
    Ok(doc)
}

fn cmd_selfx_planar(cfg: &ExperimentConfig) -> Result<CsvDoc> {
    let a_list = need_ref(&cfg.a, "a")?;
    if a_list.is_empty() {
        bail!("a must list at least one endpoint norm");
    }
    let alpha = need(cfg.alpha, "alpha")?;
    let p = cfg.p.unwrap_or(1);
    let refinement = cfg.refinement.unwrap_or(2);
    let mc_on = cfg.mc.unwrap_or(false);
    // a sweep too short or too narrow for trend reading is not an error
    // for the row-wise values; the classification cell just stays empty
    let classification = match classify_limit(alpha, a_list) {
        Ok(verdict) => verdict.classified_limit.to_string(),
        Err(LabError::Invalid(_)) => String::new(),
        Err(e) => return Err(e.into()),
    };
    let mut doc = CsvDoc::new(provenance_line(cfg)?, SELFX_HEADER);
    for &a in a_list {
        let exact = if p == 1 {
            et2_planar_exact(a, alpha, refinement)?.to_string()
        } else {
            String::new()
        };
        let (mean, se) = if mc_on {
            // values depend on the endpoint only through its norm, so
            // the probe endpoint sits on the first axis
            mc_cells(cfg, &[a, 0.0], p, Some(alpha))?
        } else {
            (String::new(), String::new())
        };
        doc.push_row(&[
            a.to_string(),
            alpha.to_string(),
            exact,
            mean,
            se,
            classification.clone(),
        ]);
    }
    Ok(doc)
}

fn cmd_plotdata(input: &Path, x: Option<&str>) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let parsed = output::parse_csv(&text)?;
    let series = output::plot_series(&parsed, x)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let dir = input.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut written = Vec::new();
    for s in series {
        let path = dir.join(format!("{stem}.{}_vs_{}.dat", s.y_name, s.x_name));
        std::fs::write(&path, &s.content)
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_grammar_expands_step_values_over_the_grid() {
        let grid = GridSpec::new(8).unwrap();
        assert!(build_operator("identity", grid).is_ok());
        assert!(build_operator("mult:1,2", grid).is_ok());
        assert!(build_operator("volterra:0.5", grid).is_ok());
        assert!(build_operator("perturb:0.1", grid).is_ok());
        assert!(build_operator("spectral:2", grid).is_err());
        assert!(build_operator("mult:", grid).is_err());
        assert!(build_operator("mult:1,2,3,4,5,6,7,8,9", grid).is_err());
    }

    #[test]
    fn step_expansion_assigns_equal_blocks() {
        let grid = GridSpec::new(8).unwrap();
        let op = build_operator("mult:2,3", grid).unwrap();
        let m = second_moment_exact(&op, 0);
        // smoke use of the operator; block layout checked via its action
        assert!(m.is_ok());
    }
}
