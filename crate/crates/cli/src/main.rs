use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mltsr_core::harness::experiments::{
    decomp_sweep, noisy_mse, phase_transition, DecompSweepConfig, NoisyConfig, PhaseConfig,
};
use mltsr_core::json::{DecomposeInputDto, DecompositionDto, ObservationDto, SuperresOutputDto};
use mltsr_core::linalg::hermitian_eig_desc;
use mltsr_core::mapp::{decompose_auto, low_rank_factor, mapp_recursive, mapp_search};
use mltsr_core::sequence::mlt_matrix;
use mltsr_core::superres::{
    conv_relax, lift_shape, retrieve_and_check, rwtm, AdmmConfig, RetrieveOptions, RwtmConfig,
};

#[derive(Parser)]
#[command(
    name = "mltsr",
    version,
    about = "Multilevel Toeplitz decomposition and gridless super-resolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vandermonde-decompose a PSD multilevel Toeplitz matrix
    Decompose(DecomposeArgs),
    /// Recover a sparse frequency model from partial linear samples
    Superres(SuperresArgs),
    /// Seeded Monte Carlo studies, written as CSV
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input JSON {shape, matrix|sequence|model}; '-' reads stdin
    input: PathBuf,
    /// Grid sizes, comma separated; overrides the input's shape field
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    /// Model order, when known
    #[arg(long)]
    rank: Option<usize>,
    /// Relative eigenvalue tolerance for rank decisions
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Recursive,
    Search,
    Auto,
}

#[derive(Args)]
struct SuperresArgs {
    /// Observation JSON {shape, mask|linear_map, measurements, eta2}; '-' reads stdin
    #[arg(long)]
    obs: PathBuf,
    /// Lift every grid dimension to at least this size
    #[arg(long, default_value_t = 0)]
    rbar: usize,
    #[arg(long, value_enum, default_value_t = Method::Rwtm)]
    method: Method,
    /// Override the observation's squared noise ball radius
    #[arg(long)]
    eta2: Option<f64>,
    /// Solver relative tolerance
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Solver iteration cap per solve
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Reweighting iteration cap
    #[arg(long, default_value_t = 20)]
    max_outer: usize,
    /// Accepted for interface stability; solves are deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Convrelax,
    Rwtm,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Decomposition accuracy over a sweep of model orders
    Decomp(BenchArgs),
    /// Success-rate map over (order, separation) cells
    Phase(BenchArgs),
    /// Frequency MSE of the noisy three-atom study
    Noisy(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// JSON config; defaults apply for missing fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the core count
    #[arg(long)]
    parallel: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Decompose(args) => decompose(args),
        Command::Superres(args) => superres(args),
        Command::Bench(cmd) => bench(cmd),
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn decompose(args: DecomposeArgs) -> Result<ExitCode> {
    let mut dto: DecomposeInputDto = serde_json::from_str(&read_input(&args.input)?)
        .context("parsing decompose input JSON")?;
    if let Some(sizes) = args.shape {
        dto.shape = sizes;
    }
    let (shape, t) = dto.into_parts()?;
    let dec = match args.mode {
        Mode::Recursive => mapp_recursive(&t, &shape, args.tol)?,
        Mode::Search => {
            let r = match args.rank {
                Some(r) => r,
                None => low_rank_factor(&t, &shape, None, args.tol)?.1.rank,
            };
            mapp_search(&t, &shape, r, args.tol)?
        }
        Mode::Auto => decompose_auto(&t, &shape, args.rank, args.tol)?,
    };
    let mut text = serde_json::to_string_pretty(&DecompositionDto::from_decomposition(&dec))?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn superres(args: SuperresArgs) -> Result<ExitCode> {
    let dto: ObservationDto =
        serde_json::from_str(&read_input(&args.obs)?).context("parsing observation JSON")?;
    let mut obs = dto.into_observation()?;
    if let Some(e2) = args.eta2 {
        if e2 < 0.0 {
            bail!("--eta2 must be >= 0");
        }
        obs.noise_bound = e2.sqrt();
    }
    let lifted = lift_shape(&obs.shape, args.rbar)?;
    let admm = AdmmConfig { max_iters: args.max_iters, tol: args.tol, ..AdmmConfig::default() };

    let (sol, iterate_eigenvalues) = match args.method {
        Method::Convrelax => {
            let sol = conv_relax(&obs, &lifted, &admm)?;
            let (eigs, _) = hermitian_eig_desc(&mlt_matrix(&sol.u))?;
            (sol, vec![eigs.to_vec()])
        }
        Method::Rwtm => {
            let cfg = RwtmConfig { max_outer: args.max_outer, admm, ..RwtmConfig::default() };
            let res = rwtm(&obs, &lifted, &cfg)?;
            let eigs = res.iterates.iter().map(|it| it.eigenvalues.clone()).collect();
            (res.solution, eigs)
        }
    };
    let ret = retrieve_and_check(&sol, &lifted, &RetrieveOptions::default())?;
    let mut text =
        serde_json::to_string_pretty(&SuperresOutputDto::new(&sol, &ret, iterate_eigenvalues))?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => serde_json::from_str(&read_input(p)?)
            .with_context(|| format!("parsing config {}", p.display())),
        None => Ok(T::default()),
    }
}

fn in_pool<T: Send>(parallel: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match parallel {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn emit_csv(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> mltsr_core::Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write(&mut f)?;
            Ok(())
        }
        None => {
            let mut stdout = io::stdout();
            write(&mut stdout)?;
            Ok(())
        }
    }
}

fn finish(kind: &str, violations: Vec<String>) -> ExitCode {
    if violations.is_empty() {
        eprintln!("{kind}: all thresholds met");
        ExitCode::SUCCESS
    } else {
        for v in &violations {
            eprintln!("{kind}: {v}");
        }
        ExitCode::FAILURE
    }
}

fn bench(cmd: BenchCommand) -> Result<ExitCode> {
    match cmd {
        BenchCommand::Decomp(args) => {
            let mut cfg: DecompSweepConfig = load_config(args.config.as_deref())?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            let report = in_pool(args.parallel, || decomp_sweep(&cfg))??;
            emit_csv(args.out.as_deref(), |w| report.write_csv(w))?;
            for c in &report.cells {
                eprintln!(
                    "r={}: success {:.1}%, residual<1e-6 {:.1}%, degenerate {}",
                    c.r,
                    100.0 * c.success_rate,
                    100.0 * c.residual_ok_rate,
                    c.degenerate
                );
            }
            Ok(finish("decomp", report.check()))
        }
        BenchCommand::Phase(args) => {
            let mut cfg: PhaseConfig = load_config(args.config.as_deref())?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            let report = in_pool(args.parallel, || phase_transition(&cfg))??;
            emit_csv(args.out.as_deref(), |w| report.write_csv(w))?;
            for c in &report.cells {
                eprintln!(
                    "r={} delta_f={}: convrelax {}/{}, rwtm {}/{}, gen_failed {}",
                    c.r, c.delta_f, c.convrelax_successes, c.trials, c.rwtm_successes, c.trials,
                    c.gen_failed
                );
            }
            Ok(finish("phase", report.check()))
        }
        BenchCommand::Noisy(args) => {
            let mut cfg: NoisyConfig = load_config(args.config.as_deref())?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            let report = in_pool(args.parallel, || noisy_mse(&cfg))??;
            emit_csv(args.out.as_deref(), |w| report.write_csv(w))?;
            for c in &report.cells {
                let delta = c
                    .delta_db
                    .map(|d| format!(", {d:+.2} dB vs full"))
                    .unwrap_or_default();
                eprintln!(
                    "n={} frac={}: freq MSE {:.3e} ({:.2} dB){}",
                    c.n, c.frac, c.freq_mse, c.freq_mse_db, delta
                );
            }
            Ok(finish("noisy", report.check()))
        }
    }
}
