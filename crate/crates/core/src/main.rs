use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fcm_wave::assembly::count_dofs;
use fcm_wave::harness::{self, RunConfig};
use fcm_wave::linalg::mm;
use fcm_wave::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "fcm-wave", version, about = "Immersed spectral and B-spline wave propagation benchmark")]
struct Cli {
    /// JSON run configuration (benchmark defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Power-iteration seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for assembly (ignored by `timing`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single simulation: signals CSV and report JSON.
    Run,
    /// Boundary-fitted reference signals (desk-scale defaults without --config).
    Reference,
    /// Print the critical time step.
    Dtcrit,
    /// Print the number of DOFs.
    Dofs,
    /// Convergence study over `n_e_list`.
    Converge,
    /// Timing study; the configuration may be an array of runs.
    Timing,
    /// Write M, K and the spatial load as MatrixMarket files.
    ExportMatrices,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn reference_for(cfg: &RunConfig) -> Result<harness::SignalMatrix> {
    match harness::load_reference(cfg)? {
        Some(r) => Ok(r),
        None => {
            log::warn!("no reference_signals given; computing the desk-scale reference");
            let r = RunConfig { seed: cfg.seed, ..RunConfig::desk_reference() };
            harness::reference_run(&r)
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    if let (Some(n), false) = (cli.threads, matches!(cli.command, Command::Timing)) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Run => {
            let cfg = load_config(cli)?;
            let reference = harness::load_reference(&cfg)?;
            let (sig, report) = harness::run_benchmark(&cfg, reference.as_ref())?;
            sig.write_csv(create(&cli.out, "signals.csv")?)?;
            serde_json::to_writer_pretty(create(&cli.out, "report.json")?, &report)?;
            println!("n_dof {} dt {:e} n_t {} error {}", report.n_dof, report.dt_used, report.n_t, report.error.map_or("-".into(), |e| format!("{e:e}")));
        }
        Command::Reference => {
            let cfg = match &cli.config {
                Some(_) => load_config(cli)?,
                None => RunConfig { seed: cli.seed.unwrap_or(0), ..RunConfig::desk_reference() },
            };
            let sig = harness::reference_run(&cfg)?;
            sig.write_csv(create(&cli.out, "reference.csv")?)?;
            println!("wrote {} samples of {} observers", sig.n_s(), sig.n_p());
        }
        Command::Dtcrit => {
            let cfg = load_config(cli)?;
            match harness::prepare(&cfg)?.dt_crit()? {
                Some(dt) => println!("{dt:e}"),
                None => println!("inf"),
            }
        }
        Command::Dofs => {
            let cfg = load_config(cli)?;
            println!("{}", count_dofs(&cfg.grid()?));
        }
        Command::Converge => {
            let cfg = load_config(cli)?;
            let reference = reference_for(&cfg)?;
            let rows = harness::convergence_study(&cfg, Some(&reference))?;
            harness::write_rows(create(&cli.out, "convergence.csv")?, &rows)?;
            for r in &rows {
                println!("n_e {} n_dof {} error {}", r.n_e, r.n_dof, r.error.map_or("-".into(), |e| format!("{e:e}")));
            }
        }
        Command::Timing => {
            if cli.threads.is_some() {
                log::warn!("--threads is ignored in timing mode; timing runs are single-threaded");
                eprintln!("warning: --threads is ignored in timing mode");
            }
            let mut configs = match &cli.config {
                Some(p) => RunConfig::load_set(p)?,
                None => vec![RunConfig::default()],
            };
            if let Some(s) = cli.seed {
                configs.iter_mut().for_each(|c| c.seed = s);
            }
            let reference = match configs.iter().find(|c| c.reference_signals.is_some()) {
                Some(c) => harness::load_reference(c)?,
                None => None,
            };
            let study = harness::timing_study(&configs, reference.as_ref())?;
            harness::write_rows(create(&cli.out, "timing.csv")?, &study.rows)?;
            harness::write_rows(create(&cli.out, "timing_runs.csv")?, &study.runs)?;
            for (r, det) in study.rows.iter().zip(&study.deterministic) {
                println!("{} t_fact {:e} t_rhs {:e} t_binsert {:e} deterministic {det}", r.method, r.t_fact, r.t_rhs, r.t_binsert);
            }
        }
        Command::ExportMatrices => {
            let cfg = load_config(cli)?;
            let prep = harness::prepare(&cfg)?;
            mm::write_matrix(create(&cli.out, "M.mtx")?, &prep.system.m)?;
            mm::write_matrix(create(&cli.out, "K.mtx")?, &prep.system.k)?;
            mm::write_vector(create(&cli.out, "F.mtx")?, &prep.f_s)?;
            println!("wrote M, K and F for {} DOFs", prep.system.n_dof);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
