use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hemigrasp_core::control::AutonomyProfile;
use hemigrasp_core::hand::{builtin_hand, load_hand_file, HandModel};
use hemigrasp_service::bench::{bench_perturb, bench_run, desk_objects, load_objects, BenchConfig, BenchObject, Policy};
use hemigrasp_service::server::{serve, ServeConfig};

#[derive(Parser)]
#[command(name = "hemigrasp", version, about = "Hemisphere-constrained grasp planning service and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory with `scenes/*.toml` and `hands/*.toml`.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Directory for the trial log.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Planner threads per plan; defaults to the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Headless benchmarks.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Write the five desk objects as OBJ files into a directory.
    ExportObjects { dir: PathBuf },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// `top_down`, `random_upper`, or a JSON-lines file of client frames.
    #[arg(long, default_value = "top_down")]
    policy: String,
    /// Autonomy profile: `planned`, `sc_only` or `manual`.
    #[arg(long, default_value = "planned")]
    mode: AutonomyProfile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; the trial log and timings go next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Built-in hand name or hand file.
    #[arg(long, default_value = "three_finger")]
    hand: String,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Randomized trials over every mesh in a directory.
    Run {
        #[arg(long)]
        objects: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Plan on perturbed copies of one mesh, judge on the original.
    Perturb {
        #[arg(long)]
        object: PathBuf,
        /// Comma-separated noise levels in millimetres.
        #[arg(long, value_delimiter = ',', default_value = "0,2,5,10")]
        sigmas: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_hand(arg: &str) -> Result<HandModel, String> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "toml") {
        load_hand_file(path).map_err(|e| e.to_string())
    } else {
        builtin_hand(arg).map_err(|e| e.to_string())
    }
}

fn config(c: &Common) -> Result<BenchConfig, String> {
    let policy = Policy::parse(&c.policy).map_err(|e| e.to_string())?;
    let mut cfg = BenchConfig::new(load_hand(&c.hand)?, policy, c.mode, c.trials, c.seed);
    cfg.workers = c.workers.unwrap_or_else(default_workers).max(1);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Serve {
            port,
            host,
            assets,
            log_dir,
            workers,
        } => {
            let config = ServeConfig {
                addr: SocketAddr::new(host, port),
                assets,
                log_dir,
                workers: workers.unwrap_or_else(default_workers),
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(serve(config)).map_err(|e| e.to_string())
        }
        Command::Bench {
            command: BenchCommand::Run { objects, common },
        } => {
            let cfg = config(&common)?;
            let objects = load_objects(&objects).map_err(|e| e.to_string())?;
            let report = bench_run(&objects, &cfg).map_err(|e| e.to_string())?;
            report.write(&common.out).map_err(|e| e.to_string())?;
            let o = report.overall();
            println!(
                "{} trials, trial success {:.3}, planner success {:.3}",
                o.trials, o.trial_success_rate, o.planner_success_rate
            );
            Ok(())
        }
        Command::Bench {
            command: BenchCommand::Perturb { object, sigmas, common },
        } => {
            let cfg = config(&common)?;
            let mesh = hemigrasp_core::geometry::TriMesh::load(&object).map_err(|e| e.to_string())?;
            let id = object.file_stem().and_then(|s| s.to_str()).unwrap_or("object");
            let object = BenchObject::new(id, mesh).map_err(|e| e.to_string())?;
            let report = bench_perturb(&object, &sigmas, &cfg).map_err(|e| e.to_string())?;
            report.write(&common.out).map_err(|e| e.to_string())?;
            for r in &report.rows {
                println!("sigma {} mm: iou {:.4}, success {}/{}", r.sigma_mm, r.iou, r.successes, r.trials);
            }
            Ok(())
        }
        Command::ExportObjects { dir } => {
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            for (name, mesh) in desk_objects() {
                mesh.save_obj(&dir.join(format!("{name}.obj"))).map_err(|e| e.to_string())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
