use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patchflow::presets::PRESET_NAMES;
use patchflow_cli::config::parse_config_at;
use patchflow_cli::output::Output;
use patchflow_cli::suite::{run_check, run_config, run_preset};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "sim", version, about = "Tumor growth with nutrient: simulations and checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory (SIM_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a TOML configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named preset with its assertions.
    Preset {
        name: String,
        /// Cells per side.
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Stand-alone checks: ctransform, obstacle, master, contraction.
    Check {
        mode: String,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn out_dir(flag: Option<PathBuf>, configured: Option<PathBuf>, default: &str) -> PathBuf {
    if let Some(dir) = std::env::var_os("SIM_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    flag.or(configured).unwrap_or_else(|| Path::new("sim-out").join(default))
}

fn set_threads(n: Option<usize>) -> Result<(), String> {
    match n {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string()),
        None => Ok(()),
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

fn finish(out: &Output, result: patchflow::Result<()>) -> ExitCode {
    match result {
        Ok(()) => match out.finish() {
            Ok(true) => {
                eprintln!("all checks passed; artifacts in {}", out.dir().display());
                ExitCode::from(PASS)
            }
            Ok(false) => {
                eprintln!("assertion failure; see {}", out.dir().join("summary.jsonl").display());
                ExitCode::from(FAIL)
            }
            Err(e) => usage(e),
        },
        Err(patchflow::Error::InvalidParameter(m)) => usage(m),
        Err(e) => {
            eprintln!("run failed: {e}");
            let _ = out.finish();
            ExitCode::from(FAIL)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { PASS });
        }
    };
    match cli.cmd {
        Cmd::Run { config, common } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return usage(format!("{}: {e}", config.display())),
            };
            let base = config.parent().unwrap_or(Path::new("."));
            let cfg = match parse_config_at(&text, base) {
                Ok(c) => c,
                Err(e) => return usage(e),
            };
            if let Err(e) = set_threads(common.threads) {
                return usage(e);
            }
            let stem = config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            let dir = out_dir(common.out, cfg.out_dir.clone().map(|d| base.join(d)), &stem);
            let mut out = match Output::create(&dir) {
                Ok(o) => o,
                Err(e) => return usage(format!("{}: {e}", dir.display())),
            };
            let r = run_config(&cfg, &mut out);
            finish(&out, r)
        }
        Cmd::Preset { name, n, common } => {
            if !PRESET_NAMES.contains(&name.as_str()) {
                return usage(format!("unknown preset `{name}`; known presets: {}", PRESET_NAMES.join(", ")));
            }
            if let Err(e) = set_threads(common.threads) {
                return usage(e);
            }
            let dir = out_dir(common.out, None, &name);
            let mut out = match Output::create(&dir) {
                Ok(o) => o,
                Err(e) => return usage(format!("{}: {e}", dir.display())),
            };
            let r = run_preset(&name, n, &mut out);
            finish(&out, r)
        }
        Cmd::Check { mode, n, common } => {
            if let Err(e) = set_threads(common.threads) {
                return usage(e);
            }
            let dir = out_dir(common.out, None, &format!("check-{mode}"));
            let mut out = match Output::create(&dir) {
                Ok(o) => o,
                Err(e) => return usage(format!("{}: {e}", dir.display())),
            };
            let r = run_check(&mode, n, &mut out);
            finish(&out, r)
        }
    }
}
