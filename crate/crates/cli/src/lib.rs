//! Scenario runner for `thirdkind`: INI configuration, artifact
//! formats, and the property suites.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod output;
pub mod scenarios;
pub mod suites;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use config::{Command, ConfigError, ScenarioConfig};
use scenarios::{run_scenario, ScenarioError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "THIRDKIND_OUT";

/// Output directory: `--out`, then `[output] directory`, then
/// `$THIRDKIND_OUT`, then `./out`.
pub fn output_dir(cli_out: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    resolve_output_dir(cli_out, cfg, std::env::var_os(OUT_ENV).map(PathBuf::from))
}

/// [`output_dir`] with the environment value passed in.
pub fn resolve_output_dir(cli_out: Option<&Path>, cfg: &ScenarioConfig, env: Option<PathBuf>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.clone())
        .or(env)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Loads the configuration, runs the command and writes `summary.json`.
/// Returns the process exit status.
pub fn run(command: Command, config_path: &Path, overrides: &[String], cli_out: Option<&Path>) -> i32 {
    let cfg = match ScenarioConfig::load(command, config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            report_config_error(&e);
            return EXIT_CONFIG;
        }
    };
    let out = output_dir(cli_out, &cfg);
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_FAILURE;
    }
    log::info!("running {} into {}", command.as_str(), out.display());
    let (status, passed, error, results) = match run_scenario(&cfg, &out) {
        Ok(o) => (if o.passed { "pass" } else { "fail" }, o.passed, None, o.results),
        Err(ScenarioError::Numerical { error, partial }) => {
            ("numerical_failure", false, Some(error.to_string()), partial)
        }
        Err(ScenarioError::Io(e)) => ("io_failure", false, Some(e.to_string()), Value::Null),
    };
    let summary = json!({
        "command": command.as_str(),
        "status": status,
        "passed": passed,
        "error": error,
        "results": results,
        "config": cfg.to_json(),
    });
    let written = output::write_json(&out.join("summary.json"), &summary)
        .and_then(|_| std::fs::write(out.join("resolved.ini"), cfg.to_ini()));
    if let Err(e) = written {
        eprintln!("error: cannot write summary: {e}");
        return EXIT_FAILURE;
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    println!("{}: {status}", command.as_str());
    if passed {
        EXIT_PASS
    } else {
        EXIT_FAILURE
    }
}

fn report_config_error(e: &ConfigError) {
    eprintln!("config error: {e}");
}
