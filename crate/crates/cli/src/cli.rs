//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::Command;
use crate::{run, EXIT_CONFIG, EXIT_PASS};

/// Numerical experiments for the configuration-space gauged functional
/// Schrodinger system.
#[derive(Debug, Parser)]
#[command(name = "thirdkind", version)]
pub struct Cli {
    /// Scenario to run.
    #[arg(value_enum)]
    pub command: Command,
    /// INI configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override one key, e.g. `--set grid.n_phi=64`. May be repeated.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Usage errors are configuration errors.
            return if usage { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    run(cli.command, &cli.config, &cli.set, cli.out.as_deref())
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::{Path, PathBuf};

    use serde_json::Value;
    use tempfile::TempDir;

    use super::main_with_args;
    use crate::config::{Command, ScenarioConfig};
    use crate::resolve_output_dir;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("run.ini");
        fs::write(&p, text).unwrap();
        p
    }

    fn run(cmd: &str, config: &Path, sets: &[&str], out: &Path) -> i32 {
        let mut args: Vec<std::ffi::OsString> = vec!["thirdkind".into(), cmd.into(), "--config".into(), config.into()];
        for s in sets {
            args.push("--set".into());
            args.push((*s).into());
        }
        args.push("--out".into());
        args.push(out.into());
        main_with_args(args)
    }

    fn summary(out: &Path) -> Value {
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
    }

    #[test]
    fn stationary_defaults_converge() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "");
        let out = tmp.path().join("out");
        assert_eq!(run("stationary", &cfg, &[], &out), 0);
        let s = summary(&out);
        assert_eq!(s["status"], "pass");
        let res = s["results"]["state"]["residual_eom"].as_f64().unwrap();
        assert!(res < 1e-6, "residual_eom {res}");
        assert_eq!(s["config"]["grid"]["n_phi"], 128);
        assert_eq!(s["config"]["model"]["length_l"], 100.0);
        for f in [
            "psi.bin",
            "psi.json",
            "a_t.bin",
            "a_t.json",
            "scf_history.csv",
            "resolved.ini",
        ] {
            assert!(out.join(f).exists(), "missing {f}");
        }
    }

    #[test]
    fn array_sidecar_describes_the_binary() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "[grid]\nn_phi = 64\n");
        let out = tmp.path().join("out");
        assert_eq!(run("stationary", &cfg, &[], &out), 0);
        let side: Value = serde_json::from_str(&fs::read_to_string(out.join("psi.json")).unwrap()).unwrap();
        assert_eq!(side["dtype"], "complex128");
        assert_eq!(side["byte_order"], "little");
        assert_eq!(side["shape"], serde_json::json!([64]));
        let bytes = fs::metadata(out.join("psi.bin")).unwrap().len();
        assert_eq!(bytes, 64 * side["width_bytes"].as_u64().unwrap());
    }

    #[test]
    fn unknown_command_exits_one_without_files() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "");
        let out = tmp.path().join("out");
        assert_eq!(run("stationery", &cfg, &[], &out), 1);
        assert!(!out.exists());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(main_with_args(["thirdkind", "--version"]), 0);
        assert_eq!(main_with_args(["thirdkind"]), 1);
    }

    #[test]
    fn config_errors_exit_one_and_write_nothing() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        for text in [
            "[grid]\nn_phi = 64\nphi_mx = 3\n",
            "[grid]\n\nn_phi\n",
            "[grid\n",
            "[grid]\nn_phi = 64\nn_phi = 32\n",
        ] {
            let cfg = write_config(tmp.path(), text);
            assert_eq!(run("stationary", &cfg, &[], &out), 1, "{text:?}");
            assert!(!out.exists());
        }
    }

    #[test]
    fn invalid_values_and_missing_files_exit_one() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        let cfg = write_config(tmp.path(), "");
        assert_eq!(run("stationary", &cfg, &["numerics.mixing_alpha=1.5"], &out), 1);
        assert_eq!(run("stationary", &cfg, &["grid.nphi=3"], &out), 1);
        assert_eq!(run("stationary", &tmp.path().join("absent.ini"), &[], &out), 1);
        assert!(!out.exists());
    }

    #[test]
    fn solver_failure_exits_two_and_still_writes_summary() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "[numerics]\nmax_iter = 3\n");
        let out = tmp.path().join("out");
        assert_eq!(run("stationary", &cfg, &[], &out), 2);
        let s = summary(&out);
        assert_eq!(s["status"], "numerical_failure");
        assert!(s["error"].as_str().unwrap().contains('3'));
        assert_eq!(s["config"]["numerics"]["max_iter"], 3);
        assert!(out.join("scf_history.csv").exists());
    }

    #[test]
    fn gauge_check_reports_one_boolean_per_check() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "");
        let out = tmp.path().join("out");
        let code = run("gauge-check", &cfg, &[], &out);
        let s = summary(&out);
        let checks = s["results"]["checks"].as_array().unwrap();
        assert_eq!(checks.len(), 7);
        assert!(checks.iter().all(|c| c["passed"].is_boolean()));
        let all = checks.iter().all(|c| c["passed"] == true);
        assert_eq!(s["passed"], all);
        assert_eq!(code, if all { 0 } else { 2 });
    }

    #[test]
    fn identical_runs_give_identical_csv() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "[numerics]\nn_steps = 200\n");
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        for out in [&a, &b] {
            assert_eq!(run("evolve", &cfg, &[], out), 0);
        }
        for f in ["trace.csv", "psi_final.bin"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
        let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
        assert!(!trace.contains('\r'));
        assert_eq!(trace.lines().count(), 1 + 200 / 10 + 1);
        assert!(trace.starts_with("time,norm2,"));
    }

    #[test]
    fn resolved_config_replays_exactly() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "[model]\nlength_l = 7.5\n[numerics]\nseed = 11\n");
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        assert_eq!(run("invariants", &cfg, &["grid.n_phi=7"], &a), 0);
        assert_eq!(run("invariants", &a.join("resolved.ini"), &[], &b), 0);
        let (sa, sb) = (summary(&a), summary(&b));
        assert_eq!(sa["config"], sb["config"]);
        assert_eq!(sa["results"], sb["results"]);
        assert_eq!(sa["config"]["grid"]["n_phi"], 7);
        assert_eq!(sa["config"]["numerics"]["seed"], 11);
    }

    #[test]
    fn output_directory_precedence() {
        let mut cfg = ScenarioConfig::defaults(Command::Stationary);
        let env = Some(PathBuf::from("env"));
        assert_eq!(resolve_output_dir(None, &cfg, None), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(None, &cfg, env.clone()), PathBuf::from("env"));
        cfg.output.directory = Some("file".into());
        assert_eq!(resolve_output_dir(None, &cfg, env.clone()), PathBuf::from("file"));
        assert_eq!(
            resolve_output_dir(Some(Path::new("flag")), &cfg, env),
            PathBuf::from("flag")
        );
    }

    #[test]
    fn every_command_echoes_its_config() {
        let tmp = TempDir::new().unwrap();
        let cfg = write_config(tmp.path(), "");
        for cmd in ["ir-scan", "variational", "superposition"] {
            let out = tmp.path().join(cmd);
            let code = run(cmd, &cfg, &[], &out);
            assert!(matches!(code, 0 | 2), "{cmd}");
            let s = summary(&out);
            assert_eq!(s["command"], cmd);
            assert!(s["config"]["grid"].is_object(), "{cmd}");
            assert!(out.join("resolved.ini").exists());
        }
    }
}
