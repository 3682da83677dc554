//! `correlate`: trajectory vs. environmental series.

use std::io::Write;
use std::path::Path;

use ambvib::modal::{correlate_env, EnvKind};

use crate::commands::{load_env_series, track::read_trajectory};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

pub fn run(
    lc: &LoadedConfig,
    traj_path: &Path,
    label: &str,
    env_flag: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let traj = read_trajectory(traj_path, label)?;
    let env_path = env_flag
        .map(|p| p.to_path_buf())
        .or_else(|| lc.config.env.temperature_csv.as_ref().map(Into::into))
        .ok_or_else(|| {
            CliError::Usage("no environmental series: pass --env or set env.temperature_csv".into())
        })?;
    let env = load_env_series(&env_path, EnvKind::TemperatureC)?;
    let result = correlate_env(
        &traj,
        &env,
        lc.config.env.max_lag_h,
        lc.config.env.regime_split_c,
    )?;

    std::fs::create_dir_all(out)?;
    let mut f = std::fs::File::create(out.join("correlation.txt"))?;
    writeln!(f, "# config {}", lc.digest)?;
    writeln!(f, "label={label}")?;
    writeln!(f, "n_pairs={}", result.n_pairs)?;
    writeln!(f, "r0={}", result.r0)?;
    writeln!(f, "best_lag_h={}", result.best_lag)?;
    writeln!(f, "r_at_best={}", result.r_at_best)?;
    if let Some((below, above)) = result.per_regime {
        writeln!(f, "regime_split_c={}", lc.config.env.regime_split_c.unwrap())?;
        writeln!(f, "r_below_split={below}")?;
        writeln!(f, "r_above_split={above}")?;
    }
    write_manifest(
        out,
        "correlate",
        &lc.digest,
        &[
            ("traj", traj_path.display().to_string()),
            ("label", label.to_string()),
            ("env", env_path.display().to_string()),
        ],
        &[traj_path, &env_path],
    )?;
    println!(
        "{label} vs {}: r0 = {:.3}, best lag {} h (r = {:.3})",
        env_path.display(),
        result.r0,
        result.best_lag,
        result.r_at_best
    );
    Ok(())
}
