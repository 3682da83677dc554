//! Run manifest: what ran, with which parameters, on which inputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::hex_prefix;
use crate::error::CliResult;

/// Writes `manifest.toml` into the output directory. The manifest carries
/// a timestamp and is therefore excluded from byte-identity comparisons;
/// every other output file is reproducible.
pub fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    config_digest: &str,
    params: &[(&str, String)],
    inputs: &[&Path],
) -> CliResult<()> {
    fs::create_dir_all(out_dir)?;
    let mut f = fs::File::create(out_dir.join("manifest.toml"))?;
    writeln!(f, "[run]")?;
    writeln!(f, "tool = \"ambvib {}\"", env!("CARGO_PKG_VERSION"))?;
    writeln!(f, "subcommand = {subcommand:?}")?;
    writeln!(f, "config_digest = {config_digest:?}")?;
    writeln!(f, "generated_utc = {:?}", chrono::Utc::now().to_rfc3339())?;
    writeln!(f)?;
    writeln!(f, "[parameters]")?;
    for (k, v) in params {
        writeln!(f, "{k} = {v:?}")?;
    }
    writeln!(f)?;
    writeln!(f, "[input_digests]")?;
    for path in inputs {
        if let Ok(bytes) = fs::read(path) {
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            writeln!(
                f,
                "{:?} = {:?}",
                path.display().to_string(),
                hex_prefix(&hasher.finalize(), 16)
            )?;
        }
    }
    Ok(())
}
