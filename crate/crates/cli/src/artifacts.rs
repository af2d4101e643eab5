use crate::error::CliError;
use anyhow::{Context, Result};
use crsirl_core::catalog::InteractionSplits;
use crsirl_core::checkpoint::{Encoding, NamedArrays};
use crsirl_core::{Catalog, EmbeddingTable};
use std::io::Write;
use std::path::Path;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error).with_context(|| format!("writing {}", path.display()))?;
    log::debug!("wrote {}", path.display());
    Ok(())
}

pub fn write_arrays(path: &Path, arrays: &NamedArrays, encoding: Encoding) -> Result<()> {
    write_atomic(path, &arrays.encode(encoding)?)
}

pub fn require(name: &str, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput { name: name.into(), path: path.to_path_buf(), reason: "not found".into() })
    }
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    require("catalog", path)?;
    Catalog::load(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_splits(path: &Path) -> Result<InteractionSplits> {
    require("splits", path)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(crsirl_core::Error::from).with_context(|| format!("reading {}", path.display()))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    require("embeddings", path)?;
    EmbeddingTable::load(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_arrays(name: &str, path: &Path) -> Result<NamedArrays> {
    require(name, path)?;
    NamedArrays::load(path).with_context(|| format!("reading {}", path.display()))
}
