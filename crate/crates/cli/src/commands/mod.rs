pub mod crossval;
pub mod evaluate;
pub mod segment;
pub mod sweep;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn secs(d: std::time::Duration) -> f64 {
    d.as_secs_f64()
}
