//! Per-run output directory layout and atomic file writes.

use nbeddyn_core::io::write_atomic;
use nbeddyn_core::Result;
use std::path::{Path, PathBuf};

/// `<out>/<run-name>/{data,models,reports,figures}`.
pub struct RunDirs {
    pub root: PathBuf,
    pub data: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
    pub figures: PathBuf,
}

impl RunDirs {
    pub fn create(out: &Path, run_name: &str) -> Result<RunDirs> {
        let root = out.join(run_name);
        let dirs = RunDirs {
            data: root.join("data"),
            models: root.join("models"),
            reports: root.join("reports"),
            figures: root.join("figures"),
            root,
        };
        for d in [&dirs.data, &dirs.models, &dirs.reports, &dirs.figures] {
            std::fs::create_dir_all(d)?;
        }
        Ok(dirs)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
