//! One command per artifact directory: an exclusive lock file taken at
//! command start and removed on drop.

use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> CliResult<DirLock> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Prerequisite(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Prerequisite(
                format!("{} is locked by another command", dir.display()),
            )),
            Err(e) => Err(CliError::Prerequisite(format!(
                "cannot lock {}: {e}",
                dir.display()
            ))),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
