use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Files produced by a command, held in memory until it has fully succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Compact JSON for bulky data files.
    pub fn json_compact<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file to `dir` via a temporary sibling and a rename.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
            let write = || -> std::io::Result<()> {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(&bytes)?;
                f.sync_all()?;
                fs::rename(&tmp, &target)
            };
            if let Err(e) = write() {
                let _ = fs::remove_file(&tmp);
                return Err(CliError::io(&target, e));
            }
            written.push(target);
        }
        Ok(written)
    }
}
