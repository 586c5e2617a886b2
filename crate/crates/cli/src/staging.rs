//! Output files are assembled in memory and written through a staging
//! directory so a failing command leaves nothing behind.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Default)]
pub struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queues `body` under the relative path `name`.
    pub fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let stage = dir.join(format!(".staging-{}", std::process::id()));
        let result = self.write_into(&stage).and_then(|()| self.publish(&stage, dir));
        let _ = std::fs::remove_dir_all(&stage);
        result
    }

    fn write_into(&self, stage: &Path) -> Result<()> {
        for (name, body) in &self.files {
            let path = stage.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn publish(&self, stage: &Path, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for (name, _) in &self.files {
            let target = dir.join(name);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::rename(stage.join(name), &target).with_context(|| format!("moving {}", target.display()))?;
            out.push(target);
        }
        Ok(out)
    }
}
