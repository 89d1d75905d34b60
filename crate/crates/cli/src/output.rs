use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};

use crate::settings::Settings;

/// Output directory of one run.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        tracing::debug!(path = %path.display(), "wrote");
        Ok(path)
    }

    /// Effective settings plus versions and the command line, in config
    /// file form so the run can be repeated with `--config`.
    pub fn manifest(&self, settings: &Settings) -> Result<PathBuf> {
        let argv: Vec<String> = std::env::args().collect();
        let text = format!(
            "# dca-cli {} (library {})\n# command: {}\n{}",
            env!("CARGO_PKG_VERSION"),
            dca::VERSION,
            argv.join(" "),
            settings.render()
        );
        self.write("manifest.cfg", text)
    }
}

/// File-name friendly form of a setting value.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("uniform(5,15)"), "uniform-5-15");
        assert_eq!(slug("10"), "10");
        assert_eq!(slug("0.5"), "0.5");
    }
}
