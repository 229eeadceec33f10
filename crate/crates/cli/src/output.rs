//! Output files are assembled in memory and written only after a command
//! has finished, so a failing run leaves no partial results behind.

use std::fs;
use std::path::Path;

#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn commit(&self, dir: &Path) -> std::io::Result<()> {
        if self.files.is_empty() {
            return Ok(());
        }
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, dir.join(name))?;
        }
        Ok(())
    }
}
