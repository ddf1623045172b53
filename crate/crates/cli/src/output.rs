//! All-or-nothing output directories.
//!
//! Files are staged under temporary names and renamed into place only when
//! every one of them has been written. Dropping an uncommitted set removes
//! the staged files, and the directory too if this set created it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> io::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            staged: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path to write `name` to before commit.
    pub fn stage(&mut self, name: &str) -> PathBuf {
        let tmp = self.dir.join(format!(".{name}.partial-{}", std::process::id()));
        self.staged.push((tmp.clone(), self.dir.join(name)));
        tmp
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> io::Result<()> {
        let tmp = self.stage(name);
        fs::write(tmp, contents)
    }

    pub fn commit(mut self) -> io::Result<()> {
        for (tmp, dest) in &self.staged {
            fs::rename(tmp, dest)?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
