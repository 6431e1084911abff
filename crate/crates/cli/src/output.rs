//! Buffered output files and exit-code mapping.
//!
//! Everything a command produces is rendered in memory first. Files are then
//! written to temporaries in the target directory and renamed into place, so
//! a failing command leaves no partial output behind.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use sescap::experiment::RunConfig;
use tempfile::NamedTempFile;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(io::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<sescap::Error> for CliError {
    fn from(e: sescap::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

pub struct Outputs {
    directory: PathBuf,
    header: Vec<u8>,
    files: Vec<(String, io::Result<Vec<u8>>)>,
}

impl Outputs {
    /// The provenance header repeats the full configuration.
    pub fn new(config: &RunConfig, command: String) -> Self {
        let mut header = format!("sescap {} {command}\n", env!("CARGO_PKG_VERSION"));
        header += &config.to_toml();
        let header: String = header
            .lines()
            .map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") })
            .collect();
        Outputs {
            directory: PathBuf::from(&config.outputs.directory),
            header: header.into_bytes(),
            files: Vec::new(),
        }
    }

    pub fn add<F>(&mut self, name: impl Into<String>, notes: &[String], body: F)
    where
        F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
    {
        let mut buf = self.header.clone();
        let rendered = (|| {
            for n in notes.iter().flat_map(|n| n.lines()) {
                writeln!(buf, "# {n}")?;
            }
            body(&mut buf)?;
            Ok(buf)
        })();
        self.files.push((name.into(), rendered));
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut ready = Vec::new();
        for (name, bytes) in self.files {
            ready.push((name, bytes?));
        }
        std::fs::create_dir_all(&self.directory)?;
        let mut staged = Vec::new();
        for (name, bytes) in ready {
            let mut tmp = NamedTempFile::new_in(&self.directory)?;
            tmp.write_all(&bytes)?;
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
            }
            tmp.as_file().sync_all()?;
            staged.push((tmp, self.directory.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
            written.push(path);
        }
        Ok(written)
    }
}
