use std::fmt;
use std::io::Write;
use std::path::Path;

/// Failure reported to the shell.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

impl CliError {
    pub fn validation(field: &str, message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: format!("{field}: {message}"),
        }
    }

    /// Maps a library error raised while handling `field`.
    pub fn library(field: &str, e: funreg::Error) -> Self {
        CliError {
            code: if e.is_numeric() { EXIT_NUMERIC } else { EXIT_VALIDATION },
            message: format!("{field}: {e}"),
        }
    }
}

pub trait Context<T> {
    fn field(self, field: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for funreg::Result<T> {
    fn field(self, field: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::library(field, e))
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn field(self, field: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::validation(field, e))
    }
}

/// Fails early when `path` cannot be created, before any work is done.
pub fn check_writable(field: &str, path: &Path) -> Result<(), CliError> {
    let parent = parent_dir(path);
    if !parent.is_dir() {
        return Err(CliError::validation(field, format!("directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(CliError::validation(field, format!("{} is a directory", path.display())));
    }
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(field: &str, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path)).field(field)?;
    tmp.write_all(bytes).field(field)?;
    tmp.as_file().sync_all().field(field)?;
    tmp.persist(path).map_err(|e| CliError::validation(field, e.error))?;
    Ok(())
}

pub fn read_text(field: &str, path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::validation(field, format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic("--out", &p, b"first").unwrap();
        write_atomic("--out", &p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_targets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(check_writable("--out", &dir.path().join("missing/x.csv")).is_err());
        assert!(check_writable("--out", dir.path()).is_err());
        assert!(check_writable("--out", &dir.path().join("x.csv")).is_ok());
        assert!(check_writable("--out", Path::new("relative.csv")).is_ok());
    }

    #[test]
    fn numeric_errors_map_to_exit_one() {
        let e = CliError::library(
            "--x",
            funreg::Error::Numeric {
                message: "no convergence".into(),
                residual: 1.0,
            },
        );
        assert_eq!(e.code, EXIT_NUMERIC);
        assert_eq!(CliError::library("--k", funreg::Error::RankZero).code, EXIT_VALIDATION);
        assert!(e.message.starts_with("--x: "));
    }
}
