use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Version written into every artifact. Loaders accept any `1.x`.
pub const FORMAT_VERSION: &str = "1.0";

pub fn check_format_version(found: &str, path: &Path) -> Result<()> {
    let major = FORMAT_VERSION.split('.').next().unwrap_or_default();
    if found.split('.').next() == Some(major) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{}: unsupported format_version {found:?} (expected major {major})",
            path.display()
        )))
    }
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(tmp, e))?;
    f.sync_all().map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

/// Appends one line under an exclusive single-writer assumption. The
/// line is written with one `write_all` so a record is never split.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut buf = line.trim_end_matches('\n').to_string();
    buf.push('\n');
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions() {
        let p = Path::new("x.json");
        assert!(check_format_version("1.0", p).is_ok());
        assert!(check_format_version("1.7", p).is_ok());
        assert!(check_format_version("2.0", p).is_err());
    }

    #[test]
    fn atomic_write_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        let log = dir.path().join("log.jsonl");
        append_line(&log, "{}").unwrap();
        append_line(&log, "{\"a\":1}\n").unwrap();
        assert_eq!(fs::read_to_string(&log).unwrap(), "{}\n{\"a\":1}\n");
    }
}
