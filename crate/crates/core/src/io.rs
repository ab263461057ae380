//! JSONL persistence helpers.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

fn invalid(e: impl std::fmt::Display, path: &Path, line: usize) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("{}:{line}: {e}", path.display()),
    )
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| invalid(e, path, i + 1))?);
    }
    Ok(out)
}

pub fn to_jsonl<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> io::Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `records` to `path`, creating parent directories. A file that
/// already holds identical bytes is left untouched.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> io::Result<()> {
    write_if_changed(path, to_jsonl(records)?.as_bytes())
}

pub fn write_if_changed(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Ok(existing) = fs::read(path) {
        if existing == bytes {
            return Ok(());
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

/// Append-only JSONL log, flushed after every record.
pub struct JsonlAppender {
    out: BufWriter<File>,
}

impl JsonlAppender {
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_idempotent_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/y.jsonl");
        write_jsonl(&p, &[1, 2, 3]).unwrap();
        let modified = fs::metadata(&p).unwrap().modified().unwrap();
        write_jsonl(&p, &[1, 2, 3]).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().modified().unwrap(), modified);
        let back: Vec<i32> = read_jsonl(&p).unwrap();
        assert_eq!(back, [1, 2, 3]);
    }

    #[test]
    fn appender_appends() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        for i in 0..2 {
            let mut a = JsonlAppender::open(&p).unwrap();
            a.append(&i).unwrap();
        }
        let back: Vec<i32> = read_jsonl(&p).unwrap();
        assert_eq!(back, [0, 1]);
    }
}
