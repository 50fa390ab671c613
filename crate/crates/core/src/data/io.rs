use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::episode::Episode;
use crate::error::{Error, Result};

/// An episode record dropped by [`read_episodes_lenient`].
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub line: usize,
    pub episode: String,
    pub reason: String,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub(crate) fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let inner: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

/// Writes `records` as JSON lines, gzip-compressed when the path ends in `.gz`.
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut out: Box<dyn Write> = if is_gz(path) {
        Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses JSON lines; `check` validates each record. Errors on the first
/// bad record unless `lenient`, in which case bad records are collected.
pub(crate) fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    lenient: bool,
    id_of: impl Fn(&T) -> String,
    check: impl Fn(&T) -> Result<()>,
) -> Result<(Vec<T>, Vec<Exclusion>)> {
    let reader = open_reader(path)?;
    let mut items = Vec::new();
    let mut excluded = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<T>(&line)
            .map_err(|e| (record_id(&line), e.to_string()))
            .and_then(|rec| match check(&rec) {
                Ok(()) => Ok(rec),
                Err(e) => Err((id_of(&rec), e.to_string())),
            });
        match parsed {
            Ok(rec) => items.push(rec),
            Err((episode, reason)) => {
                if !lenient {
                    return Err(Error::InvalidRecord {
                        episode,
                        line: lineno,
                        message: reason,
                    });
                }
                log::warn!("{}:{lineno}: excluding episode `{episode}`: {reason}", path.display());
                excluded.push(Exclusion {
                    line: lineno,
                    episode,
                    reason,
                });
            }
        }
    }
    Ok((items, excluded))
}

/// Best-effort id extraction from a record that failed to parse.
fn record_id(line: &str) -> String {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| {
            v.get("id")
                .or_else(|| v.get("episode_id"))
                .and_then(|i| i.as_str())
                .map(str::to_owned)
        })
        .unwrap_or_else(|| "<unknown>".to_string())
}

pub fn write_episodes(episodes: &[Episode], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), episodes)
}

/// Reads an episode file; the first malformed or invalid record is an error.
pub fn read_episodes(path: impl AsRef<Path>) -> Result<Vec<Episode>> {
    read_jsonl(path.as_ref(), false, |e: &Episode| e.id.clone(), Episode::validate).map(|(v, _)| v)
}

/// Reads an episode file, skipping (and logging) records with frame errors.
pub fn read_episodes_lenient(path: impl AsRef<Path>) -> Result<(Vec<Episode>, Vec<Exclusion>)> {
    read_jsonl(path.as_ref(), true, |e: &Episode| e.id.clone(), Episode::validate)
}
