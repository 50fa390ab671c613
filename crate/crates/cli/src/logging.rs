use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

/// Writes records to stderr and, once a stage has opened one, to its log file.
struct TeeLogger {
    level: LevelFilter,
    file: Mutex<Option<File>>,
}

static LOGGER: std::sync::OnceLock<TeeLogger> = std::sync::OnceLock::new();

impl Log for TeeLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = match record.level() {
            Level::Info => format!("{}\n", record.args()),
            l => format!("[{}] {}\n", l.as_str().to_lowercase(), record.args()),
        };
        let _ = std::io::stderr().write_all(line.as_bytes());
        if let Ok(mut f) = self.file.lock() {
            if let Some(f) = f.as_mut() {
                let _ = f.write_all(line.as_bytes());
            }
        }
    }

    fn flush(&self) {
        if let Ok(mut f) = self.file.lock() {
            if let Some(f) = f.as_mut() {
                let _ = f.flush();
            }
        }
    }
}

pub fn init(verbose: bool) {
    let level = if verbose { LevelFilter::Debug } else { LevelFilter::Info };
    let logger = LOGGER.get_or_init(|| TeeLogger {
        level,
        file: Mutex::new(None),
    });
    if log::set_logger(logger).is_ok() {
        log::set_max_level(level);
    }
}

/// Mirrors subsequent records into `path` (truncated).
pub fn attach_file(path: &Path) -> std::io::Result<()> {
    let file = File::create(path)?;
    if let Some(logger) = LOGGER.get() {
        if let Ok(mut slot) = logger.file.lock() {
            *slot = Some(file);
        }
    }
    Ok(())
}
