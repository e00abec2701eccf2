use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde_json::{Map, Value};

/// JSON-lines event sink. Every line carries `event` and `elapsed_ms`; a
/// log without a path discards everything.
pub struct EventLog {
    out: Option<Mutex<BufWriter<File>>>,
    start: Instant,
}

impl EventLog {
    pub fn open(path: Option<&Path>) -> std::io::Result<Self> {
        let out = match path {
            Some(p) => Some(Mutex::new(BufWriter::new(
                OpenOptions::new().create(true).append(true).open(p)?,
            ))),
            None => None,
        };
        Ok(EventLog {
            out,
            start: Instant::now(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.out.is_some()
    }

    /// Writes one line. `fields` should be an object; other values are
    /// stored under `data`.
    pub fn emit(&self, event: &str, fields: Value) {
        let Some(out) = &self.out else { return };
        let mut line = Map::new();
        line.insert("event".into(), event.into());
        line.insert("elapsed_ms".into(), (self.start.elapsed().as_millis() as u64).into());
        match fields {
            Value::Object(map) => line.extend(map),
            Value::Null => {}
            other => {
                line.insert("data".into(), other);
            }
        }
        let mut out = out.lock().unwrap_or_else(|e| e.into_inner());
        // Logging is best effort; a full disk must not change the verdict.
        let _ = serde_json::to_writer(&mut *out, &Value::Object(line));
        let _ = out.write_all(b"\n");
        let _ = out.flush();
    }
}
