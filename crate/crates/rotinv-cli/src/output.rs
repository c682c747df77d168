//! Output plumbing: 17-significant-digit JSON, run manifests, and
//! stdin/stdout-aware path handling.

use std::io::{self, Read, Write};
use std::time::Instant;

use serde::Serialize;
use serde_json::ser::Formatter;

/// JSON formatter printing every float with 17 significant digits so the
/// values round-trip exactly.
pub struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serializer emits utf-8"))
}

/// Read a file, or stdin when the path is `-`.
pub fn read_input(path: &str) -> io::Result<String> {
    if path == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path)
    }
}

/// Write to a file, or stdout when the path is `-`. A closed stdout pipe
/// is not an error for a batch tool.
pub fn write_output(path: &str, content: &str) -> io::Result<()> {
    if path == "-" {
        let mut stdout = io::stdout().lock();
        let result = stdout.write_all(content.as_bytes()).and_then(|_| {
            if content.ends_with('\n') {
                Ok(())
            } else {
                stdout.write_all(b"\n")
            }
        });
        match result {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other,
        }
    } else {
        std::fs::write(path, content)
    }
}

/// Reproducibility record emitted with every command output.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config: serde_json::Value,
    pub version: &'static str,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<rotinv::FitDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<rotinv::NormalizationRecord>,
}

impl RunManifest {
    pub fn new(inputs: Vec<String>, config: serde_json::Value) -> Self {
        let command: Vec<String> = std::env::args().collect();
        Self {
            command: command.join(" "),
            inputs,
            config,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_ms: 0.0,
            rotation: None,
            diagnostics: None,
            normalization: None,
        }
    }

    /// Next to a file output as `<path>.manifest.json`; to stderr when the
    /// output went to stdout.
    pub fn emit(mut self, output_path: &str, started: Instant) -> io::Result<()> {
        self.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        let text = to_json_string(&self).expect("manifest serializes");
        if output_path == "-" {
            eprintln!("{text}");
            Ok(())
        } else {
            std::fs::write(format!("{output_path}.manifest.json"), text)
        }
    }
}
