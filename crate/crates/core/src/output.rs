//! Report serialisation: JSON with round-trip float precision, CSV traces,
//! and atomic file writes.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::trace::RunTrace;

pub const SCHEMA_VERSION: u32 = 1;

/// Pretty JSON formatter that writes every float with 17 significant digits.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_f64(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// `{:.16e}`: 17 significant digits, exact round trip for finite doubles.
pub fn format_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        // JSON and our CSV readers have no spelling for these
        "null".to_string()
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Header and rows of the per-iteration CSV.
pub const TRACE_COLUMNS: [&str; 6] =
    ["iteration", "phase", "grad_norm_hat", "grad_norm_true", "dist_from_round_start", "escaped"];

pub fn trace_csv(trace: &RunTrace) -> String {
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    let mut out = format!("# schema_version={SCHEMA_VERSION}\n{}\n", TRACE_COLUMNS.join(","));
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration,
            r.phase.as_str(),
            format_f64(r.grad_norm_hat),
            opt(r.grad_norm_true),
            opt(r.dist_from_round_start),
            r.escaped
        ));
    }
    out
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
