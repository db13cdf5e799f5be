//! CSV emission helpers. Cells never contain commas, quotes or newlines, so
//! no quoting logic is needed; every float is printed in scientific notation
//! with exactly 12 significant digits, which keeps output locale-free and
//! byte-stable.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// 12 significant digits, scientific notation. Non-finite values print as
/// `inf`/`-inf`/`nan` (legitimate answers, e.g. an infinite moment).
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.11e}")
}

pub fn row(cells: &[String]) -> String {
    cells.join(",")
}

pub fn header(cells: &[&str]) -> String {
    cells.join(",")
}

/// Writes lines (plus a trailing newline) to `out`, or stdout when absent.
pub fn write_lines(lines: &[String], out: Option<&Path>) -> Result<(), CliError> {
    let mut text = lines.join("\n");
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
