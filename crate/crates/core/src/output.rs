//! Deterministic text formatting shared by the CSV and key-value writers.

use std::io::{self, Write};

/// Round-trip formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `# key=value` lines.
pub fn write_header<W: Write>(w: &mut W, header: &[(String, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Writes a CSV table: header comment lines, a column row, then one row per record.
pub fn write_table<W: Write>(
    w: &mut W,
    header: &[(String, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> io::Result<()> {
    write_header(w, header)?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
