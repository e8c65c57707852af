//! Plain-text output: header-first CSV, pretty JSON, and SVG meridian plots.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes a CSV with a header row and newline-terminated records.
pub fn write_csv<P, I, R>(path: P, header: &[&str], rows: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let row = row.as_ref();
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            // `{}` on f64 is the shortest round-trip representation
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV written by [`write_csv`]; returns header and columns.
pub fn read_csv_columns<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::invalid("empty CSV")),
    };
    let mut cols = vec![Vec::new(); header.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::invalid(format!(
                "CSV line {}: expected {} fields, got {}",
                lineno + 2,
                header.len(),
                fields.len()
            )));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("CSV line {}: bad number {f:?}", lineno + 2)))?;
            c.push(v);
        }
    }
    Ok((header, cols))
}

pub fn write_json<P: AsRef<Path>, T: Serialize + ?Sized>(path: P, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// SVG of the meridian curve `(±r sin θ, c₃ + r cos θ)`, both azimuths.
pub fn meridian_svg(theta: &[f64], r: &[f64], c3: f64, title: &str) -> String {
    let size = 400.0;
    let extent = r.iter().fold(1.0f64, |a, &v| a.max(v.abs())) * 1.2;
    let scale = size / (2.0 * extent);
    let map = |x: f64, z: f64| (size / 2.0 + x * scale, size / 2.0 - (z - c3) * scale);
    let mut right = String::new();
    let mut left = String::new();
    for (&t, &ri) in theta.iter().zip(r) {
        let (xr, yr) = map(ri * t.sin(), c3 + ri * t.cos());
        let (xl, yl) = map(-ri * t.sin(), c3 + ri * t.cos());
        right.push_str(&format!("{xr:.3},{yr:.3} "));
        left.push_str(&format!("{xl:.3},{yl:.3} "));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n\
         <title>{title}</title>\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{h}\" y1=\"0\" x2=\"{h}\" y2=\"{size}\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n\
         <polyline points=\"{right}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n\
         <polyline points=\"{left}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n\
         <text x=\"8\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n\
         </svg>\n",
        h = size / 2.0,
    )
}
