//! File formats the CLI reads and writes.

use nalgebra::DVector;
use netsel::error::{Error, Result};
use std::path::Path;

/// Reads a state vector from a JSON array of numbers.
pub fn read_vector_json(path: &Path) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<f64> = serde_json::from_str(&text)?;
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{}: empty state vector",
            path.display()
        )));
    }
    Ok(DVector::from_vec(values))
}

/// Reads an output sequence from CSV with a `time,...` header, one sample
/// per row (the format `simulate` writes).
pub fn read_sequence_csv(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{}: empty file", path.display())))?;
    let width = header.split(',').count();
    if width < 2 {
        return Err(Error::InvalidParameter(format!(
            "{}: expected a time column plus data columns",
            path.display()
        )));
    }
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::InvalidParameter(format!(
                "{}: row {} has {} fields, header has {width}",
                path.display(),
                row + 2,
                fields.len()
            )));
        }
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!(
                        "{}: bad number '{f}' in row {}",
                        path.display(),
                        row + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        samples.push(DVector::from_vec(values));
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(samples)
}

/// Writes an output sequence as `time,z1,...,zN` CSV in full precision.
pub fn write_sequence_csv(
    path: &Path,
    h: f64,
    samples: &[DVector<f64>],
    prefix: &str,
) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let width = samples.first().map_or(0, DVector::len);
    write!(out, "time")?;
    for i in 1..=width {
        write!(out, ",{prefix}{i}")?;
    }
    writeln!(out)?;
    for (k, sample) in samples.iter().enumerate() {
        write!(out, "{:.16e}", k as f64 * h)?;
        for v in sample.iter() {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parses a comma-separated list of 1-based sensor indices.
pub fn parse_sensor_list(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut nodes = Vec::new();
    for part in text.split(',') {
        let idx: usize = part.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!("bad sensor index '{part}'"))
        })?;
        if idx == 0 || idx > n {
            return Err(Error::InvalidParameter(format!(
                "sensor index {idx} out of range 1..={n}"
            )));
        }
        nodes.push(idx - 1);
    }
    if nodes.is_empty() {
        return Err(Error::EmptySelection);
    }
    nodes.sort_unstable();
    nodes.dedup();
    Ok(nodes)
}

/// Parses a comma-separated list of unsigned integers.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad integer '{p}'")))
        })
        .collect()
}
