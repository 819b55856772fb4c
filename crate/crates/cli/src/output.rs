//! Artifact writers: CSV tables, binary grid arrays with JSON sidecars, and
//! the run summary.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use thirdkind::Grid;

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

fn format_cell(c: Cell) -> String {
    match c {
        Cell::Float(v) if v.is_nan() => "NaN".into(),
        Cell::Float(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        // 17 significant digits round-trip every f64.
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Int(v) => v.to_string(),
    }
}

/// Writes a comma-separated table with a header row and LF line endings.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(format_cell).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

pub enum ArrayData<'a> {
    Real(&'a [f64]),
    Complex(&'a [Complex64]),
}

/// Writes `<name>.bin` (little-endian, row-major, site 0 slowest) and a
/// `<name>.json` sidecar describing it. Returns the binary path.
pub fn write_grid_array(dir: &Path, name: &str, grid: &Grid, data: ArrayData<'_>) -> io::Result<PathBuf> {
    let bin = dir.join(format!("{name}.bin"));
    let mut w = BufWriter::new(fs::File::create(&bin)?);
    let (dtype, width, count) = match data {
        ArrayData::Real(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            ("float64", 8, v.len())
        }
        ArrayData::Complex(v) => {
            for z in v {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
            ("complex128", 16, v.len())
        }
    };
    w.flush()?;
    let shape = if count == grid.len() {
        vec![grid.n_phi(); grid.n_sites()]
    } else {
        vec![count]
    };
    let sidecar = json!({
        "file": format!("{name}.bin"),
        "dtype": dtype,
        "width_bytes": width,
        "byte_order": "little",
        "layout": if dtype == "complex128" { "interleaved re,im" } else { "scalar" },
        "shape": shape,
        "order": "row-major, axis 0 (site 0) slowest",
        "grid": {
            "n_sites": grid.n_sites(),
            "spacing_a": grid.spacing(),
            "n_phi": grid.n_phi(),
            "phi_max": grid.phi_max(),
            "delta_phi": grid.delta_phi(),
            "measure_weight": grid.measure_weight(),
        },
    });
    write_json(&dir.join(format!("{name}.json")), &sidecar)?;
    Ok(bin)
}

/// Reads back a real array written by [`write_grid_array`].
pub fn read_real_array(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "length is not a multiple of 8",
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Finite numbers as JSON numbers, everything else as `null`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_use_seventeen_digits() {
        assert_eq!(format_cell(Cell::Float(0.1)), "1.0000000000000001e-1");
        assert_eq!(format_cell(Cell::Float(-2.0)), "-2.0000000000000000e0");
        assert_eq!(format_cell(Cell::Int(7)), "7");
        assert_eq!(format_cell(Cell::Float(f64::NAN)), "NaN");
        let v = 1.0 / 3.0;
        assert_eq!(format_cell(Cell::Float(v)).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn arrays_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 1.0, 3, 1.0).unwrap();
        let data: Vec<f64> = (0..9).map(|i| i as f64 * 0.25 - 1.0).collect();
        let bin = write_grid_array(dir.path(), "field", &grid, ArrayData::Real(&data)).unwrap();
        assert_eq!(read_real_array(&bin).unwrap(), data);
        let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("field.json")).unwrap()).unwrap();
        assert_eq!(side["shape"], json!([3, 3]));
        assert_eq!(side["width_bytes"], json!(8));
    }

    #[test]
    fn csv_has_lf_endings() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["a", "b"], vec![vec![Cell::Float(1.0), Cell::Int(2)]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2\n");
    }
}
