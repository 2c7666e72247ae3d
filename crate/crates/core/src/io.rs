//! Field and stencil CSV files.
//!
//! Fields are written as `x,value` or `x,y,value`, one row per node with the
//! first axis fastest. Values use Rust's shortest round-trip formatting, so a
//! write/read cycle is exact.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, GridDomain};
use crate::nonlocal::Stencil;

/// A field read back from CSV, before it is attached to a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable {
    pub dim: usize,
    pub halfwidth: f64,
    pub points: usize,
    pub values: Vec<f64>,
}

impl FieldTable {
    /// Attach to `grid`, which must have the same lattice.
    pub fn into_field(self, grid: &Arc<GridDomain>) -> Result<Field> {
        if grid.dim() != self.dim || grid.points_per_axis() != self.points || !close(grid.halfwidth(), self.halfwidth) {
            return Err(Error::GridMismatch);
        }
        Field::from_values(grid, self.values)
    }

    /// Attach to the full box with the table's own lattice.
    pub fn into_box_field(self) -> Result<Field> {
        let g = Arc::new(GridDomain::full_box(self.dim, self.halfwidth, self.points)?);
        self.into_field(&g)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn write_field<W: Write>(out: W, f: &Field) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let g = &f.grid;
    let header: &[&str] = if g.dim() == 1 { &["x", "value"] } else { &["x", "y", "value"] };
    w.write_record(header).map_err(csv_err)?;
    for k in 0..g.len() {
        let p = g.coord(k);
        let v = f.values[k].to_string();
        if g.dim() == 1 {
            w.write_record([p[0].to_string(), v])
        } else {
            w.write_record([p[0].to_string(), p[1].to_string(), v])
        }
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn field_to_string(f: &Field) -> String {
    let mut buf = Vec::new();
    write_field(&mut buf, f).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parses a field CSV and checks that it lies on a centred uniform lattice.
pub fn parse_field_csv(text: &str) -> Result<FieldTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => return Err(parse_err(1, format!("header must be `x,value` or `x,y,value`, got `{}`", header.join(",")))),
    };
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != dim + 1 {
            return Err(parse_err(line, format!("expected {} columns", dim + 1)));
        }
        let mut row = [0.0; 3];
        for (c, cell) in rec.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| parse_err(line, format!("not a number: `{cell}`")))?;
            if !x.is_finite() {
                return Err(parse_err(line, "non-finite entry"));
            }
            row[if c == dim { 2 } else { c }] = x;
        }
        rows.push(row);
    }
    let total = rows.len();
    let points = if dim == 1 {
        total
    } else {
        let n = (total as f64).sqrt().round() as usize;
        if n * n != total {
            return Err(parse_err(0, format!("{total} rows do not form a square lattice")));
        }
        n
    };
    if points < 3 {
        return Err(parse_err(0, "need at least 3 points per axis"));
    }
    let halfwidth = -rows[0][0];
    if !(halfwidth > 0.0) {
        return Err(parse_err(2, "the lattice must be centred at the origin"));
    }
    let h = 2.0 * halfwidth / (points - 1) as f64;
    for (k, row) in rows.iter().enumerate() {
        let (i, j) = (k % points, k / points);
        let expect_x = -halfwidth + i as f64 * h;
        let expect_y = if dim == 2 { -halfwidth + j as f64 * h } else { 0.0 };
        if (row[0] - expect_x).abs() > 1e-6 * h || (row[1] - expect_y).abs() > 1e-6 * h {
            return Err(parse_err(k + 2, "coordinates are not on the uniform lattice (first axis fastest)"));
        }
    }
    Ok(FieldTable {
        dim,
        halfwidth,
        points,
        values: rows.iter().map(|r| r[2]).collect(),
    })
}

/// Stencil dump: `offset_i[,offset_j],weight`, then the diagonal under the
/// offset `0` and the folded tail under the label `tail`.
pub fn write_stencil<W: Write>(out: W, s: &Stencil) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let one = s.dim() == 1;
    if one {
        w.write_record(["offset_i", "weight"])
    } else {
        w.write_record(["offset_i", "offset_j", "weight"])
    }
    .map_err(csv_err)?;
    for (o, wt) in s.offsets() {
        if one {
            w.write_record([o[0].to_string(), wt.to_string()])
        } else {
            w.write_record([o[0].to_string(), o[1].to_string(), wt.to_string()])
        }
        .map_err(csv_err)?;
    }
    let diag = s.diagonal.to_string();
    let tail = s.tail_coefficient.to_string();
    if one {
        w.write_record(["0", &diag]).map_err(csv_err)?;
        w.write_record(["tail", &tail]).map_err(csv_err)?;
    } else {
        w.write_record(["0", "0", &diag]).map_err(csv_err)?;
        w.write_record(["tail", "tail", &tail]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table with a header.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
