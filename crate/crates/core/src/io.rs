//! Tab-separated tables with `#` metadata headers.
//!
//! ```text
//! # key: value
//! col_a	col_b
//! 1.0	2.0
//! ```
//!
//! Wigner grids use the first column for `x` and the header row for `y`
//! (the corner cell reads `x\y`). Complex matrices are written one row per
//! matrix row with `re, im` column pairs.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{KpoError, Result};
use crate::linalg::{CMatrix, C64};
use crate::tomography::WignerGrid;

const GRID_CORNER: &str = "x\\y";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(KpoError::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut table = Table::default();
        let mut have_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if have_header {
                    continue;
                }
                if let Some((k, v)) = rest.split_once(':') {
                    table.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !have_header {
                table.columns = line.split('\t').map(|s| s.trim().to_string()).collect();
                have_header = true;
                continue;
            }
            let row: Vec<f64> = line
                .split('\t')
                .enumerate()
                .map(|(col, cell)| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| KpoError::Parse(format!("line {lineno}, column {}: `{}` is not a number", col + 1, cell.trim())))
                })
                .collect::<Result<_>>()?;
            if row.len() != table.columns.len() {
                return Err(KpoError::Parse(format!(
                    "line {lineno}: {} cells but {} columns in the header",
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        if !have_header {
            return Err(KpoError::Parse("table has no header row".into()));
        }
        Ok(table)
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| KpoError::Parse(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read_path(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| KpoError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Table::parse(&text)
    }
}

pub fn grid_to_table(grid: &WignerGrid) -> Table {
    let mut columns = vec![GRID_CORNER.to_string()];
    columns.extend(grid.ys.iter().map(|y| y.to_string()));
    let rows = grid
        .xs
        .iter()
        .enumerate()
        .map(|(i, &x)| std::iter::once(x).chain((0..grid.ys.len()).map(|j| grid.values[(i, j)])).collect())
        .collect();
    Table { meta: Vec::new(), columns, rows }
}

pub fn grid_from_table(table: &Table) -> Result<WignerGrid> {
    if table.columns.first().map(String::as_str) != Some(GRID_CORNER) {
        return Err(KpoError::Parse(format!("grid header must start with `{GRID_CORNER}`")));
    }
    let ys: Vec<f64> = table.columns[1..]
        .iter()
        .map(|c| c.parse::<f64>().map_err(|_| KpoError::Parse(format!("grid header entry `{c}` is not a number"))))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let values = DMatrix::from_fn(xs.len(), ys.len(), |i, j| table.rows[i][j + 1]);
    WignerGrid::new(xs, ys, values)
}

pub fn matrix_to_table(m: &CMatrix) -> Table {
    let columns = (0..m.ncols()).flat_map(|c| [format!("re_{c}"), format!("im_{c}")]);
    let mut table = Table::new(columns);
    table.rows = (0..m.nrows()).map(|r| (0..m.ncols()).flat_map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect();
    table
}

pub fn matrix_from_table(table: &Table) -> Result<CMatrix> {
    let ncols = table.columns.len();
    if ncols % 2 != 0 {
        return Err(KpoError::Parse(format!("complex matrix needs an even column count, found {ncols}")));
    }
    let d = ncols / 2;
    Ok(CMatrix::from_fn(table.rows.len(), d, |r, c| C64::new(table.rows[r][2 * c], table.rows[r][2 * c + 1])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["a", "b"]).with_meta("dim", 12);
        t.push_row(vec![1.0, -2.5e-7]).unwrap();
        t.push_row(vec![0.1, 3.0]).unwrap();
        let back = Table::parse(&t.to_tsv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta_value("dim"), Some("12"));
    }

    #[test]
    fn parse_error_names_position() {
        let err = Table::parse("a\tb\n1\tx\n").unwrap_err();
        assert!(err.to_string().contains("line 2, column 2"), "{err}");
    }

    #[test]
    fn grid_and_matrix_round_trip() {
        let grid = WignerGrid::new(vec![-1.0, 0.0, 1.0], vec![-0.5, 0.5], DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 * 0.1)).unwrap();
        assert_eq!(grid_from_table(&Table::parse(&grid_to_table(&grid).to_tsv()).unwrap()).unwrap(), grid);
        let m = CMatrix::from_fn(3, 3, |r, c| C64::new(r as f64, c as f64 - 0.5));
        assert_eq!(matrix_from_table(&Table::parse(&matrix_to_table(&m).to_tsv()).unwrap()).unwrap(), m);
    }
}
