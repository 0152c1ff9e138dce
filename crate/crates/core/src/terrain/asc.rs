//! ESRI ASCII grid reader and writer.
//!
//! The header corner coordinates refer to the lower-left corner of the lower-left
//! cell; data rows are listed north to south. Heights are written with the shortest
//! representation that parses back to the same `f64`, so finite values round-trip
//! bit-exactly. `xllcenter`/`yllcenter` headers are accepted on read.

use std::fmt::Write as _;
use std::path::Path;

use super::ElevationGrid;
use crate::error::{NavError, Result};
use crate::geometry::Point2;

pub const DEFAULT_NODATA: f64 = -9999.0;

pub fn to_asc_string(grid: &ElevationGrid) -> String {
    let res = grid.resolution();
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.cols());
    let _ = writeln!(out, "nrows {}", grid.rows());
    let _ = writeln!(out, "xllcorner {}", grid.origin().x - res / 2.0);
    let _ = writeln!(out, "yllcorner {}", grid.origin().y - res / 2.0);
    let _ = writeln!(out, "cellsize {res}");
    let _ = writeln!(out, "NODATA_value {DEFAULT_NODATA}");
    for row in (0..grid.rows()).rev() {
        let line: Vec<String> = (0..grid.cols())
            .map(|col| match grid.get(row, col) {
                Some(h) => format!("{h}"),
                None => format!("{DEFAULT_NODATA}"),
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_asc(grid: &ElevationGrid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_asc_string(grid))?;
    Ok(())
}

pub fn read_asc(path: impl AsRef<Path>) -> Result<ElevationGrid> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_asc(&text)
}

pub fn parse_asc(text: &str) -> Result<ElevationGrid> {
    let mut tokens = text.split_whitespace().peekable();
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut x_is_center = false;
    let mut y_is_center = false;
    let mut cellsize = None;
    let mut nodata = DEFAULT_NODATA;

    let num = |tok: Option<&str>, key: &str| -> Result<f64> {
        tok.ok_or_else(|| NavError::Parse(format!("missing value for {key}")))?
            .parse::<f64>()
            .map_err(|e| NavError::Parse(format!("bad value for {key}: {e}")))
    };

    while let Some(tok) = tokens.peek() {
        if !tok.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let key = tokens.next().unwrap().to_ascii_lowercase();
        let value = num(tokens.next(), &key)?;
        match key.as_str() {
            "ncols" => ncols = Some(value as usize),
            "nrows" => nrows = Some(value as usize),
            "xllcorner" => x = Some(value),
            "yllcorner" => y = Some(value),
            "xllcenter" => {
                x = Some(value);
                x_is_center = true;
            }
            "yllcenter" => {
                y = Some(value);
                y_is_center = true;
            }
            "cellsize" => cellsize = Some(value),
            "nodata_value" => nodata = value,
            other => return Err(NavError::Parse(format!("unknown header key '{other}'"))),
        }
    }

    let missing = |k: &str| NavError::Parse(format!("missing header key {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let x = x.ok_or_else(|| missing("xllcorner"))?;
    let y = y.ok_or_else(|| missing("yllcorner"))?;
    let origin = Point2::new(
        if x_is_center { x } else { x + cellsize / 2.0 },
        if y_is_center { y } else { y + cellsize / 2.0 },
    );

    let mut heights = vec![f64::NAN; nrows * ncols];
    for file_row in 0..nrows {
        let row = nrows - 1 - file_row;
        for col in 0..ncols {
            let v = num(tokens.next(), "grid data")?;
            if v != nodata {
                heights[row * ncols + col] = v;
            }
        }
    }
    if tokens.next().is_some() {
        return Err(NavError::Parse("trailing data after grid".into()));
    }
    ElevationGrid::from_heights(origin, cellsize, nrows, ncols, heights).map_err(|e| NavError::Parse(e.to_string()))
}
