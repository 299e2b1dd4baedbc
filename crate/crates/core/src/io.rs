//! Artifact formats: CSV point sets and tables, sinogram CSV with a JSON
//! header, occupancy grids, PGM images and pretty JSON.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::reconstruct::Image;
use crate::xray::Sinogram;

/// Reads one point per row. A first row that does not parse as numbers is
/// taken as a header and skipped; all rows must have the same length.
pub fn read_points<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = out.first() {
                    if first.len() != p.len() {
                        return Err(Error::DimensionMismatch { expected: first.len(), got: p.len() });
                    }
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("non-finite coordinate on row {}", row + 1)));
                }
                out.push(p);
            }
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::InvalidArgument(format!("row {}: {e}", row + 1))),
        }
    }
    Ok(out)
}

pub fn read_points_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_points(File::open(path)?)
}

/// Writes a table with a header row.
pub fn write_table<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), got: row.len() });
        }
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    write_table(BufWriter::new(File::create(path)?), header, rows)
}

/// Coordinate column names: `x,y,z` up to three dimensions, `x1..xn` beyond.
pub fn coordinate_header(dim: usize) -> Vec<String> {
    if dim <= 3 {
        ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

pub fn write_points<W: Write>(writer: W, points: &[Vec<f64>]) -> Result<()> {
    let dim = points.first().map_or(0, Vec::len);
    let header = coordinate_header(dim);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(writer, &refs, points.iter().cloned())
}

/// Occupancy grid: coordinates followed by `in` (1 inside, 0 outside).
pub fn write_occupancy<W: Write>(writer: W, probes: &[Vec<f64>], inside: &[bool]) -> Result<()> {
    if probes.len() != inside.len() {
        return Err(Error::DimensionMismatch { expected: probes.len(), got: inside.len() });
    }
    let dim = probes.first().map_or(0, Vec::len);
    let mut header = coordinate_header(dim);
    header.push("in".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = probes.iter().zip(inside).map(|(p, b)| {
        let mut r = p.clone();
        r.push(if *b { 1.0 } else { 0.0 });
        r
    });
    write_table(writer, &refs, rows)
}

/// Sinogram values as a CSV matrix (one row per offset, one column per
/// angle, no header).
pub fn write_sinogram_matrix<W: Write>(writer: W, s: &Sinogram) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let na = s.angles.len();
    for i in 0..s.offsets.len() {
        w.write_record((0..na).map(|j| s.get(i, j).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Geometry header describing the sinogram matrix.
pub fn sinogram_header(s: &Sinogram) -> serde_json::Value {
    json!({
        "plane": s.plane,
        "geometry": s.geometry,
        "rows": "offsets",
        "columns": "angles",
        "shape": [s.offsets.len(), s.angles.len()],
        "offsets": s.offsets,
        "angles": s.angles,
        "max_abs": s.max_abs(),
        "max_quadrature_error": s.max_error(),
    })
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_sinogram_files(dir: &Path, stem: &str, s: &Sinogram) -> Result<()> {
    write_sinogram_matrix(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?), s)?;
    write_json_file(&dir.join(format!("{stem}.json")), &sinogram_header(s))
}

/// Binary greyscale PGM (`P5`, maxval 255).
pub fn write_pgm<W: Write>(mut writer: W, img: &Image) -> Result<()> {
    let n = img.grid.pixels;
    write!(writer, "P5\n{n} {n}\n255\n")?;
    writer.write_all(&img.to_grey())?;
    writer.flush()?;
    Ok(())
}

pub fn write_pgm_file(path: &Path, img: &Image) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), img)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::PlaneGeometry;
    use crate::reconstruct::ImageGrid;

    #[test]
    fn points_round_trip() {
        let pts = vec![vec![1.0, -2.5, 0.1], vec![0.0, 3.0, 1e-12]];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z\n"));
        assert_eq!(read_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn headerless_and_ragged_input() {
        let pts = read_points("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(read_points("1,2\n3\n".as_bytes()).is_err());
        assert!(read_points("1,2\nfoo,4\n".as_bytes()).is_err());
    }

    #[test]
    fn occupancy_format() {
        let mut buf = Vec::new();
        write_occupancy(&mut buf, &[vec![0.0, 1.0, 2.0], vec![0.5, 0.5, 0.5]], &[true, false]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,z,in\n0,1,2,1\n0.5,0.5,0.5,0\n");
    }

    #[test]
    fn sinogram_matrix_shape() {
        let s = Sinogram {
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            errors: vec![0.0; 6],
            offsets: vec![-1.0, 0.0, 1.0],
            angles: vec![0.0, 1.5],
            geometry: PlaneGeometry::Flat,
            plane: "p".into(),
        };
        let mut buf = Vec::new();
        write_sinogram_matrix(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,2\n3,4\n5,6\n");
        let h = sinogram_header(&s);
        assert_eq!(h["shape"], json!([3, 2]));
        assert_eq!(h["geometry"], json!("flat"));
    }

    #[test]
    fn pgm_header_and_size() {
        let img = Image { grid: ImageGrid::new(2, 1.0), values: vec![0.0, 1.0, 2.0, 3.0] };
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        let head = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..head.len()], head);
        // rows are written top (largest v) first
        assert_eq!(&buf[head.len()..], &[170, 255, 0, 85]);
    }
}
