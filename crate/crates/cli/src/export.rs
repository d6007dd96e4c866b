//! Field files: legacy ASCII VTK and plain CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thermotopo::{DensityField, Mesh, ScalarField};

use crate::error::CliError;

/// Where the samples of a field live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Cell,
    Point,
}

/// Borrowed view of a per-element or per-node field.
#[derive(Clone, Copy, Debug)]
pub struct FieldRef<'a> {
    pub location: Location,
    pub values: &'a [f64],
}

impl<'a> From<&'a DensityField> for FieldRef<'a> {
    fn from(f: &'a DensityField) -> Self {
        FieldRef {
            location: Location::Cell,
            values: f.values(),
        }
    }
}

impl<'a> From<&'a ScalarField> for FieldRef<'a> {
    fn from(f: &'a ScalarField) -> Self {
        FieldRef {
            location: Location::Point,
            values: f.values(),
        }
    }
}

impl FieldRef<'_> {
    pub fn check(&self, mesh: &Mesh) -> Result<(), CliError> {
        let want = match self.location {
            Location::Cell => mesh.n_elems(),
            Location::Point => mesh.n_nodes(),
        };
        if self.values.len() != want {
            return Err(thermotopo::Error::SizeMismatch {
                what: "exported field",
                expected: want,
                got: self.values.len(),
            }
            .into());
        }
        Ok(())
    }

    /// Coordinates of sample `i`: element centroid or node position.
    pub fn coords(&self, mesh: &Mesh, i: usize) -> [f64; 2] {
        match self.location {
            Location::Cell => mesh.elem_centroid(i),
            Location::Point => mesh.node_coords(i),
        }
    }

    /// Per-element values, averaging the four nodes for point data.
    pub fn per_element(&self, mesh: &Mesh) -> Vec<f64> {
        match self.location {
            Location::Cell => self.values.to_vec(),
            Location::Point => (0..mesh.n_elems())
                .map(|e| {
                    mesh.elem_nodes(e)
                        .iter()
                        .map(|&n| self.values[n])
                        .sum::<f64>()
                        / 4.0
                })
                .collect(),
        }
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// STRUCTURED_POINTS dataset with one scalar array, values in shortest
/// round-trip form.
pub fn vtk_string(mesh: &Mesh, field: FieldRef<'_>, name: &str) -> Result<String, CliError> {
    field.check(mesh)?;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "thermotopo {name}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", mesh.nx() + 1, mesh.ny() + 1);
    s.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(s, "SPACING {} {} 1", mesh.dx(), mesh.dy());
    let kind = match field.location {
        Location::Cell => "CELL_DATA",
        Location::Point => "POINT_DATA",
    };
    let _ = writeln!(s, "{kind} {}", field.values.len());
    let _ = writeln!(s, "SCALARS {name} double 1");
    s.push_str("LOOKUP_TABLE default\n");
    for v in field.values {
        let _ = writeln!(s, "{v}");
    }
    Ok(s)
}

pub fn export_vtk(
    mesh: &Mesh,
    field: FieldRef<'_>,
    name: &str,
    path: &Path,
) -> Result<(), CliError> {
    write_file(path, vtk_string(mesh, field, name)?)
}

/// Header `x,y,value`, then one row per sample in row-major order.
pub fn csv_string(mesh: &Mesh, field: FieldRef<'_>) -> Result<String, CliError> {
    field.check(mesh)?;
    let mut s = String::from("x,y,value\n");
    for (i, v) in field.values.iter().enumerate() {
        let [x, y] = field.coords(mesh, i);
        let _ = writeln!(s, "{x},{y},{v}");
    }
    Ok(s)
}

pub fn export_csv(mesh: &Mesh, field: FieldRef<'_>, path: &Path) -> Result<(), CliError> {
    write_file(path, csv_string(mesh, field)?)
}

/// Reads back the `value` column of a file written by [`export_csv`].
pub fn read_csv_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize| CliError::Parse {
        line,
        column: 0,
        message: format!("{}: malformed field row", path.display()),
    };
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value") {
        return Err(bad(1));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad(i + 2))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_density_csv_has_four_rows() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let theta = DensityField::new(&mesh, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = csv_string(&mesh, (&theta).into()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines[1], "0.25,0.25,0.1");
        assert_eq!(lines[2], "0.75,0.25,0.2");
    }

    #[test]
    fn constant_field_vtk_range() {
        let mesh = Mesh::build_grid(3, 4, 2.0, 1.0).unwrap();
        let t = ScalarField::uniform(&mesh, 412.5);
        let s = vtk_string(&mesh, (&t).into(), "temperature").unwrap();
        assert!(s.contains("DIMENSIONS 4 5 1"));
        assert!(s.contains("POINT_DATA 20"));
        let body = s.split("LOOKUP_TABLE default\n").nth(1).unwrap();
        let vals: Vec<f64> = body.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals.len(), 20);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (412.5, 412.5));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0).unwrap();
        let f = FieldRef {
            location: Location::Cell,
            values: &[1.0; 5],
        };
        assert!(csv_string(&mesh, f).is_err());
    }
}
