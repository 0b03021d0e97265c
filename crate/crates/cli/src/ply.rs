//! ASCII PLY subset: one `vertex` element with `x y z`, optional
//! `red green blue` (uchar) and optional `nx ny nz`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use wrapkit::cloud::PointCloud;
use wrapkit::geometry::Rgb;
use wrapkit::Vec3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlyError {
    #[error("{0}")]
    Io(String),
    #[error("line {line}: unsupported PLY format: {what}")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line} (data row {row}): {msg}")]
    Data { line: usize, row: usize, msg: String },
}

impl PlyError {
    /// One-based line of the problem, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            PlyError::Io(_) => None,
            PlyError::Unsupported { line, .. } | PlyError::Header { line, .. } | PlyError::Data { line, .. } => {
                Some(*line)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Prop {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Nx,
    Ny,
    Nz,
}

impl Prop {
    fn parse(name: &str) -> Option<Prop> {
        Some(match name {
            "x" => Prop::X,
            "y" => Prop::Y,
            "z" => Prop::Z,
            "red" => Prop::Red,
            "green" => Prop::Green,
            "blue" => Prop::Blue,
            "nx" => Prop::Nx,
            "ny" => Prop::Ny,
            "nz" => Prop::Nz,
            _ => return None,
        })
    }

    fn is_color(self) -> bool {
        matches!(self, Prop::Red | Prop::Green | Prop::Blue)
    }
}

/// Parses PLY text.
pub fn parse_ply_str(text: &str) -> Result<PointCloud<f64>, PlyError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header_err = |line: usize, msg: &str| PlyError::Header { line, msg: msg.to_string() };

    match lines.next() {
        Some((_, "ply")) => {}
        Some((line, _)) => return Err(header_err(line, "missing 'ply' magic")),
        None => return Err(header_err(1, "empty file")),
    }

    let mut count: Option<usize> = None;
    let mut props: Vec<Prop> = Vec::new();
    let mut last_line = 1;
    let mut ended = false;
    for (line, raw) in lines.by_ref() {
        last_line = line;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", "ascii", "1.0"] => {}
            ["format", fmt, ..] => {
                return Err(PlyError::Unsupported { line, what: format!("format {fmt}") });
            }
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(header_err(line, "duplicate vertex element"));
                }
                count = Some(n.parse().map_err(|_| header_err(line, &format!("invalid vertex count '{n}'")))?);
            }
            ["element", name, ..] => {
                return Err(PlyError::Unsupported { line, what: format!("element '{name}'") });
            }
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(header_err(line, "property before element"));
                }
                let prop = Prop::parse(name)
                    .ok_or_else(|| PlyError::Unsupported { line, what: format!("property '{name}'") })?;
                let ty_ok = if prop.is_color() {
                    matches!(*ty, "uchar" | "uint8")
                } else {
                    matches!(*ty, "float" | "double" | "float32" | "float64")
                };
                if !ty_ok {
                    return Err(PlyError::Unsupported { line, what: format!("type '{ty}' for property '{name}'") });
                }
                if props.contains(&prop) {
                    return Err(header_err(line, &format!("duplicate property '{name}'")));
                }
                props.push(prop);
            }
            ["property", "list", ..] => {
                return Err(PlyError::Unsupported { line, what: "list property".to_string() });
            }
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(header_err(line, &format!("unrecognized header line '{raw}'"))),
        }
    }
    if !ended {
        return Err(header_err(last_line, "missing end_header"));
    }
    let count = count.ok_or_else(|| header_err(last_line, "missing vertex element"))?;
    let has = |p: Prop| props.contains(&p);
    if !(has(Prop::X) && has(Prop::Y) && has(Prop::Z)) {
        return Err(header_err(last_line, "vertex element needs x, y and z"));
    }
    let colors = [Prop::Red, Prop::Green, Prop::Blue].map(has);
    if colors.iter().any(|&c| c) && !colors.iter().all(|&c| c) {
        return Err(header_err(last_line, "colors need red, green and blue"));
    }
    let normals = [Prop::Nx, Prop::Ny, Prop::Nz].map(has);
    if normals.iter().any(|&c| c) && !normals.iter().all(|&c| c) {
        return Err(header_err(last_line, "normals need nx, ny and nz"));
    }
    let with_colors = colors[0];
    let with_normals = normals[0];

    let mut points = Vec::with_capacity(count);
    let mut cols = Vec::with_capacity(if with_colors { count } else { 0 });
    let mut norms = Vec::with_capacity(if with_normals { count } else { 0 });
    let mut row = 0;
    let mut data_line = last_line;
    for (line, raw) in lines {
        data_line = line;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        row += 1;
        if row > count {
            return Err(PlyError::Data { line, row, msg: format!("more data rows than the declared {count}") });
        }
        if tokens.len() != props.len() {
            return Err(PlyError::Data {
                line,
                row,
                msg: format!("expected {} values, found {}", props.len(), tokens.len()),
            });
        }
        let mut p = Vec3::zeros();
        let mut c = [0u8; 3];
        let mut n = Vec3::zeros();
        for (tok, prop) in tokens.iter().zip(&props) {
            let bad = |what: &str| PlyError::Data { line, row, msg: format!("invalid {what} '{tok}'") };
            if prop.is_color() {
                let v: u8 = tok.parse().map_err(|_| bad("color"))?;
                match prop {
                    Prop::Red => c[0] = v,
                    Prop::Green => c[1] = v,
                    _ => c[2] = v,
                }
            } else {
                let v: f64 = tok.parse().map_err(|_| bad("number"))?;
                if !v.is_finite() {
                    return Err(bad("number"));
                }
                match prop {
                    Prop::X => p.x = v,
                    Prop::Y => p.y = v,
                    Prop::Z => p.z = v,
                    Prop::Nx => n.x = v,
                    Prop::Ny => n.y = v,
                    _ => n.z = v,
                }
            }
        }
        points.push(p);
        if with_colors {
            cols.push(Rgb(c));
        }
        if with_normals {
            norms.push(n);
        }
    }
    if row < count {
        return Err(PlyError::Data {
            line: data_line + 1,
            row: row + 1,
            msg: format!("file ends after {row} of {count} data rows"),
        });
    }
    Ok(PointCloud {
        points,
        colors: with_colors.then_some(cols),
        normals: with_normals.then_some(norms),
    })
}

/// Reads a PLY file. Binary files are rejected at their `format` line.
pub fn parse_ply(path: &Path) -> Result<PointCloud<f64>, PlyError> {
    let bytes = std::fs::read(path).map_err(|e| PlyError::Io(format!("{}: {e}", path.display())))?;
    match String::from_utf8(bytes) {
        Ok(text) => parse_ply_str(&text),
        Err(e) => {
            let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
            let prefix = std::str::from_utf8(valid).expect("valid prefix");
            match parse_ply_str(prefix) {
                Err(header @ (PlyError::Unsupported { .. } | PlyError::Header { .. })) => Err(header),
                _ => Err(PlyError::Unsupported {
                    line: 1 + valid.iter().filter(|b| **b == b'\n').count(),
                    what: "non-text data".to_string(),
                }),
            }
        }
    }
}

/// PLY text of `cloud`. Coordinates use the shortest decimal form that reads
/// back to the same `f64`.
pub fn write_ply_string(cloud: &PointCloud<f64>) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 48);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = &cloud.colors {
            let [r, g, b] = c[i].0;
            let _ = write!(s, " {r} {g} {b}");
        }
        if let Some(n) = &cloud.normals {
            let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        s.push('\n');
    }
    s
}

pub fn write_ply(cloud: &PointCloud<f64>, path: &Path) -> Result<(), PlyError> {
    std::fs::write(path, write_ply_string(cloud)).map_err(|e| PlyError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud<f64> {
        let mut c = PointCloud::with_colors(
            vec![Vec3::new(0.1, -2.5e-7, 3.0), Vec3::new(1.0 / 3.0, 0.0, -0.0)],
            vec![Rgb([1, 2, 3]), Rgb([255, 0, 128])],
        )
        .unwrap();
        c.set_normals(vec![Vec3::z(), Vec3::zeros()]).unwrap();
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(parse_ply_str(&write_ply_string(&c)).unwrap(), c);
        let bare = PointCloud::new(c.points.clone());
        assert_eq!(parse_ply_str(&write_ply_string(&bare)).unwrap(), bare);
    }

    #[test]
    fn short_data_reports_missing_row() {
        let text = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n";
        match parse_ply_str(text).unwrap_err() {
            PlyError::Data { row, line, .. } => {
                assert_eq!(row, 5);
                assert_eq!(line, 12);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn binary_format_is_unsupported() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_ply_str(text), Err(PlyError::Unsupported { line: 2, .. })));
    }

    #[test]
    fn unknown_property_is_located() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n0 0 0 1\n";
        let e = parse_ply_str(text).unwrap_err();
        assert_eq!(e.line(), Some(7));
        assert!(e.to_string().contains("intensity"));
    }

    #[test]
    fn malformed_values_are_located() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n0 zero 0\n";
        let e = parse_ply_str(text).unwrap_err();
        assert!(matches!(e, PlyError::Data { line: 9, row: 2, .. }), "{e}");
        let extra = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n";
        assert!(matches!(parse_ply_str(extra), Err(PlyError::Data { line: 9, row: 2, .. })));
        assert!(matches!(parse_ply_str("solid\n"), Err(PlyError::Header { line: 1, .. })));
        assert!(matches!(parse_ply_str(""), Err(PlyError::Header { line: 1, .. })));
    }
}
