//! Wavefront OBJ reading and writing.
//!
//! Only `v`, `vt` and triangular `f` records are interpreted; other records
//! are skipped. Texture coordinates must be per-vertex: every occurrence of a
//! position index has to carry the same `vt` index.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{HalfedgeMesh, MeshError, Result};

pub fn load_obj(path: impl AsRef<Path>) -> Result<HalfedgeMesh> {
    load_obj_with_uv(path).map(|(mesh, _)| mesh)
}

/// Loads a mesh and, when the faces reference `vt` records, one texture
/// coordinate per vertex.
pub fn load_obj_with_uv(path: impl AsRef<Path>) -> Result<(HalfedgeMesh, Option<Vec<Complex64>>)> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text)
}

fn parse_index(token: &str, count: usize, line: usize) -> Result<usize> {
    let raw: i64 = token.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("bad index '{token}'"),
    })?;
    let resolved = if raw < 0 { count as i64 + raw } else { raw - 1 };
    if raw == 0 || resolved < 0 || resolved as usize >= count {
        return Err(MeshError::Parse {
            line,
            message: format!("index {raw} out of range (have {count})"),
        });
    }
    Ok(resolved as usize)
}

fn parse_floats<const N: usize>(rest: &[&str], line: usize) -> Result<[f64; N]> {
    if rest.len() < N {
        return Err(MeshError::Parse {
            line,
            message: format!("expected {N} coordinates"),
        });
    }
    let mut out = [0.0; N];
    for (slot, token) in out.iter_mut().zip(rest) {
        *slot = token.parse().map_err(|_| MeshError::Parse {
            line,
            message: format!("bad number '{token}'"),
        })?;
    }
    Ok(out)
}

pub fn parse_obj(text: &str) -> Result<(HalfedgeMesh, Option<Vec<Complex64>>)> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut texcoords: Vec<Complex64> = Vec::new();
    // (line, tokens) so indices can be resolved once all records are known
    let mut face_records: Vec<(usize, Vec<String>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&kind, rest)) = tokens.split_first() else {
            continue;
        };
        match kind {
            "v" => positions.push(parse_floats::<3>(rest, line)?),
            "vt" => {
                let [u, v] = parse_floats::<2>(rest, line)?;
                texcoords.push(Complex64::new(u, v));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("face with {} vertices; only triangles are supported", rest.len()),
                    });
                }
                face_records.push((line, rest.iter().map(|s| s.to_string()).collect()));
            }
            _ => {}
        }
    }

    let mut faces = Vec::with_capacity(face_records.len());
    let mut uv_index: Vec<Option<usize>> = vec![None; positions.len()];
    let mut any_uv = false;
    let mut all_uv = true;
    for (line, corners) in &face_records {
        let mut face = [0usize; 3];
        for (slot, corner) in face.iter_mut().zip(corners) {
            let mut parts = corner.split('/');
            let v = parse_index(parts.next().unwrap_or(""), positions.len(), *line)?;
            *slot = v;
            match parts.next().filter(|t| !t.is_empty()) {
                Some(t) => {
                    any_uv = true;
                    let vt = parse_index(t, texcoords.len(), *line)?;
                    match uv_index[v] {
                        None => uv_index[v] = Some(vt),
                        Some(prev) if prev != vt => {
                            return Err(MeshError::Parse {
                                line: *line,
                                message: format!(
                                    "vertex {} uses texture coordinates {} and {}",
                                    v + 1,
                                    prev + 1,
                                    vt + 1
                                ),
                            })
                        }
                        Some(_) => {}
                    }
                }
                None => all_uv = false,
            }
        }
        faces.push(face);
    }
    if any_uv && !all_uv {
        return Err(MeshError::Parse {
            line: 0,
            message: "some face corners lack texture coordinates".into(),
        });
    }

    let n = positions.len();
    let mesh = HalfedgeMesh::from_faces(n, faces, Some(positions))?;
    let uv = if any_uv {
        Some(
            uv_index
                .into_iter()
                .map(|t| texcoords[t.expect("every referenced vertex has a vt")])
                .collect(),
        )
    } else {
        None
    };
    Ok((mesh, uv))
}

fn fmt_float(out: &mut String, x: f64) {
    // 9 significant digits
    let _ = write!(out, "{:.8e}", x);
}

/// Serializes `mesh` (and optional per-vertex texture coordinates) as OBJ.
pub fn write_obj(mesh: &HalfedgeMesh, uv: Option<&[Complex64]>) -> String {
    let mut out = String::new();
    let n = mesh.n_vertices();
    for v in 0..n {
        let p = match mesh.positions() {
            Some(p) => p[v],
            None => match uv {
                Some(uv) => [uv[v].re, uv[v].im, 0.0],
                None => [0.0; 3],
            },
        };
        out.push('v');
        for x in p {
            out.push(' ');
            fmt_float(&mut out, x);
        }
        out.push('\n');
    }
    if let Some(uv) = uv {
        for z in uv {
            out.push_str("vt ");
            fmt_float(&mut out, z.re);
            out.push(' ');
            fmt_float(&mut out, z.im);
            out.push('\n');
        }
    }
    for face in mesh.faces() {
        out.push('f');
        for &v in face {
            if uv.is_some() {
                let _ = write!(out, " {}/{}", v + 1, v + 1);
            } else {
                let _ = write!(out, " {}", v + 1);
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_obj(mesh: &HalfedgeMesh, uv: Option<&[Complex64]>, path: impl AsRef<Path>) -> Result<()> {
    if let Some(uv) = uv {
        if uv.len() != mesh.n_vertices() {
            return Err(MeshError::Topology(format!(
                "{} texture coordinates for {} vertices",
                uv.len(),
                mesh.n_vertices()
            )));
        }
    }
    fs::write(path, write_obj(mesh, uv))?;
    Ok(())
}
