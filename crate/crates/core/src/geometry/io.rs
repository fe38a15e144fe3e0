//! Mesh I/O (PLY binary little-endian and ASCII, OBJ) and pose lists as
//! JSON documents of row-major 4x4 matrices.

use super::{GeometryError, Pose, TriangleMesh};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn save_mesh_ply(mesh: &TriangleMesh, path: &Path) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let has_normals = mesh.vertex_normals.is_some();
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertices.len()
    )?;
    if has_normals {
        write!(w, "property float nx\nproperty float ny\nproperty float nz\n")?;
    }
    write!(
        w,
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.faces.len()
    )?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in 0..3 {
            w.write_f32::<LittleEndian>(v[c] as f32)?;
        }
        if let Some(normals) = &mesh.vertex_normals {
            for c in 0..3 {
                w.write_f32::<LittleEndian>(normals[i][c] as f32)?;
            }
        }
    }
    for f in &mesh.faces {
        w.write_u8(3)?;
        for &vi in f {
            w.write_i32::<LittleEndian>(vi as i32)?;
        }
    }
    Ok(())
}

pub fn save_mesh_ply_ascii(mesh: &TriangleMesh, path: &Path) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x as f32, v.y as f32, v.z as f32)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

struct PlyHeader {
    ascii: bool,
    vertex_count: usize,
    face_count: usize,
    vertex_props: Vec<String>,
}

fn parse_ply_header<R: BufRead>(r: &mut R) -> Result<PlyHeader, GeometryError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(GeometryError::Parse("not a PLY file".into()));
    }
    let mut ascii = true;
    let mut vertex_count = 0;
    let mut face_count = 0;
    let mut vertex_props = Vec::new();
    let mut current = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(GeometryError::Parse("unexpected end of PLY header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => ascii = true,
            ["format", "binary_little_endian", _] => ascii = false,
            ["format", other, _] => {
                return Err(GeometryError::Parse(format!("unsupported PLY format {other}")))
            }
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                vertex_count = n
                    .parse()
                    .map_err(|_| GeometryError::Parse("bad vertex count".into()))?;
                current = "vertex".into();
            }
            ["element", "face", n] => {
                face_count = n
                    .parse()
                    .map_err(|_| GeometryError::Parse("bad face count".into()))?;
                current = "face".into();
            }
            ["element", other, _] => {
                return Err(GeometryError::Parse(format!("unsupported element {other}")))
            }
            ["property", "float", name] if current == "vertex" => {
                vertex_props.push((*name).to_string());
            }
            ["property", "list", ..] => {}
            ["property", ..] => {
                return Err(GeometryError::Parse("unsupported property type".into()))
            }
            ["end_header"] => break,
            _ => return Err(GeometryError::Parse(format!("bad header line: {line}"))),
        }
    }
    Ok(PlyHeader {
        ascii,
        vertex_count,
        face_count,
        vertex_props,
    })
}

pub fn load_mesh_ply(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let header = parse_ply_header(&mut r)?;
    let np = header.vertex_props.len();
    let xi = header.vertex_props.iter().position(|p| p == "x");
    let (Some(xi), true) = (xi, np >= 3) else {
        return Err(GeometryError::Parse("PLY lacks xyz properties".into()));
    };
    let ni = header.vertex_props.iter().position(|p| p == "nx");
    let mut vertices = Vec::with_capacity(header.vertex_count);
    let mut normals = Vec::new();
    let mut faces = Vec::with_capacity(header.face_count);
    if header.ascii {
        let mut line = String::new();
        for _ in 0..header.vertex_count {
            line.clear();
            r.read_line(&mut line)?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| GeometryError::Parse("bad float".into())))
                .collect::<Result<_, _>>()?;
            if vals.len() < np {
                return Err(GeometryError::Parse("short vertex row".into()));
            }
            vertices.push(Vector3::new(vals[xi], vals[xi + 1], vals[xi + 2]));
            if let Some(ni) = ni {
                normals.push(Vector3::new(vals[ni], vals[ni + 1], vals[ni + 2]));
            }
        }
        for _ in 0..header.face_count {
            line.clear();
            r.read_line(&mut line)?;
            let vals: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| GeometryError::Parse("bad index".into())))
                .collect::<Result<_, _>>()?;
            if vals.is_empty() || vals[0] != vals.len() - 1 {
                return Err(GeometryError::Parse("bad face row".into()));
            }
            // Fan-triangulate polygons.
            for k in 2..vals[0] {
                faces.push([vals[1], vals[k], vals[k + 1]]);
            }
        }
    } else {
        let mut row = vec![0f32; np];
        for _ in 0..header.vertex_count {
            for v in row.iter_mut() {
                *v = r.read_f32::<LittleEndian>()?;
            }
            vertices.push(Vector3::new(
                row[xi] as f64,
                row[xi + 1] as f64,
                row[xi + 2] as f64,
            ));
            if let Some(ni) = ni {
                normals.push(Vector3::new(
                    row[ni] as f64,
                    row[ni + 1] as f64,
                    row[ni + 2] as f64,
                ));
            }
        }
        for _ in 0..header.face_count {
            let n = r.read_u8()? as usize;
            let mut idx = Vec::with_capacity(n);
            for _ in 0..n {
                idx.push(r.read_i32::<LittleEndian>()? as usize);
            }
            for k in 1..n.saturating_sub(1) {
                faces.push([idx[0], idx[k], idx[k + 1]]);
            }
        }
        // Binary payload must be fully consumed.
        let mut sink = [0u8; 1];
        if r.read(&mut sink)? != 0 {
            return Err(GeometryError::Parse("trailing bytes after PLY payload".into()));
        }
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if normals.is_empty() {
        Ok(mesh)
    } else {
        mesh.with_vertex_normals(normals)
    }
}

pub fn save_mesh_obj(mesh: &TriangleMesh, path: &Path) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn load_mesh_obj(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for line in r.lines() {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["v", x, y, z, ..] => {
                let parse = |t: &str| {
                    t.parse::<f64>()
                        .map_err(|_| GeometryError::Parse(format!("bad OBJ float: {t}")))
                };
                vertices.push(Vector3::new(parse(x)?, parse(y)?, parse(z)?));
            }
            ["f", rest @ ..] if rest.len() >= 3 => {
                let mut idx = Vec::with_capacity(rest.len());
                for t in rest {
                    // "i", "i/j", "i/j/k" forms; indices are 1-based.
                    let head = t.split('/').next().unwrap_or("");
                    let i: isize = head
                        .parse()
                        .map_err(|_| GeometryError::Parse(format!("bad OBJ index: {t}")))?;
                    let i = if i < 0 {
                        vertices.len() as isize + i
                    } else {
                        i - 1
                    };
                    if i < 0 {
                        return Err(GeometryError::Parse("negative OBJ index".into()));
                    }
                    idx.push(i as usize);
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[derive(Serialize, Deserialize)]
struct PoseDocument {
    /// Row-major 4x4 camera-to-world matrices.
    poses: Vec<Vec<f64>>,
}

pub fn save_poses_json(poses: &[Pose], path: &Path) -> Result<(), GeometryError> {
    let doc = PoseDocument {
        poses: poses.iter().map(|p| p.to_matrix().to_vec()).collect(),
    };
    let json = serde_json::to_string_pretty(&doc).expect("pose document serializes");
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_poses_json(path: &Path) -> Result<Vec<Pose>, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    let doc: PoseDocument =
        serde_json::from_str(&text).map_err(|e| GeometryError::Parse(e.to_string()))?;
    doc.poses
        .iter()
        .map(|m| {
            let arr: [f64; 16] = m
                .as_slice()
                .try_into()
                .map_err(|_| GeometryError::Parse("pose matrix must have 16 entries".into()))?;
            Pose::from_matrix(&arr)
        })
        .collect()
}
