//! Surfel sets as binary little-endian PLY with custom per-vertex
//! properties, in this exact order:
//! `x y z tu_x tu_y tu_z tv_x tv_y tv_z scale_u scale_v opacity red green blue`
//! (all float32).

use super::{SplatError, SurfelPrimitive};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const PROPS: [&str; 15] = [
    "x", "y", "z", "tu_x", "tu_y", "tu_z", "tv_x", "tv_y", "tv_z", "scale_u", "scale_v",
    "opacity", "red", "green", "blue",
];

pub fn save_surfels_ply(surfels: &[SurfelPrimitive], path: &Path) -> Result<(), SplatError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        surfels.len()
    )?;
    for p in PROPS {
        writeln!(w, "property float {p}")?;
    }
    writeln!(w, "end_header")?;
    for s in surfels {
        let row = [
            s.position.x,
            s.position.y,
            s.position.z,
            s.tangent_u.x,
            s.tangent_u.y,
            s.tangent_u.z,
            s.tangent_v.x,
            s.tangent_v.y,
            s.tangent_v.z,
            s.scale_u,
            s.scale_v,
            s.opacity,
            s.color.x,
            s.color.y,
            s.color.z,
        ];
        for v in row {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

pub fn load_surfels_ply(path: &Path) -> Result<Vec<SurfelPrimitive>, SplatError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(SplatError::Parse("not a PLY file".into()));
    }
    let mut count = 0usize;
    let mut props: Vec<String> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(SplatError::Parse("unexpected end of header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "binary_little_endian", _] | ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = n
                    .parse()
                    .map_err(|_| SplatError::Parse("bad vertex count".into()))?;
            }
            ["property", "float", name] => props.push((*name).to_string()),
            ["end_header"] => break,
            _ => return Err(SplatError::Parse(format!("unsupported header line: {line}"))),
        }
    }
    if props != PROPS {
        return Err(SplatError::Parse(format!(
            "surfel PLY must carry properties {PROPS:?}, got {props:?}"
        )));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = [0f64; 15];
        for v in row.iter_mut() {
            *v = r.read_f32::<LittleEndian>()? as f64;
        }
        let mut s = SurfelPrimitive {
            position: Vector3::new(row[0], row[1], row[2]),
            tangent_u: Vector3::new(row[3], row[4], row[5]),
            tangent_v: Vector3::new(row[6], row[7], row[8]),
            scale_u: row[9],
            scale_v: row[10],
            opacity: row[11].clamp(0.0, 1.0),
            color: Vector3::new(row[12], row[13], row[14]),
        };
        // f32 storage loses a little orthonormality; restore it.
        s.rotate_frame(&Vector3::zeros());
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}
