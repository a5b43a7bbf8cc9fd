//! Pose lists: `frame_id x y z roll pitch yaw` per line, `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Pose;
use crate::error::{Error, Result};

pub fn format_poses(poses: &[(u32, Pose)]) -> String {
    let mut out = String::from("# frame_id x y z roll pitch yaw\n");
    for (id, p) in poses {
        writeln!(out, "{id} {} {} {} {} {} {}", p.x, p.y, p.z, p.roll, p.pitch, p.yaw).unwrap();
    }
    out
}

pub fn parse_poses(text: &str, path: &Path) -> Result<Vec<(u32, Pose)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |why: &str| Error::malformed(path, format!("line {}: {why}", lineno + 1));
        if fields.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let id: u32 = fields[0].parse().map_err(|_| bad("bad frame id"))?;
        let v: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad number"))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite value"));
        }
        out.push((id, Pose::new(v[0], v[1], v[2], v[3], v[4], v[5])));
    }
    Ok(out)
}

pub fn write_poses(path: impl AsRef<Path>, poses: &[(u32, Pose)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_poses(poses)).map_err(|e| Error::io(path, e))
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<(u32, Pose)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text, path)
}
