//! KITTI velodyne `.bin` records: four little-endian `f32` per point (x, y, z, reflectance).

use std::fs;
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 16;

/// Decode a packed scan. Reflectance is dropped.
pub fn decode_scan(bytes: &[u8]) -> Option<Vec<Point3>> {
    if bytes.len() % RECORD_BYTES != 0 {
        return None;
    }
    let points = bytes
        .chunks_exact(RECORD_BYTES)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
            Point3::new(f(0) as f64, f(1) as f64, f(2) as f64)
        })
        .collect();
    Some(points)
}

pub fn encode_scan(points: &[Point3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * RECORD_BYTES);
    for p in points {
        for v in [p.x as f32, p.y as f32, p.z as f32, 0.0f32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_kitti_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    load_kitti_scan_as(path, 0, 0.0)
}

pub fn load_kitti_scan_as(path: impl AsRef<Path>, frame_id: u32, timestamp: f64) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let points = decode_scan(&bytes).ok_or_else(|| {
        Error::malformed(
            path,
            format!("length {} is not a multiple of {RECORD_BYTES}", bytes.len()),
        )
    })?;
    if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::malformed(path, format!("non-finite point at record {bad}")));
    }
    Ok(PointCloud::new(frame_id, timestamp, points))
}

pub fn write_kitti_scan(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scan(&cloud.points)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(v: [f32; 4]) -> Vec<u8> {
        v.iter().flat_map(|f| f.to_le_bytes()).collect()
    }

    #[test]
    fn empty_file_is_empty_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        fs::write(&p, []).unwrap();
        assert!(load_kitti_scan(&p).unwrap().is_empty());
    }

    #[test]
    fn single_record_decodes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        fs::write(&p, record([1.0, 2.0, 3.0, 0.5])).unwrap();
        let cloud = load_kitti_scan(&p).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn twenty_bytes_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        fs::write(&p, [0u8; 20]).unwrap();
        assert!(matches!(load_kitti_scan(&p), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn missing_path_is_io_error() {
        assert!(matches!(
            load_kitti_scan("/nonexistent/scan.bin"),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(pts in prop::collection::vec((-100f32..100.0, -100f32..100.0, -5f32..5.0), 0..64)) {
            let points: Vec<Point3> = pts.iter().map(|&(x, y, z)| Point3::new(x as f64, y as f64, z as f64)).collect();
            let decoded = decode_scan(&encode_scan(&points)).unwrap();
            prop_assert_eq!(decoded, points);
        }
    }
}
