//! KITTI velodyne `.bin` scans and calibration text files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{Calibration, Mat3x4, Mat4, Point, PointCloud};

/// Camera-2 image size assumed when the calibration file does not state one.
pub const DEFAULT_IMAGE_SIZE: (usize, usize) = (1242, 375);

/// Little-endian `f32` quadruples `(x, y, z, intensity)`.
pub fn read_kitti_bin(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Format(format!(
            "{}: size {} is not a multiple of 16 bytes",
            path.display(),
            bytes.len()
        )));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
    let points = bytes
        .chunks_exact(16)
        .map(|c| Point::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12]), f(&c[12..16])))
        .collect();
    Ok(PointCloud::new(points))
}

pub fn write_kitti_bin(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(cloud.len() * 16);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_calib(path: impl AsRef<Path>) -> Result<Calibration> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calib(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse `KEY: v v v ...` lines. Needs `P2` (3×4), `R0_rect` (3×3) and
/// `Tr_velo_to_cam` (3×4); an optional `S_rect_02` gives `width height`.
pub fn parse_calib(text: &str) -> Result<Calibration> {
    let lookup = |key: &str| -> Result<Option<Vec<f64>>> {
        for line in text.lines() {
            let Some((k, rest)) = line.split_once(':') else {
                continue;
            };
            if k.trim() != key {
                continue;
            }
            return rest
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Format(format!("{key}: bad number {t:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some);
        }
        Ok(None)
    };
    let required = |key: &str, n: usize| -> Result<Vec<f64>> {
        let v = lookup(key)?.ok_or_else(|| Error::Format(format!("missing key {key}")))?;
        if v.len() != n {
            return Err(Error::Format(format!("{key}: expected {n} values, got {}", v.len())));
        }
        Ok(v)
    };

    let p2 = required("P2", 12)?;
    let r0 = required("R0_rect", 9)?;
    let tr = required("Tr_velo_to_cam", 12)?;
    let (w, h) = match lookup("S_rect_02")? {
        None => DEFAULT_IMAGE_SIZE,
        Some(v) if v.len() == 2 && v.iter().all(|x| *x >= 1.0 && x.fract() == 0.0) => {
            (v[0] as usize, v[1] as usize)
        }
        Some(v) => return Err(Error::Format(format!("S_rect_02: bad image size {v:?}"))),
    };

    let mut p: Mat3x4 = [[0.0; 4]; 3];
    let mut r: Mat4 = [[0.0; 4]; 4];
    let mut t: Mat4 = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..4 {
            p[i][j] = p2[i * 4 + j];
            t[i][j] = tr[i * 4 + j];
        }
        for j in 0..3 {
            r[i][j] = r0[i * 3 + j];
        }
    }
    r[3][3] = 1.0;
    t[3][3] = 1.0;
    Calibration::new(p, r, t, w, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KITTI: &str = "\
P0: 7.215377e+02 0.000000e+00 6.095593e+02 0.000000e+00 0.000000e+00 7.215377e+02 1.728540e+02 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00
P2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 0.000000e+00 7.215377e+02 1.728540e+02 2.163791e-01 0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03
R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01
Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01
Tr_imu_to_velo: 9.999976e-01 7.553071e-04 -2.035826e-03 -8.086759e-01 -7.854027e-04 9.998898e-01 -1.482298e-02 3.195559e-01 2.024406e-03 1.482454e-02 9.998881e-01 -7.997231e-01
";

    #[test]
    fn kitti_fixture() {
        let c = parse_calib(KITTI).unwrap();
        assert_eq!(c.p[0][3], 44.85728);
        assert_eq!(c.p[2][3], 2.745884e-3);
        assert_eq!(c.r[1][0], -9.869795e-3);
        assert_eq!(c.r[3], [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(c.r[0][3], 0.0);
        assert_eq!(c.t[2][3], -2.717806e-1);
        assert_eq!(c.t[0][1], -9.999714e-1);
        assert_eq!((c.image_width, c.image_height), DEFAULT_IMAGE_SIZE);
    }

    #[test]
    fn identity_fixture() {
        let text = "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n\
                    Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\nS_rect_02: 64 32\n";
        let c = parse_calib(text).unwrap();
        assert_eq!(c, Calibration::identity(64, 32));
    }

    #[test]
    fn missing_key_named() {
        let text = KITTI.replace("R0_rect", "R1_rect");
        let err = parse_calib(&text).unwrap_err().to_string();
        assert!(err.contains("R0_rect"), "{err}");
        let text = KITTI.replace("Tr_velo_to_cam: 7.533745e-03", "Tr_velo_to_cam: x");
        assert!(parse_calib(&text).is_err());
    }

    #[test]
    fn bin_fixture_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.bin");
        let mut bytes = Vec::new();
        for v in [1.5f32, -2.0, 0.25, 0.5, 10.0, 20.0, -1.0, 1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let c = read_kitti_bin(&path).unwrap();
        assert_eq!(
            c.points,
            vec![Point::new(1.5, -2.0, 0.25, 0.5), Point::new(10.0, 20.0, -1.0, 1.0)]
        );

        let out = dir.path().join("out.bin");
        write_kitti_bin(&out, &c).unwrap();
        assert_eq!(fs::read(&out).unwrap(), bytes);
        assert_eq!(read_kitti_bin(&out).unwrap(), c);

        fs::write(&path, b"").unwrap();
        assert!(read_kitti_bin(&path).unwrap().is_empty());
        fs::write(&path, [0u8; 17]).unwrap();
        assert!(matches!(read_kitti_bin(&path), Err(Error::Format(_))));
        let missing = dir.path().join("nope.bin");
        let err = read_kitti_bin(&missing).unwrap_err().to_string();
        assert!(err.contains("nope.bin"));
    }
}
