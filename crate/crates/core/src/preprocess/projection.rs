use super::{DepthMap, MapRole, PointCloud};
use crate::error::{Error, Result};

pub type Mat3x4 = [[f64; 4]; 3];
pub type Mat4 = [[f64; 4]; 4];

pub const IDENTITY4: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Camera projection `P`, rectification `R` and LiDAR-to-camera transform
/// `T`, plus the image size the projection targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub p: Mat3x4,
    pub r: Mat4,
    pub t: Mat4,
    pub image_width: usize,
    pub image_height: usize,
}

impl Calibration {
    pub fn new(p: Mat3x4, r: Mat4, t: Mat4, image_width: usize, image_height: usize) -> Result<Self> {
        let c = Calibration {
            p,
            r,
            t,
            image_width,
            image_height,
        };
        c.validate()?;
        Ok(c)
    }

    /// `P = [I | 0]`, `R = T = I`: camera coordinates are LiDAR coordinates.
    pub fn identity(image_width: usize, image_height: usize) -> Self {
        let mut p = [[0.0; 4]; 3];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Calibration {
            p,
            r: IDENTITY4,
            t: IDENTITY4,
            image_width,
            image_height,
        }
    }

    /// KITTI camera-2 intrinsics with the usual velodyne-to-camera axis swap
    /// (x forward, y left, z up becomes z forward, x right, y down).
    pub fn kitti_like(image_width: usize, image_height: usize) -> Self {
        let p = [
            [721.5377, 0.0, 609.5593, 0.0],
            [0.0, 721.5377, 172.854, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ];
        let t = [
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        Calibration {
            p,
            r: IDENTITY4,
            t,
            image_width,
            image_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("R", &self.r), ("T", &self.t)] {
            if m[3] != [0.0, 0.0, 0.0, 1.0] {
                return Err(Error::Calibration(format!(
                    "{name} bottom row must be 0 0 0 1, got {:?}",
                    m[3]
                )));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Calibration(format!("{name} has non-finite entries")));
            }
        }
        if det3(&block3(&self.t)).abs() < 1e-12 {
            return Err(Error::Calibration("T is not invertible".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Calibration("image size must be non-zero".into()));
        }
        Ok(())
    }

    /// The combined `P · R · T`.
    pub fn matrix(&self) -> Mat3x4 {
        let rt = mul4(&self.r, &self.t);
        let mut m = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| self.p[i][k] * rt[k][j]).sum();
            }
        }
        m
    }

    /// Homogeneous image coordinates `(px, py, pz)` of a LiDAR point.
    pub fn apply(&self, m: &Mat3x4, x: f64, y: f64, z: f64) -> [f64; 3] {
        let row = |r: &[f64; 4]| r[0] * x + r[1] * y + r[2] * z + r[3];
        [row(&m[0]), row(&m[1]), row(&m[2])]
    }

    /// Inverse of the projection: the LiDAR point seen at subpixel `(u, v)`
    /// with camera depth `depth_m`.
    pub fn unproject(&self, u: f64, v: f64, depth_m: f64) -> Result<[f64; 3]> {
        let m = self.matrix();
        let a = block3_of(&m);
        let inv = inverse3(&a)
            .ok_or_else(|| Error::Calibration("projection is singular".into()))?;
        let rhs = [
            u * depth_m - m[0][3],
            v * depth_m - m[1][3],
            depth_m - m[2][3],
        ];
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| inv[i][k] * rhs[k]).sum();
        }
        Ok(out)
    }
}

fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn block3(m: &Mat4) -> [[f64; 3]; 3] {
    [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ]
}

fn block3_of(m: &Mat3x4) -> [[f64; 3]; 3] {
    [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ]
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn inverse3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let d = det3(a);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
        }
    }
    Some(inv)
}

/// Project a cloud into a sparse depth map at the calibration's image size.
/// A point lands on pixel `(floor(v), floor(u))`; the nearest point wins.
pub fn project(cloud: &PointCloud, calib: &Calibration) -> Result<DepthMap> {
    calib.validate()?;
    let m = calib.matrix();
    let (w, h) = (calib.image_width, calib.image_height);
    let mut map = DepthMap::empty(h, w, MapRole::Sparse);
    for p in &cloud.points {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            continue;
        }
        let [px, py, pz] = calib.apply(&m, p.x, p.y, p.z);
        if pz.is_nan() || pz <= 0.0 {
            continue;
        }
        let (u, v) = ((px / pz).floor(), (py / pz).floor());
        if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
            continue;
        }
        let mm = (pz * 1000.0).round().min(u32::MAX as f64) as u32;
        if mm == 0 {
            continue;
        }
        let (row, col) = (v as usize, u as usize);
        let cur = map.get(row, col);
        if cur == 0 || mm < cur {
            map.set(row, col, mm);
        }
    }
    Ok(map)
}
