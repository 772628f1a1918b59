//! Named parameter arrays and their binary container.
//!
//! File layout (little-endian): `"DPNW"`, version `u32 = 1`, entry count
//! `u32`, then per entry a `u16` path length, the UTF-8 path, a `u8` rank,
//! `rank` dimensions as `u32`, and the values as IEEE-754 `f32` in row-major
//! order. Biases are separate entries whose path ends in `/bias`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::NetworkSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPNW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl Param {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != values.len() {
            return Err(Error::Weights(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        Ok(Param { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Param {
            dims,
            values: vec![0.0; n],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Weights {
    entries: BTreeMap<String, Param>,
}

pub fn bias_path(path: &str) -> String {
    format!("{path}/bias")
}

impl Weights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, param: Param) {
        self.entries.insert(path.into(), param);
    }

    pub fn get(&self, path: &str) -> Option<&Param> {
        self.entries.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Param> {
        self.entries.get_mut(path)
    }

    pub fn remove(&mut self, path: &str) -> Option<Param> {
        self.entries.remove(path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    /// Every tap and bias set to zero.
    pub fn zeros(net: &NetworkSpec) -> Self {
        let mut w = Weights::new();
        for p in net.params() {
            w.insert(p.path.clone(), Param::zeros(p.kind.tap_dims()));
            w.insert(bias_path(&p.path), Param::zeros(vec![p.kind.bias_len()]));
        }
        w
    }

    /// Deterministic initialization: taps uniform in `±1/sqrt(fan_in)`,
    /// biases uniform in `±0.05`.
    pub fn random_init(net: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Weights::new();
        for p in net.params() {
            let dims = p.kind.tap_dims();
            let n: usize = dims.iter().product();
            let scale = 1.0 / (p.kind.fan_in() as f32).sqrt();
            let taps = (0..n).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect();
            let bias = (0..p.kind.bias_len())
                .map(|_| rng.gen_range(-0.05f32..0.05))
                .collect();
            w.insert(p.path.clone(), Param { dims, values: taps });
            w.insert(
                bias_path(&p.path),
                Param {
                    dims: vec![p.kind.bias_len()],
                    values: bias,
                },
            );
        }
        w
    }

    /// Check that every parameter of `net` is present with the right shape.
    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        for p in net.params() {
            for (path, dims) in [
                (p.path.clone(), p.kind.tap_dims()),
                (bias_path(&p.path), vec![p.kind.bias_len()]),
            ] {
                match self.get(&path) {
                    None => return Err(Error::Weights(format!("missing layer {path}"))),
                    Some(param) if param.dims != dims => {
                        return Err(Error::Weights(format!(
                            "layer {path} has shape {:?}, expected {dims:?}",
                            param.dims
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (path, param) in &self.entries {
            out.extend_from_slice(&(path.len() as u16).to_le_bytes());
            out.extend_from_slice(path.as_bytes());
            out.push(param.dims.len() as u8);
            for &d in &param.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &param.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("weight file: bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "weight file: unsupported version {version}"
            )));
        }
        let count = r.u32()?;
        let mut w = Weights::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let path = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("weight file: path is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| {
                Error::Format(format!("weight file: {path} dims overflow"))
            })?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            w.insert(path, Param { dims, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "weight file: {} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(w)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            }),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn save_weights(w: &Weights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&w.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Weights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Weights::from_bytes(&bytes)
}

/// Load and validate against `net`.
pub fn load_weights_for(path: impl AsRef<Path>, net: &NetworkSpec) -> Result<Weights> {
    let w = load_weights(path)?;
    w.validate(net)?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::spec::build_depthnet_sized;

    fn small(ds: bool) -> NetworkSpec {
        build_depthnet_sized(ds, 16, 32).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let net = small(true);
        let w = Weights::random_init(&net, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dpnw");
        save_weights(&w, &path).unwrap();
        let back = load_weights_for(&path, &net).unwrap();
        assert_eq!(back, w);
        for (a, b) in w.iter().zip(back.iter()) {
            for (x, y) in a.1.values.iter().zip(&b.1.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let w = Weights::random_init(&small(false), 1);
        let mut bytes = w.to_bytes();
        let good = bytes.clone();
        bytes[0] = b'X';
        assert!(matches!(Weights::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(matches!(
            Weights::from_bytes(&good[..good.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(Weights::from_bytes(&bad_version).is_err());
    }

    #[test]
    fn missing_layer_is_named() {
        let net = small(true);
        let mut w = Weights::random_init(&net, 1);
        w.remove("e3/conv_a_extra/bias");
        let bytes = w.to_bytes();
        let back = Weights::from_bytes(&bytes).unwrap();
        let err = back.validate(&net).unwrap_err().to_string();
        assert!(err.contains("e3/conv_a_extra/bias"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = small(false);
        let mut w = Weights::random_init(&net, 1);
        w.insert("d1/conv", Param::zeros(vec![3, 3, 64, 63]));
        let err = w.validate(&net).unwrap_err().to_string();
        assert!(err.contains("d1/conv"), "{err}");
        // separable weights do not satisfy the standard network
        assert!(Weights::random_init(&small(true), 1).validate(&net).is_err());
    }

    #[test]
    fn seeds() {
        let net = small(false);
        assert_eq!(Weights::random_init(&net, 9), Weights::random_init(&net, 9));
        assert_ne!(Weights::random_init(&net, 9), Weights::random_init(&net, 10));
    }

    #[test]
    fn tap_scale() {
        let net = small(false);
        let w = Weights::random_init(&net, 2);
        let p = w.get("e4/conv_d").unwrap();
        let bound = 1.0 / ((9 * 128) as f32).sqrt();
        assert!(p.values.iter().all(|v| v.abs() <= bound));
    }
}
