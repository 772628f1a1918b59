//! 16-bit binary PGM (P5, maxval 65535) depth images. A pixel stores
//! `round(mm · 256 / 1000)`, the KITTI depth-PNG scaling; 0 is invalid.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{DepthMap, MapRole};

pub fn mm_to_pixel(mm: u32) -> u16 {
    let v = (mm as u64 * 256 + 500) / 1000;
    v.min(u16::MAX as u64) as u16
}

pub fn pixel_to_mm(px: u16) -> u32 {
    ((px as u64 * 1000 + 128) / 256) as u32
}

pub fn encode_pgm(m: &DepthMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", m.width(), m.height()).into_bytes();
    out.reserve(m.values().len() * 2);
    for &v in m.values() {
        out.extend_from_slice(&mm_to_pixel(v).to_be_bytes());
    }
    out
}

/// `(height, width, pixels)` with raw 16-bit pixel values, row-major.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("pgm: truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::Format(format!("pgm: expected P5, got {}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("pgm: bad header field {s:?}")))
    };
    let (w, h, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if max != 65535 {
        return Err(Error::Format(format!("pgm: expected maxval 65535, got {max}")));
    }
    let need = w * h * 2;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < need {
        return Err(Error::Truncated {
            expected: pos + need,
            actual: bytes.len(),
        });
    }
    let px = data[..need]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((h, w, px))
}

pub fn write_pgm(path: impl AsRef<Path>, m: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(m)).map_err(|e| Error::io(path, e))
}

/// Read back as millimeters (quantized to 1000/256 mm).
pub fn read_pgm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, w, px) = decode_pgm(&bytes)?;
    DepthMap::new(h, w, px.into_iter().map(pixel_to_mm).collect(), MapRole::Dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaling() {
        assert_eq!(mm_to_pixel(0), 0);
        assert_eq!(mm_to_pixel(1000), 256);
        assert_eq!(mm_to_pixel(20_000), 5120);
        assert_eq!(mm_to_pixel(2), 1); // 0.512 rounds up
        assert_eq!(mm_to_pixel(1), 0); // 0.256
        assert_eq!(mm_to_pixel(10_000_000), u16::MAX);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        let m = DepthMap::new(2, 3, vec![0, 1000, 20_000, 5_500, 80_000, 1], MapRole::Dense).unwrap();
        write_pgm(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n65535\n"));
        assert_eq!(bytes.len(), 13 + 12);
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.values(), &[0, 1000, 20_000, 5_500, 80_000, 0]);
    }

    #[test]
    fn header_errors() {
        assert!(decode_pgm(b"P2\n1 1\n65535\n00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n65535\n00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n255\n0").is_err());
        assert_eq!(decode_pgm(b"P5 # c\n1 1\n65535\n\x01\x02").unwrap().2, vec![0x0102]);
    }

    proptest! {
        #[test]
        fn mm_round_trip_within_half_step(mm in 0u32..250_000) {
            let back = pixel_to_mm(mm_to_pixel(mm));
            prop_assert!((back as f64 - mm as f64).abs() <= 1000.0 / 512.0 + 0.5);
        }
    }
}
