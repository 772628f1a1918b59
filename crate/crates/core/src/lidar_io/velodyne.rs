//! VLP-16 single-return data packets.
//!
//! Wire layout, 1206 bytes: 12 blocks of { flag `FF EE`, azimuth `u16` in
//! hundredths of a degree, 32 × { distance `u16` in 2 mm units,
//! reflectivity `u8` } }, then a `u32` timestamp in microseconds and two
//! factory bytes. Multi-byte fields are little-endian. Channels 0-15 and
//! 16-31 are two firing sequences of the same 16 lasers.

use crate::error::{Error, Result};
use crate::preprocess::{Point, PointCloud};

pub const PACKET_LEN: usize = 1206;
pub const BLOCKS: usize = 12;
pub const CHANNELS: usize = 32;
pub const LASERS: usize = 16;
pub const BLOCK_FLAG: [u8; 2] = [0xFF, 0xEE];
pub const DISTANCE_UNIT_M: f64 = 0.002;
const BLOCK_LEN: usize = 4 + CHANNELS * 3;
const FULL_TURN: u32 = 36_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelReturn {
    pub distance: u16,
    pub reflectivity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataBlock {
    pub azimuth: u16,
    pub returns: [ChannelReturn; CHANNELS],
}

impl DataBlock {
    pub fn new(azimuth: u16) -> Self {
        DataBlock {
            azimuth,
            returns: [ChannelReturn::default(); CHANNELS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VelodynePacket {
    pub blocks: [DataBlock; BLOCKS],
    pub timestamp_us: u32,
    pub factory: [u8; 2],
}

impl VelodynePacket {
    /// Strongest-return VLP-16 packet with the given blocks.
    pub fn new(blocks: [DataBlock; BLOCKS], timestamp_us: u32) -> Self {
        VelodynePacket {
            blocks,
            timestamp_us,
            factory: [0x37, 0x22],
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PACKET_LEN);
        for b in &self.blocks {
            out.extend_from_slice(&BLOCK_FLAG);
            out.extend_from_slice(&b.azimuth.to_le_bytes());
            for r in &b.returns {
                out.extend_from_slice(&r.distance.to_le_bytes());
                out.push(r.reflectivity);
            }
        }
        out.extend_from_slice(&self.timestamp_us.to_le_bytes());
        out.extend_from_slice(&self.factory);
        out
    }

    pub fn nonzero_returns(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| b.returns.iter())
            .filter(|r| r.distance > 0)
            .count()
    }
}

pub fn parse_packet(bytes: &[u8]) -> Result<VelodynePacket> {
    if bytes.len() != PACKET_LEN {
        return Err(Error::Truncated {
            expected: PACKET_LEN,
            actual: bytes.len(),
        });
    }
    let mut blocks = [DataBlock::new(0); BLOCKS];
    for (i, block) in blocks.iter_mut().enumerate() {
        let b = &bytes[i * BLOCK_LEN..(i + 1) * BLOCK_LEN];
        if b[..2] != BLOCK_FLAG {
            return Err(Error::BadBlockFlag {
                block: i,
                flag: u16::from_be_bytes([b[0], b[1]]),
            });
        }
        block.azimuth = u16::from_le_bytes([b[2], b[3]]);
        if block.azimuth as u32 >= FULL_TURN {
            return Err(Error::Format(format!(
                "block {i}: azimuth {} out of range",
                block.azimuth
            )));
        }
        for (c, r) in block.returns.iter_mut().enumerate() {
            let o = 4 + c * 3;
            r.distance = u16::from_le_bytes([b[o], b[o + 1]]);
            r.reflectivity = b[o + 2];
        }
    }
    let t = BLOCKS * BLOCK_LEN;
    Ok(VelodynePacket {
        blocks,
        timestamp_us: u32::from_le_bytes([bytes[t], bytes[t + 1], bytes[t + 2], bytes[t + 3]]),
        factory: [bytes[t + 4], bytes[t + 5]],
    })
}

/// Per-laser vertical angle (degrees) and vertical offset (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct LaserTable {
    angles_deg: [f64; LASERS],
    offsets_m: [f64; LASERS],
}

impl LaserTable {
    const VLP16_ANGLES: [f64; LASERS] = [
        -15.0, 1.0, -13.0, 3.0, -11.0, 5.0, -9.0, 7.0, -7.0, 9.0, -5.0, 11.0, -3.0, 13.0, -1.0,
        15.0,
    ];

    pub fn new(angles_deg: [f64; LASERS], offsets_m: [f64; LASERS]) -> Result<Self> {
        if angles_deg.iter().any(|a| !(-15.0..=15.0).contains(a)) {
            return Err(Error::Input(format!(
                "laser angles must lie in [-15, 15] degrees, got {angles_deg:?}"
            )));
        }
        if offsets_m.iter().any(|o| !o.is_finite()) {
            return Err(Error::Input("laser offsets must be finite".into()));
        }
        Ok(LaserTable {
            angles_deg,
            offsets_m,
        })
    }

    /// The VLP-16 table with the manufacturer's vertical corrections.
    pub fn vlp16() -> Self {
        let mm = [
            11.2, -0.7, 9.7, -2.2, 8.1, -3.7, 6.6, -5.1, 5.1, -6.6, 3.7, -8.1, 2.2, -9.7, 0.7,
            -11.2,
        ];
        LaserTable {
            angles_deg: Self::VLP16_ANGLES,
            offsets_m: mm.map(|v| v / 1000.0),
        }
    }

    /// VLP-16 angles, no vertical offsets.
    pub fn vlp16_ideal() -> Self {
        LaserTable {
            angles_deg: Self::VLP16_ANGLES,
            offsets_m: [0.0; LASERS],
        }
    }

    pub fn angle_deg(&self, laser: usize) -> f64 {
        self.angles_deg[laser]
    }

    pub fn offset_m(&self, laser: usize) -> f64 {
        self.offsets_m[laser]
    }

    /// Sensor-frame point for one return: x right, y forward, z up.
    pub fn point(&self, laser: usize, distance: u16, azimuth_deg: f64) -> [f64; 3] {
        let r = distance as f64 * DISTANCE_UNIT_M;
        let (w, a) = (self.angles_deg[laser].to_radians(), azimuth_deg.to_radians());
        [
            r * w.cos() * a.sin(),
            r * w.cos() * a.cos(),
            r * w.sin() + self.offsets_m[laser],
        ]
    }
}

/// Forward azimuth step from `a` to `b` in hundredths of a degree.
fn step(a: u16, b: u16) -> u32 {
    (b as u32 + FULL_TURN - a as u32) % FULL_TURN
}

/// Points of one block. `delta` is the azimuth step to the following block;
/// the second firing sequence sits halfway along it.
fn block_points(block: &DataBlock, delta: u32, table: &LaserTable, out: &mut Vec<Point>) {
    let base = block.azimuth as f64 / 100.0;
    let mid = base + delta as f64 / 200.0;
    for (c, r) in block.returns.iter().enumerate() {
        if r.distance == 0 {
            continue;
        }
        let az = if c < LASERS { base } else { mid };
        let [x, y, z] = table.point(c % LASERS, r.distance, az);
        out.push(Point::new(x, y, z, r.reflectivity as f64));
    }
}

/// Convert a packet sequence; the last block reuses the step before it.
pub fn packets_to_cloud(packets: &[VelodynePacket], table: &LaserTable) -> PointCloud {
    let blocks: Vec<&DataBlock> = packets.iter().flat_map(|p| p.blocks.iter()).collect();
    let mut points = Vec::new();
    let mut prev_delta = 0;
    for (i, b) in blocks.iter().enumerate() {
        let delta = match blocks.get(i + 1) {
            Some(n) => step(b.azimuth, n.azimuth),
            None => prev_delta,
        };
        block_points(b, delta, table, &mut points);
        prev_delta = delta;
    }
    PointCloud::new(points)
}

/// Splits a block stream into revolutions at azimuth wrap-around. Partial
/// revolutions covering less than `min_arc` are dropped.
#[derive(Debug, Clone)]
pub struct RevolutionAssembler {
    table: LaserTable,
    min_arc: u32,
    pending: Option<DataBlock>,
    prev_delta: u32,
    points: Vec<Point>,
    arc: u32,
}

impl RevolutionAssembler {
    pub fn new(table: LaserTable) -> Self {
        RevolutionAssembler {
            table,
            min_arc: 35_000,
            pending: None,
            prev_delta: 0,
            points: Vec::new(),
            arc: 0,
        }
    }

    /// Arc covered by the revolution being assembled, in degrees.
    pub fn arc_deg(&self) -> f64 {
        self.arc as f64 / 100.0
    }

    pub fn push(&mut self, packet: &VelodynePacket) -> Vec<PointCloud> {
        let mut done = Vec::new();
        for b in &packet.blocks {
            if let Some(prev) = self.pending.take() {
                let delta = step(prev.azimuth, b.azimuth);
                block_points(&prev, delta, &self.table, &mut self.points);
                self.prev_delta = delta;
                if b.azimuth < prev.azimuth {
                    done.extend(self.close());
                } else {
                    self.arc += delta;
                }
            }
            self.pending = Some(*b);
        }
        done
    }

    /// End of stream: emit the last revolution if it is complete enough.
    pub fn flush(&mut self) -> Option<PointCloud> {
        if let Some(prev) = self.pending.take() {
            block_points(&prev, self.prev_delta, &self.table, &mut self.points);
        }
        self.close()
    }

    fn close(&mut self) -> Option<PointCloud> {
        let points = std::mem::take(&mut self.points);
        let arc = std::mem::replace(&mut self.arc, 0);
        (arc >= self.min_arc && !points.is_empty()).then(|| PointCloud::new(points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_packet(rng: &mut ChaCha8Rng) -> VelodynePacket {
        let mut blocks = [DataBlock::new(0); BLOCKS];
        for b in blocks.iter_mut() {
            b.azimuth = rng.gen_range(0..36_000);
            for r in b.returns.iter_mut() {
                if rng.gen_bool(0.8) {
                    r.distance = rng.gen_range(1..=u16::MAX);
                    r.reflectivity = rng.gen();
                }
            }
        }
        VelodynePacket::new(blocks, rng.gen())
    }

    #[test]
    fn fixture_packet_decodes() {
        // Hand-assembled: block 0 at 90.00 deg, channel 0 at 10 m.
        let mut bytes = Vec::new();
        for i in 0..BLOCKS {
            bytes.extend_from_slice(&[0xFF, 0xEE]);
            let az: u16 = 9000 + 20 * i as u16;
            bytes.extend_from_slice(&az.to_le_bytes());
            for c in 0..CHANNELS {
                let d: u16 = if i == 0 && c == 0 { 5000 } else { 0 };
                bytes.extend_from_slice(&d.to_le_bytes());
                bytes.push(if d > 0 { 77 } else { 0 });
            }
        }
        bytes.extend_from_slice(&123_456u32.to_le_bytes());
        bytes.extend_from_slice(&[0x37, 0x22]);
        assert_eq!(bytes.len(), PACKET_LEN);

        let p = parse_packet(&bytes).unwrap();
        assert_eq!(p.blocks[0].azimuth, 9000);
        assert_eq!(p.blocks[0].returns[0].distance, 5000);
        assert_eq!(p.blocks[0].returns[0].reflectivity, 77);
        assert_eq!(p.blocks[0].returns[0].distance as f64 * DISTANCE_UNIT_M, 10.0);
        assert_eq!(p.blocks[11].azimuth, 9220);
        assert_eq!(p.timestamp_us, 123_456);
        assert_eq!(p.to_bytes(), bytes);
    }

    #[test]
    fn length_and_flag_errors() {
        let p = random_packet(&mut ChaCha8Rng::seed_from_u64(1));
        let bytes = p.to_bytes();
        assert!(matches!(
            parse_packet(&bytes[..1205]),
            Err(Error::Truncated { expected: 1206, actual: 1205 })
        ));
        let mut bad = bytes.clone();
        bad[3 * BLOCK_LEN + 1] = 0xEF;
        match parse_packet(&bad) {
            Err(e @ Error::BadBlockFlag { block: 3, flag: 0xFFEF }) => {
                assert!(e.to_string().contains("block 3"))
            }
            other => panic!("{other:?}"),
        }
        let mut bad_az = bytes;
        bad_az[2..4].copy_from_slice(&36_000u16.to_le_bytes());
        assert!(matches!(parse_packet(&bad_az), Err(Error::Format(_))));
    }

    #[test]
    fn axis_examples() {
        let t = LaserTable::vlp16_ideal();
        let flat = LaserTable::new([0.0; LASERS], [0.0; LASERS]).unwrap();
        let p = flat.point(0, 5000, 0.0);
        assert!(p[0].abs() < 1e-12 && (p[1] - 10.0).abs() < 1e-12 && p[2].abs() < 1e-12);
        let p = flat.point(0, 5000, 90.0);
        assert!((p[0] - 10.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
        let p = t.point(15, 5000, 0.0);
        assert!((p[2] - 10.0 * 15f64.to_radians().sin()).abs() < 1e-12);
    }

    #[test]
    fn table_bounds() {
        let mut a = [0.0; LASERS];
        a[3] = 15.5;
        assert!(LaserTable::new(a, [0.0; LASERS]).is_err());
        assert_eq!(LaserTable::vlp16().offset_m(0), 0.0112);
    }

    #[test]
    fn cloud_matches_trig_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let table = LaserTable::vlp16();
        let packets: Vec<_> = (0..5).map(|_| random_packet(&mut rng)).collect();
        let cloud = packets_to_cloud(&packets, &table);
        let total: usize = packets.iter().map(|p| p.nonzero_returns()).sum();
        assert_eq!(cloud.len(), total);

        let blocks: Vec<_> = packets.iter().flat_map(|p| p.blocks).collect();
        let mut i = 0;
        let mut last_step = 0.0;
        for (k, b) in blocks.iter().enumerate() {
            let a0 = b.azimuth as f64 / 100.0;
            let step = match blocks.get(k + 1) {
                Some(n) => ((n.azimuth as f64 - b.azimuth as f64) / 100.0).rem_euclid(360.0),
                None => last_step,
            };
            last_step = step;
            for (c, r) in b.returns.iter().enumerate() {
                if r.distance == 0 {
                    continue;
                }
                let laser = c % 16;
                let alpha = if c < 16 { a0 } else { a0 + step / 2.0 }.to_radians();
                let omega = table.angle_deg(laser).to_radians();
                let dist = r.distance as f64 * 0.002;
                let want = [
                    dist * omega.cos() * alpha.sin(),
                    dist * omega.cos() * alpha.cos(),
                    dist * omega.sin() + table.offset_m(laser),
                ];
                let p = cloud.points[i];
                for (g, w) in [p.x, p.y, p.z].iter().zip(want) {
                    assert!((g - w).abs() < 1e-9, "{g} vs {w}");
                }
                i += 1;
            }
        }
    }

    fn sweep(start: u32, packets: usize, step: u32) -> Vec<VelodynePacket> {
        (0..packets)
            .map(|p| {
                let mut blocks = [DataBlock::new(0); BLOCKS];
                for (i, b) in blocks.iter_mut().enumerate() {
                    b.azimuth = ((start + (p * BLOCKS + i) as u32 * step) % 36_000) as u16;
                    b.returns[0].distance = 1000;
                }
                VelodynePacket::new(blocks, p as u32)
            })
            .collect()
    }

    #[test]
    fn assembler_splits_on_wrap() {
        // 0..360 deg in 40 hundredths steps = 900 blocks = 75 packets, twice.
        let packets = sweep(0, 150, 40);
        let mut asm = RevolutionAssembler::new(LaserTable::vlp16());
        let mut clouds = Vec::new();
        for p in &packets {
            clouds.extend(asm.push(p));
        }
        assert_eq!(clouds.len(), 1);
        assert_eq!(clouds[0].len(), 900);
        assert_eq!(clouds[0], packets_to_cloud(&packets[..75], &LaserTable::vlp16()));
        assert_eq!(asm.flush().map(|c| c.len()), Some(900));
    }

    #[test]
    fn partial_revolution_dropped() {
        let packets = sweep(20_000, 75, 40);
        let mut asm = RevolutionAssembler::new(LaserTable::vlp16());
        let n: usize = packets.iter().map(|p| asm.push(p).len()).sum();
        // The 200..360 deg head is too short; the 0..200 tail too.
        assert_eq!(n, 0);
        assert!(asm.flush().is_none());
    }

    #[test]
    fn fuzzed_payloads_never_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let good = random_packet(&mut rng).to_bytes();
        let mut ok = 0;
        for i in 0..20_000 {
            let mut buf = if i % 2 == 0 {
                let mut b = good.clone();
                for _ in 0..rng.gen_range(1..8) {
                    let j = rng.gen_range(0..b.len());
                    b[j] = rng.gen();
                }
                b
            } else {
                (0..PACKET_LEN).map(|_| rng.gen()).collect::<Vec<u8>>()
            };
            if i % 97 == 0 {
                buf.truncate(rng.gen_range(0..PACKET_LEN));
            }
            ok += parse_packet(&buf).is_ok() as usize;
        }
        assert!(ok > 0);
    }
}
