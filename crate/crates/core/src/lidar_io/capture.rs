use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::velodyne::{parse_packet, LaserTable, RevolutionAssembler, PACKET_LEN};
use crate::error::{Error, Result};
use crate::preprocess::PointCloud;

pub const DEFAULT_PORT: u16 = 2368;

/// Bounded hand-off between capture and processing. When full, the oldest
/// frame is discarded: a live sensor favors freshness.
#[derive(Debug)]
pub struct FrameQueue<T> {
    state: Mutex<QueueState<T>>,
    ready: Condvar,
    capacity: usize,
}

#[derive(Debug)]
struct QueueState<T> {
    items: VecDeque<T>,
    dropped: u64,
    closed: bool,
}

impl<T> FrameQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        FrameQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::with_capacity(capacity),
                dropped: 0,
                closed: false,
            }),
            ready: Condvar::new(),
            capacity,
        }
    }

    /// Enqueue, evicting the oldest frame if full. Returns whether a frame
    /// was evicted.
    pub fn push(&self, item: T) -> bool {
        let mut s = self.state.lock().unwrap();
        let evicted = s.items.len() == self.capacity;
        if evicted {
            s.items.pop_front();
            s.dropped += 1;
        }
        s.items.push_back(item);
        self.ready.notify_one();
        evicted
    }

    /// Wait up to `timeout` for a frame. `None` on timeout or when closed
    /// and drained.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<T> {
        let s = self.state.lock().unwrap();
        let (mut s, _) = self
            .ready
            .wait_timeout_while(s, timeout, |s| s.items.is_empty() && !s.closed)
            .unwrap();
        s.items.pop_front()
    }

    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.state.lock().unwrap().dropped
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaptureStats {
    pub datagrams: u64,
    pub malformed: u64,
    pub revolutions: u64,
}

/// VLP-16 listener that turns datagrams into one cloud per revolution.
#[derive(Debug)]
pub struct UdpCapture {
    socket: UdpSocket,
    assembler: RevolutionAssembler,
    stats: CaptureStats,
}

impl UdpCapture {
    pub fn bind(addr: impl Into<SocketAddr>, table: LaserTable) -> Result<Self> {
        let addr = addr.into();
        let socket = UdpSocket::bind(addr).map_err(|source| Error::Bind {
            addr: addr.to_string(),
            source,
        })?;
        socket
            .set_read_timeout(Some(Duration::from_millis(50)))
            .map_err(|source| Error::Bind {
                addr: addr.to_string(),
                source,
            })?;
        Ok(UdpCapture {
            socket,
            assembler: RevolutionAssembler::new(table),
            stats: CaptureStats::default(),
        })
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.socket.local_addr().ok()
    }

    pub fn stats(&self) -> CaptureStats {
        self.stats
    }

    /// Feed one datagram. Malformed payloads are counted and skipped.
    pub fn ingest(&mut self, payload: &[u8], sink: &mut dyn FnMut(PointCloud)) {
        self.stats.datagrams += 1;
        match parse_packet(payload) {
            Ok(p) => {
                for cloud in self.assembler.push(&p) {
                    self.stats.revolutions += 1;
                    sink(cloud);
                }
            }
            Err(_) => self.stats.malformed += 1,
        }
    }

    /// Receive until `stop` is set, then emit the final revolution if it is
    /// complete.
    pub fn run(&mut self, stop: &AtomicBool, sink: &mut dyn FnMut(PointCloud)) -> Result<CaptureStats> {
        let mut buf = vec![0u8; PACKET_LEN + 512];
        while !stop.load(Ordering::Relaxed) {
            match self.socket.recv_from(&mut buf) {
                Ok((n, _)) => {
                    let payload = buf[..n].to_vec();
                    self.ingest(&payload, sink);
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => {
                    return Err(Error::Input(format!("udp receive failed: {e}")));
                }
            }
        }
        if let Some(cloud) = self.assembler.flush() {
            self.stats.revolutions += 1;
            sink(cloud);
        }
        Ok(self.stats)
    }
}

#[cfg(test)]
mod tests {
    use super::super::velodyne::{DataBlock, VelodynePacket, BLOCKS};
    use super::*;
    use std::net::Ipv4Addr;
    use std::sync::Arc;
    use std::thread;

    fn revolution() -> Vec<VelodynePacket> {
        (0..75)
            .map(|p| {
                let mut blocks = [DataBlock::new(0); BLOCKS];
                for (i, b) in blocks.iter_mut().enumerate() {
                    b.azimuth = ((p * BLOCKS + i) * 40) as u16;
                    b.returns[5].distance = 2500;
                }
                VelodynePacket::new(blocks, p as u32)
            })
            .collect()
    }

    #[test]
    fn queue_drops_oldest() {
        let q = FrameQueue::new(2);
        assert!(!q.push(1));
        assert!(!q.push(2));
        assert!(q.push(3));
        assert_eq!(q.dropped(), 1);
        assert_eq!(q.pop_timeout(Duration::ZERO), Some(2));
        assert_eq!(q.pop_timeout(Duration::ZERO), Some(3));
        assert_eq!(q.pop_timeout(Duration::from_millis(1)), None);
        q.close();
        assert!(q.is_closed());
    }

    #[test]
    fn ingest_skips_malformed() {
        let mut cap = UdpCapture::bind((Ipv4Addr::LOCALHOST, 0), LaserTable::vlp16()).unwrap();
        let packets = revolution();
        let mut clouds = Vec::new();
        for (i, p) in packets.iter().enumerate() {
            if i == 10 {
                let mut bad = p.to_bytes();
                bad[0] = 0x00;
                cap.ingest(&bad, &mut |c| clouds.push(c));
                cap.ingest(&bad[..100], &mut |c| clouds.push(c));
            }
            cap.ingest(&p.to_bytes(), &mut |c| clouds.push(c));
        }
        assert_eq!(cap.stats().malformed, 2);
        assert!(clouds.is_empty());
    }

    #[test]
    fn loopback_replay_emits_one_revolution() {
        let mut cap = UdpCapture::bind((Ipv4Addr::LOCALHOST, 0), LaserTable::vlp16()).unwrap();
        let addr = cap.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let sender = {
            let stop = stop.clone();
            thread::spawn(move || {
                let s = UdpSocket::bind((Ipv4Addr::LOCALHOST, 0)).unwrap();
                for (i, p) in revolution().iter().enumerate() {
                    if i == 30 {
                        let mut bad = p.to_bytes();
                        bad[3 * 100 + 1] = 0xEF;
                        s.send_to(&bad, addr).unwrap();
                    }
                    s.send_to(&p.to_bytes(), addr).unwrap();
                    thread::sleep(Duration::from_micros(200));
                }
                thread::sleep(Duration::from_millis(200));
                stop.store(true, Ordering::Relaxed);
            })
        };
        let queue = FrameQueue::new(2);
        let stats = cap.run(&stop, &mut |c| {
            queue.push(c);
        })
        .unwrap();
        sender.join().unwrap();
        assert_eq!(stats.revolutions, 1);
        assert_eq!(stats.malformed, 1);
        assert_eq!(stats.datagrams, 76);
        assert_eq!(queue.pop_timeout(Duration::ZERO).unwrap().len(), 900);
    }

    #[test]
    fn silence_is_not_an_error() {
        let mut cap = UdpCapture::bind((Ipv4Addr::LOCALHOST, 0), LaserTable::vlp16()).unwrap();
        let stop = AtomicBool::new(false);
        let mut n = 0;
        let handle = &stop;
        thread::scope(|s| {
            s.spawn(|| {
                thread::sleep(Duration::from_millis(120));
                handle.store(true, Ordering::Relaxed);
            });
            let stats = cap.run(&stop, &mut |_| n += 1).unwrap();
            assert_eq!(stats, CaptureStats::default());
        });
        assert_eq!(n, 0);
    }

    #[test]
    fn bind_failure_is_reported() {
        let first = UdpCapture::bind((Ipv4Addr::LOCALHOST, 0), LaserTable::vlp16()).unwrap();
        let taken = first.local_addr().unwrap();
        let err = UdpCapture::bind(taken, LaserTable::vlp16()).unwrap_err();
        assert!(matches!(err, Error::Bind { .. }));
    }
}
