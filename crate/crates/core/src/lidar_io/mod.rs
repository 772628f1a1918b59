//! Sensor and dataset input: VLP-16 UDP packets, revolution assembly,
//! KITTI point-cloud binaries and calibration files.

mod capture;
mod kitti;
mod velodyne;

pub use capture::{CaptureStats, FrameQueue, UdpCapture, DEFAULT_PORT};
pub use kitti::{parse_calib, read_calib, read_kitti_bin, write_kitti_bin, DEFAULT_IMAGE_SIZE};
pub use velodyne::{
    packets_to_cloud, parse_packet, ChannelReturn, DataBlock, LaserTable, RevolutionAssembler,
    VelodynePacket, BLOCKS, BLOCK_FLAG, CHANNELS, DISTANCE_UNIT_M, PACKET_LEN,
};
