//! Packet capture handling: classic pcap files, header field extraction,
//! TSV export, file splitting, gzip, and a deterministic traffic generator.

mod fields;
mod generate;
mod gzip;
mod pcap;
mod split;
mod tsv;

use thiserror::Error;

pub use fields::{extract_fields, format_frame_time, format_relative, PacketFields, FIELD_NAMES};
pub use generate::{
    generate_capture, generate_dataset, merge_counts, read_sidecar, GenConfig, GeneratedCapture, GroundTruth,
};
pub use gzip::{gzip_compress, gzip_uncompress, gzip_uncompress_to};
pub use pcap::{
    read_pcap, ByteOrder, PcapHeader, PcapReader, PcapWriter, RawPacket, LINKTYPE_ETHERNET, PCAP_HEADER_LEN,
    RECORD_HEADER_LEN,
};
pub use split::split_pcap;
pub use tsv::{read_tsv, write_tsv, TsvTable};

#[derive(Debug, Error)]
pub enum PacketError {
    #[error("not a pcap file: magic {found:#010x}")]
    BadMagic { found: u32 },
    #[error("truncated capture: record at byte {offset} is incomplete")]
    Truncated { offset: u64 },
    #[error("capture format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("unsupported link type {0}, only Ethernet is parsed")]
    LinkType(u32),
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("gzip integrity error in {path}: {msg}")]
    Integrity { path: String, msg: String },
    #[error("{path}:{line}: {msg}")]
    Tsv { path: String, line: usize, msg: String },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PacketError> = std::result::Result<T, E>;
