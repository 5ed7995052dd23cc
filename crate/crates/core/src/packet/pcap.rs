use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use super::{PacketError, Result};

pub const PCAP_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;
pub const LINKTYPE_ETHERNET: u32 = 1;
const MAGIC: u32 = 0xa1b2_c3d4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }

    fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            ByteOrder::Little => u16::from_le_bytes(b),
            ByteOrder::Big => u16::from_be_bytes(b),
        }
    }

    fn put_u32(self, out: &mut Vec<u8>, x: u32) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&x.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&x.to_be_bytes()),
        }
    }

    fn put_u16(self, out: &mut Vec<u8>, x: u16) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&x.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&x.to_be_bytes()),
        }
    }
}

/// The 24-byte global header of a classic (microsecond) pcap file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub byte_order: ByteOrder,
    pub version_major: u16,
    pub version_minor: u16,
    pub thiszone: i32,
    pub sigfigs: u32,
    pub snaplen: u32,
    pub linktype: u32,
}

impl PcapHeader {
    pub fn ethernet(snaplen: u32) -> Self {
        PcapHeader {
            byte_order: ByteOrder::Little,
            version_major: 2,
            version_minor: 4,
            thiszone: 0,
            sigfigs: 0,
            snaplen,
            linktype: LINKTYPE_ETHERNET,
        }
    }

    pub fn parse(b: &[u8; PCAP_HEADER_LEN]) -> Result<Self> {
        let raw = [b[0], b[1], b[2], b[3]];
        let byte_order = if u32::from_le_bytes(raw) == MAGIC {
            ByteOrder::Little
        } else if u32::from_be_bytes(raw) == MAGIC {
            ByteOrder::Big
        } else {
            return Err(PacketError::BadMagic {
                found: u32::from_le_bytes(raw),
            });
        };
        let o = byte_order;
        Ok(PcapHeader {
            byte_order,
            version_major: o.u16([b[4], b[5]]),
            version_minor: o.u16([b[6], b[7]]),
            thiszone: o.u32([b[8], b[9], b[10], b[11]]) as i32,
            sigfigs: o.u32([b[12], b[13], b[14], b[15]]),
            snaplen: o.u32([b[16], b[17], b[18], b[19]]),
            linktype: o.u32([b[20], b[21], b[22], b[23]]),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let o = self.byte_order;
        let mut out = Vec::with_capacity(PCAP_HEADER_LEN);
        o.put_u32(&mut out, MAGIC);
        o.put_u16(&mut out, self.version_major);
        o.put_u16(&mut out, self.version_minor);
        o.put_u32(&mut out, self.thiszone as u32);
        o.put_u32(&mut out, self.sigfigs);
        o.put_u32(&mut out, self.snaplen);
        o.put_u32(&mut out, self.linktype);
        out
    }
}

/// One captured record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub ts_sec: u32,
    pub ts_usec: u32,
    /// Length of the packet on the wire; `data` may be shorter.
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl RawPacket {
    pub fn timestamp_micros(&self) -> i64 {
        i64::from(self.ts_sec) * 1_000_000 + i64::from(self.ts_usec)
    }

    /// Size of this record in a file, header included.
    pub fn record_len(&self) -> usize {
        RECORD_HEADER_LEN + self.data.len()
    }
}

/// Streaming reader. Yields packets in file order.
pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    offset: u64,
    done: bool,
}

pub fn read_pcap(path: impl AsRef<Path>) -> Result<PcapReader<BufReader<File>>> {
    PcapReader::new(BufReader::with_capacity(1 << 16, File::open(path)?))
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut buf = [0u8; PCAP_HEADER_LEN];
        let n = read_full(&mut inner, &mut buf)?;
        if n < 4 {
            return Err(PacketError::Format {
                offset: 0,
                msg: "file shorter than the pcap magic".into(),
            });
        }
        let raw = u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]);
        if raw != MAGIC && raw.swap_bytes() != MAGIC {
            return Err(PacketError::BadMagic { found: raw });
        }
        if n < PCAP_HEADER_LEN {
            return Err(PacketError::Truncated { offset: 0 });
        }
        let header = PcapHeader::parse(&buf)?;
        Ok(PcapReader {
            inner,
            header,
            offset: PCAP_HEADER_LEN as u64,
            done: false,
        })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<RawPacket>> {
        let start = self.offset;
        let mut rec = [0u8; RECORD_HEADER_LEN];
        match read_full(&mut self.inner, &mut rec)? {
            0 => return Ok(None),
            RECORD_HEADER_LEN => {}
            _ => return Err(PacketError::Truncated { offset: start }),
        }
        let o = self.header.byte_order;
        let ts_sec = o.u32([rec[0], rec[1], rec[2], rec[3]]);
        let ts_usec = o.u32([rec[4], rec[5], rec[6], rec[7]]);
        let incl_len = o.u32([rec[8], rec[9], rec[10], rec[11]]);
        let orig_len = o.u32([rec[12], rec[13], rec[14], rec[15]]);
        if incl_len > self.header.snaplen.max(0x0004_0000) {
            return Err(PacketError::Format {
                offset: start,
                msg: format!("included length {incl_len} exceeds snap length {}", self.header.snaplen),
            });
        }
        if ts_usec >= 1_000_000 {
            return Err(PacketError::Format {
                offset: start,
                msg: format!("microsecond field {ts_usec} out of range"),
            });
        }
        let mut data = vec![0u8; incl_len as usize];
        if read_full(&mut self.inner, &mut data)? != data.len() {
            return Err(PacketError::Truncated { offset: start });
        }
        self.offset += (RECORD_HEADER_LEN + data.len()) as u64;
        Ok(Some(RawPacket {
            ts_sec,
            ts_usec,
            orig_len,
            data,
        }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawPacket>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

pub struct PcapWriter<W: Write> {
    inner: W,
    header: PcapHeader,
    record_bytes: u64,
    scratch: Vec<u8>,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, header: PcapHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(PcapWriter {
            inner,
            header,
            record_bytes: 0,
            scratch: Vec::with_capacity(RECORD_HEADER_LEN),
        })
    }

    pub fn write_packet(&mut self, p: &RawPacket) -> Result<()> {
        let o = self.header.byte_order;
        self.scratch.clear();
        o.put_u32(&mut self.scratch, p.ts_sec);
        o.put_u32(&mut self.scratch, p.ts_usec);
        o.put_u32(&mut self.scratch, p.data.len() as u32);
        o.put_u32(&mut self.scratch, p.orig_len);
        self.inner.write_all(&self.scratch)?;
        self.inner.write_all(&p.data)?;
        self.record_bytes += p.record_len() as u64;
        Ok(())
    }

    /// Bytes written after the global header.
    pub fn record_bytes(&self) -> u64 {
        self.record_bytes
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packets() -> Vec<RawPacket> {
        (0..5u32)
            .map(|i| RawPacket {
                ts_sec: 1_491_997_776 + i,
                ts_usec: i * 1000,
                orig_len: 60 + i,
                data: vec![i as u8; 10 + i as usize],
            })
            .collect()
    }

    fn encode(order: ByteOrder, pkts: &[RawPacket]) -> Vec<u8> {
        let mut h = PcapHeader::ethernet(96);
        h.byte_order = order;
        let mut w = PcapWriter::new(Vec::new(), h).unwrap();
        for p in pkts {
            w.write_packet(p).unwrap();
        }
        w.into_inner().unwrap()
    }

    #[test]
    fn zero_records_is_empty_stream() {
        let bytes = encode(ByteOrder::Little, &[]);
        assert_eq!(bytes.len(), PCAP_HEADER_LEN);
        assert_eq!(PcapReader::new(&bytes[..]).unwrap().count(), 0);
    }

    #[test]
    fn both_byte_orders_read_identically() {
        let pkts = packets();
        for order in [ByteOrder::Little, ByteOrder::Big] {
            let bytes = encode(order, &pkts);
            let r = PcapReader::new(&bytes[..]).unwrap();
            assert_eq!(r.header().byte_order, order);
            let got: Vec<_> = r.map(|p| p.unwrap()).collect();
            assert_eq!(got, pkts);
        }
        assert_eq!(&encode(ByteOrder::Little, &[])[..4], &[0xd4, 0xc3, 0xb2, 0xa1]);
        assert_eq!(&encode(ByteOrder::Big, &[])[..4], &[0xa1, 0xb2, 0xc3, 0xd4]);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(ByteOrder::Little, &packets());
        bytes[0] = 0;
        assert!(matches!(PcapReader::new(&bytes[..]), Err(PacketError::BadMagic { .. })));
    }

    #[test]
    fn truncated_final_record_names_its_offset() {
        let pkts = packets();
        let bytes = encode(ByteOrder::Little, &pkts);
        let last_start: usize = PCAP_HEADER_LEN + pkts[..4].iter().map(RawPacket::record_len).sum::<usize>();
        for cut in [last_start + 3, bytes.len() - 1] {
            let results: Vec<_> = PcapReader::new(&bytes[..cut]).unwrap().collect();
            assert_eq!(results.len(), 5);
            match &results[4] {
                Err(PacketError::Truncated { offset }) => assert_eq!(*offset, last_start as u64),
                other => panic!("expected truncation, got {other:?}"),
            }
        }
    }
}
