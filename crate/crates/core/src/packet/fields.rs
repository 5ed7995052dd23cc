use std::net::Ipv4Addr;

use chrono::DateTime;

use super::{PacketError, RawPacket, Result};

/// Exported header fields, in output column order.
pub const FIELD_NAMES: [&str; 9] = [
    "frame.time_relative",
    "frame.time",
    "ip.dst",
    "ip.len",
    "ip.proto",
    "ip.src",
    "tcp.dstport",
    "tcp.flags",
    "tcp.srcport",
];

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETH_HEADER_LEN: usize = 14;
const IPPROTO_TCP: u8 = 6;

/// The header metadata of one packet. IP fields are set only for IPv4
/// frames and TCP fields only when the protocol is TCP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketFields {
    pub frame_time_relative: String,
    pub frame_time: String,
    pub ip_dst: Option<Ipv4Addr>,
    pub ip_len: Option<u16>,
    pub ip_proto: Option<u8>,
    pub ip_src: Option<Ipv4Addr>,
    pub tcp_dstport: Option<u16>,
    pub tcp_flags: Option<u16>,
    pub tcp_srcport: Option<u16>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl PacketFields {
    /// Field values in [`FIELD_NAMES`] order; absent fields are empty.
    pub fn values(&self) -> [String; 9] {
        [
            self.frame_time_relative.clone(),
            self.frame_time.clone(),
            opt(self.ip_dst),
            opt(self.ip_len),
            opt(self.ip_proto),
            opt(self.ip_src),
            opt(self.tcp_dstport),
            self.tcp_flags.map(|f| format!("0x{f:08x}")).unwrap_or_default(),
            opt(self.tcp_srcport),
        ]
    }

    /// Parses values in [`FIELD_NAMES`] order, the inverse of [`PacketFields::values`].
    pub fn from_values<S: AsRef<str>>(vals: &[S]) -> std::result::Result<Self, String> {
        if vals.len() != FIELD_NAMES.len() {
            return Err(format!("expected {} fields, got {}", FIELD_NAMES.len(), vals.len()));
        }
        fn parse<T: std::str::FromStr>(name: &str, s: &str) -> std::result::Result<Option<T>, String> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| format!("bad {name} value {s:?}"))
        }
        let v = |i: usize| vals[i].as_ref();
        let tcp_flags = match v(7) {
            "" => None,
            s => {
                let hex = s.strip_prefix("0x").ok_or_else(|| format!("bad tcp.flags {s:?}"))?;
                Some(u16::from_str_radix(hex, 16).map_err(|_| format!("bad tcp.flags {s:?}"))?)
            }
        };
        Ok(PacketFields {
            frame_time_relative: v(0).to_owned(),
            frame_time: v(1).to_owned(),
            ip_dst: parse("ip.dst", v(2))?,
            ip_len: parse("ip.len", v(3))?,
            ip_proto: parse("ip.proto", v(4))?,
            ip_src: parse("ip.src", v(5))?,
            tcp_dstport: parse("tcp.dstport", v(6))?,
            tcp_flags,
            tcp_srcport: parse("tcp.srcport", v(8))?,
        })
    }
}

/// `YYYY Mon DD HH:MM:SS.fffff UTC`, truncated to 10 µs.
pub fn format_frame_time(micros: i64) -> String {
    let secs = micros.div_euclid(1_000_000);
    let frac = micros.rem_euclid(1_000_000);
    let t = DateTime::from_timestamp(secs, 0).expect("timestamp in chrono range");
    format!("{}.{:05} UTC", t.format("%Y %b %d %H:%M:%S"), frac / 10)
}

/// Seconds since `t0`, nine decimal places.
pub fn format_relative(micros: i64, t0_micros: i64) -> String {
    let d = micros - t0_micros;
    let sign = if d < 0 { "-" } else { "" };
    let d = d.unsigned_abs();
    format!("{sign}{}.{:09}", d / 1_000_000, (d % 1_000_000) * 1000)
}

/// Decodes Ethernet → IPv4 → TCP headers of one packet.
///
/// Non-IPv4 frames yield only the `frame.*` fields. Non-first IP fragments
/// carry no transport header, so their TCP fields stay empty.
pub fn extract_fields(p: &RawPacket, t0_micros: i64) -> Result<PacketFields> {
    let ts = p.timestamp_micros();
    let mut f = PacketFields {
        frame_time_relative: format_relative(ts, t0_micros),
        frame_time: format_frame_time(ts),
        ip_dst: None,
        ip_len: None,
        ip_proto: None,
        ip_src: None,
        tcp_dstport: None,
        tcp_flags: None,
        tcp_srcport: None,
    };
    let d = &p.data;
    if d.len() < ETH_HEADER_LEN {
        return Err(PacketError::Malformed(format!(
            "{}-byte frame is shorter than Ethernet header",
            d.len()
        )));
    }
    if u16::from_be_bytes([d[12], d[13]]) != ETHERTYPE_IPV4 {
        return Ok(f);
    }
    let ip = &d[ETH_HEADER_LEN..];
    if ip.len() < 20 {
        return Err(PacketError::Malformed(format!("{}-byte IPv4 header", ip.len())));
    }
    if ip[0] >> 4 != 4 {
        return Err(PacketError::Malformed(format!(
            "IP version {} in IPv4 frame",
            ip[0] >> 4
        )));
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(PacketError::Malformed(format!(
            "IPv4 header length {ihl} with {} bytes captured",
            ip.len()
        )));
    }
    let proto = ip[9];
    f.ip_len = Some(u16::from_be_bytes([ip[2], ip[3]]));
    f.ip_proto = Some(proto);
    f.ip_src = Some(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    f.ip_dst = Some(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    let frag_offset = u16::from_be_bytes([ip[6], ip[7]]) & 0x1fff;
    if proto != IPPROTO_TCP || frag_offset != 0 {
        return Ok(f);
    }
    let tcp = &ip[ihl..];
    if tcp.len() < 20 {
        return Err(PacketError::Malformed(format!("{}-byte TCP header", tcp.len())));
    }
    f.tcp_srcport = Some(u16::from_be_bytes([tcp[0], tcp[1]]));
    f.tcp_dstport = Some(u16::from_be_bytes([tcp[2], tcp[3]]));
    // 12 flag bits: 3 reserved, NS, then CWR..FIN.
    f.tcp_flags = Some((u16::from(tcp[12] & 0x0f) << 8) | u16::from(tcp[13]));
    Ok(f)
}
