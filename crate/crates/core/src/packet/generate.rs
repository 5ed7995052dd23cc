//! Deterministic synthetic traffic standing in for real backbone traces.
//!
//! Destinations are skewed toward a few heavy-hitter hosts over a uniform
//! background, so degree distributions have a clear head. Every capture is
//! written with a sidecar `<name>.counts.tsv` holding the exact number of
//! packets carrying each (field, value); the sidecar values are formatted by
//! this module's own code, independently of the extraction path.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{gzip_compress, PacketError, PcapHeader, PcapWriter, RawPacket, Result, FIELD_NAMES};

const SNAPLEN: u32 = 96;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub packet_count: u64,
    pub seed: u64,
    /// Number of background hosts.
    pub host_count: u32,
    /// Share of packets addressed to the top heavy hitter.
    pub heavy_hitter_fraction: f64,
    /// Number of heavy hitters. The others share a quarter of the top one's traffic.
    pub heavy_hitter_count: u32,
    /// Epoch microseconds of the first packet.
    pub start_time_us: i64,
    pub mean_interarrival_us: f64,
    /// Share of IPv4 packets that are TCP; the rest are UDP.
    pub tcp_fraction: f64,
    /// Share of frames that are not IPv4 (ARP).
    pub non_ip_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            packet_count: 10_000,
            seed: 1,
            host_count: 5_000,
            heavy_hitter_fraction: 0.2,
            heavy_hitter_count: 4,
            // 2017-04-12 11:49:36 UTC
            start_time_us: 1_491_997_776_000_000,
            mean_interarrival_us: 25.0,
            tcp_fraction: 0.8,
            non_ip_fraction: 0.005,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        let frac = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(PacketError::Config(format!("{name} must lie in [0, 1], got {x}")))
            }
        };
        frac("heavy_hitter_fraction", self.heavy_hitter_fraction)?;
        frac("heavy_hitter_fraction * 1.25", self.heavy_hitter_fraction * 1.25)?;
        frac("tcp_fraction", self.tcp_fraction)?;
        frac("non_ip_fraction", self.non_ip_fraction)?;
        if self.host_count == 0 || self.heavy_hitter_count == 0 {
            return Err(PacketError::Config(
                "host_count and heavy_hitter_count must be positive".into(),
            ));
        }
        if self.mean_interarrival_us.is_nan() || self.mean_interarrival_us < 0.0 {
            return Err(PacketError::Config("mean_interarrival_us must be non-negative".into()));
        }
        if self.start_time_us < 0 || self.start_time_us / 1_000_000 > i64::from(u32::MAX) / 2 {
            return Err(PacketError::Config(
                "start time outside the pcap timestamp range".into(),
            ));
        }
        Ok(())
    }
}

/// Exact per-(field, value) packet counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub counts: BTreeMap<(String, String), u64>,
}

impl GroundTruth {
    pub fn get(&self, field: &str, value: &str) -> u64 {
        self.counts
            .get(&(field.to_owned(), value.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    /// Sum of counts over all values of `field`.
    pub fn field_total(&self, field: &str) -> u64 {
        self.counts
            .iter()
            .filter(|((f, _), _)| f == field)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    fn bump(&mut self, field: &str, value: String) {
        *self.counts.entry((field.to_owned(), value)).or_insert(0) += 1;
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "field\tvalue\tcount")?;
        for ((f, v), c) in &self.counts {
            writeln!(w, "{f}\t{v}\t{c}")?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_sidecar(path: &Path) -> Result<GroundTruth> {
    let err = |line: usize, msg: &str| PacketError::Tsv {
        path: path.display().to_string(),
        line,
        msg: msg.to_owned(),
    };
    let mut truth = GroundTruth::default();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != "field\tvalue\tcount" {
                return Err(err(1, "unexpected sidecar header"));
            }
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(f), Some(v), Some(c), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(err(i + 1, "expected 3 fields"));
        };
        let c: u64 = c.parse().map_err(|_| err(i + 1, "bad count"))?;
        *truth.counts.entry((f.to_owned(), v.to_owned())).or_insert(0) += c;
    }
    Ok(truth)
}

pub fn merge_counts<'a>(parts: impl IntoIterator<Item = &'a GroundTruth>) -> GroundTruth {
    let mut out = GroundTruth::default();
    for p in parts {
        for (k, c) in &p.counts {
            *out.counts.entry(k.clone()).or_insert(0) += c;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GeneratedCapture {
    pub path: PathBuf,
    pub sidecar: PathBuf,
    pub packets: u64,
    /// Heavy-hitter destinations, top one first.
    pub heavy_hitters: Vec<Ipv4Addr>,
    pub truth: GroundTruth,
}

struct Traffic {
    rng: ChaCha8Rng,
    interarrival: Option<Exp<f64>>,
    cfg: GenConfig,
    heavy: Vec<Ipv4Addr>,
    background: Vec<Ipv4Addr>,
    now_us: i64,
    ip_id: u16,
}

const TCP_FLAGS: [u8; 6] = [0x10, 0x18, 0x02, 0x12, 0x11, 0x04];
const SERVICE_PORTS: [u16; 6] = [80, 443, 22, 25, 53, 123];

impl Traffic {
    fn new(cfg: &GenConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut seen = HashSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng| loop {
            let a = Ipv4Addr::from(rng.random::<u32>());
            let o = a.octets()[0];
            if o != 0 && o != 10 && o != 127 && o < 224 && seen.insert(a) {
                break a;
            }
        };
        let heavy = (0..cfg.heavy_hitter_count).map(|_| fresh(&mut rng)).collect();
        let background = (0..cfg.host_count).map(|_| fresh(&mut rng)).collect();
        let interarrival = if cfg.mean_interarrival_us > 0.0 {
            Some(Exp::new(1.0 / cfg.mean_interarrival_us).expect("positive rate"))
        } else {
            None
        };
        Ok(Traffic {
            rng,
            interarrival,
            cfg: cfg.clone(),
            heavy,
            background,
            now_us: cfg.start_time_us,
            ip_id: 0,
        })
    }

    fn pick_background(&mut self) -> Ipv4Addr {
        self.background[self.rng.random_range(0..self.background.len())]
    }

    fn next_packet(&mut self) -> RawPacket {
        if let Some(exp) = &self.interarrival {
            self.now_us += exp.sample(&mut self.rng).round() as i64;
        }
        let ts_sec = (self.now_us / 1_000_000) as u32;
        let ts_usec = (self.now_us % 1_000_000) as u32;
        let src_mac = [0x02, 0, 0, 0, 0, 0x01];
        let dst_mac = [0x02, 0, 0, 0, 0, 0x02];
        let mut d = Vec::with_capacity(64);
        d.extend_from_slice(&dst_mac);
        d.extend_from_slice(&src_mac);

        if self.rng.random::<f64>() < self.cfg.non_ip_fraction {
            d.extend_from_slice(&0x0806u16.to_be_bytes());
            // ARP request body
            d.extend_from_slice(&[0, 1, 8, 0, 6, 4, 0, 1]);
            d.extend_from_slice(&src_mac);
            d.extend_from_slice(&self.pick_background().octets());
            d.extend_from_slice(&[0; 6]);
            d.extend_from_slice(&self.pick_background().octets());
            return RawPacket {
                ts_sec,
                ts_usec,
                orig_len: 60,
                data: d,
            };
        }

        let u: f64 = self.rng.random();
        let hh = self.cfg.heavy_hitter_fraction;
        let dst = if u < hh {
            self.heavy[0]
        } else if u < hh * 1.25 && self.heavy.len() > 1 {
            self.heavy[self.rng.random_range(1..self.heavy.len())]
        } else {
            self.pick_background()
        };
        let src = self.pick_background();
        let tcp = self.rng.random::<f64>() < self.cfg.tcp_fraction;
        let (proto, min_len) = if tcp { (6u8, 40u16) } else { (17u8, 28u16) };
        let ip_len = match self.rng.random_range(0..10) {
            0..=3 => 1500,
            4..=5 => min_len,
            6 => 576,
            _ => self.rng.random_range(min_len..=1500),
        };
        self.ip_id = self.ip_id.wrapping_add(1);
        let ttl = self.rng.random_range(32..=128u8);

        d.extend_from_slice(&0x0800u16.to_be_bytes());
        let ip_start = d.len();
        d.extend_from_slice(&[0x45, 0]);
        d.extend_from_slice(&ip_len.to_be_bytes());
        d.extend_from_slice(&self.ip_id.to_be_bytes());
        d.extend_from_slice(&[0x40, 0, ttl, proto, 0, 0]);
        d.extend_from_slice(&src.octets());
        d.extend_from_slice(&dst.octets());
        let csum = ipv4_checksum(&d[ip_start..ip_start + 20]);
        d[ip_start + 10..ip_start + 12].copy_from_slice(&csum.to_be_bytes());

        let service = SERVICE_PORTS[self.rng.random_range(0..SERVICE_PORTS.len())];
        let ephemeral = self.rng.random_range(1024..=65535u16);
        let (sport, dport) = if self.rng.random::<bool>() {
            (service, ephemeral)
        } else {
            (ephemeral, service)
        };
        d.extend_from_slice(&sport.to_be_bytes());
        d.extend_from_slice(&dport.to_be_bytes());
        if tcp {
            let seq: u32 = self.rng.random();
            let flags = TCP_FLAGS[self.rng.random_range(0..TCP_FLAGS.len())];
            d.extend_from_slice(&seq.to_be_bytes());
            d.extend_from_slice(&[0; 4]);
            d.extend_from_slice(&[0x50, flags, 0xfa, 0xf0, 0, 0, 0, 0]);
        } else {
            d.extend_from_slice(&(ip_len - 20).to_be_bytes());
            d.extend_from_slice(&[0, 0]);
        }
        RawPacket {
            ts_sec,
            ts_usec,
            orig_len: 14 + u32::from(ip_len),
            data: d,
        }
    }
}

fn ipv4_checksum(h: &[u8]) -> u16 {
    let mut sum: u32 = h.chunks(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Days since 1970-01-01 to (year, month, day), proleptic Gregorian.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

fn truth_frame_time(us: i64) -> String {
    let secs = us.div_euclid(1_000_000);
    let (y, m, d) = civil_from_days(secs.div_euclid(86_400));
    let sod = secs.rem_euclid(86_400);
    format!(
        "{y} {} {d:02} {:02}:{:02}:{:02}.{:05} UTC",
        MONTHS[m as usize - 1],
        sod / 3600,
        sod / 60 % 60,
        sod % 60,
        us.rem_euclid(1_000_000) / 10
    )
}

fn truth_relative(us: i64, t0: i64) -> String {
    let d = us - t0;
    format!("{}.{:06}000", d / 1_000_000, d % 1_000_000)
}

/// Records the values the generator encoded into `p`.
fn tally(truth: &mut GroundTruth, p: &RawPacket, t0: i64) {
    let us = p.timestamp_micros();
    truth.bump(FIELD_NAMES[0], truth_relative(us, t0));
    truth.bump(FIELD_NAMES[1], truth_frame_time(us));
    let d = &p.data;
    if u16::from_be_bytes([d[12], d[13]]) != 0x0800 {
        return;
    }
    let ip = &d[14..];
    let proto = ip[9];
    truth.bump("ip.dst", Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]).to_string());
    truth.bump("ip.len", u16::from_be_bytes([ip[2], ip[3]]).to_string());
    truth.bump("ip.proto", proto.to_string());
    truth.bump("ip.src", Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]).to_string());
    if proto == 6 {
        let t = &ip[20..];
        truth.bump("tcp.dstport", u16::from_be_bytes([t[2], t[3]]).to_string());
        truth.bump("tcp.flags", format!("0x{:08x}", t[13]));
        truth.bump("tcp.srcport", u16::from_be_bytes([t[0], t[1]]).to_string());
    }
}

fn sidecar_path(capture: &Path) -> PathBuf {
    let name = capture.file_name().unwrap_or_default().to_string_lossy();
    let stem = name.strip_suffix(".pcap").unwrap_or(&name);
    capture.with_file_name(format!("{stem}.counts.tsv"))
}

fn write_packets(path: &Path, pkts: &mut dyn Iterator<Item = RawPacket>) -> Result<GroundTruth> {
    let mut w = PcapWriter::new(BufWriter::new(File::create(path)?), PcapHeader::ethernet(SNAPLEN))?;
    let mut truth = GroundTruth::default();
    let mut t0 = None;
    for p in pkts {
        let t0 = *t0.get_or_insert(p.timestamp_micros());
        tally(&mut truth, &p, t0);
        w.write_packet(&p)?;
    }
    w.into_inner()?.flush()?;
    Ok(truth)
}

/// Writes one capture of `cfg.packet_count` packets to `path`, plus its
/// sidecar. Identical configs produce byte-identical files.
pub fn generate_capture(cfg: &GenConfig, path: &Path) -> Result<GeneratedCapture> {
    let mut traffic = Traffic::new(cfg)?;
    let heavy = traffic.heavy.clone();
    let mut pkts = (0..cfg.packet_count).map(|_| traffic.next_packet());
    let truth = write_packets(path, &mut pkts)?;
    let sidecar = sidecar_path(path);
    truth.write(&sidecar)?;
    Ok(GeneratedCapture {
        path: path.to_owned(),
        sidecar,
        packets: cfg.packet_count,
        heavy_hitters: heavy,
        truth,
    })
}

/// Generates one continuous traffic stream cut into `files` consecutive
/// gzip-compressed captures `capNNNN.pcap.gz` in `dir`. Each file's sidecar
/// times are relative to that file's own first packet.
pub fn generate_dataset(cfg: &GenConfig, files: usize, dir: &Path) -> Result<Vec<GeneratedCapture>> {
    if files == 0 {
        return Err(PacketError::Config("file count must be positive".into()));
    }
    fs::create_dir_all(dir)?;
    let mut traffic = Traffic::new(cfg)?;
    let heavy = traffic.heavy.clone();
    let per = cfg.packet_count / files as u64;
    let extra = cfg.packet_count % files as u64;
    let mut out = Vec::with_capacity(files);
    for i in 0..files {
        let n = per + u64::from((i as u64) < extra);
        let raw = dir.join(format!("cap{i:04}.pcap"));
        let mut pkts = (0..n).map(|_| traffic.next_packet());
        let truth = write_packets(&raw, &mut pkts)?;
        let sidecar = sidecar_path(&raw);
        truth.write(&sidecar)?;
        let gz = gzip_compress(&raw)?;
        fs::remove_file(&raw)?;
        out.push(GeneratedCapture {
            path: gz,
            sidecar,
            packets: n,
            heavy_hitters: heavy.clone(),
            truth,
        });
    }
    Ok(out)
}
