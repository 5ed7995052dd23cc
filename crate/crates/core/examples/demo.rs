//! Generates a small capture set, runs all six pipeline stages, and queries
//! the resulting tables.
//!
//!     cargo run --example demo -- [work-dir] [packets] [workers]

use std::error::Error;
use std::path::PathBuf;

use assocpipe::analytics::{connections_to, degree_distribution, query_via_array, top_k};
use assocpipe::packet::{generate_dataset, merge_counts, GenConfig};
use assocpipe::pipeline::{e_files, run, PipelineConfig};
use assocpipe::store::{Store, TEDGE, TEDGE_DEG, TEDGE_T};

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let work: PathBuf = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("assocpipe-demo"), PathBuf::from);
    let packets: u64 = args.next().map_or(Ok(50_000), |s| s.parse())?;
    let workers: usize = args.next().map_or(Ok(4), |s| s.parse())?;
    if work.exists() {
        std::fs::remove_dir_all(&work)?;
    }

    // Synthetic traffic, four gzip captures with ground-truth sidecars.
    let gen = GenConfig {
        packet_count: packets,
        seed: 2017,
        ..GenConfig::default()
    };
    let caps = generate_dataset(&gen, 4, &work.join("data"))?;
    let truth = merge_counts(caps.iter().map(|c| &c.truth));
    println!("generated {packets} packets in {} files", caps.len());

    // uncompress -> split -> parse -> sort -> sparse -> ingest
    let mut cfg = PipelineConfig::new(work.join("data"), work.join("work"), work.join("store"));
    cfg.workers = workers;
    cfg.split_size = 1 << 20;
    let report = run(&cfg).map_err(|f| f.error)?;
    println!("\nstage  seconds   files");
    for r in &report.records {
        println!("{:>5}  {:>7.3}  {:>6}", r.stage, r.seconds, r.files);
    }

    let store = Store::open(&cfg.store_dir)?;
    for name in [TEDGE, TEDGE_T, TEDGE_DEG] {
        let n = store.table(name).map_or(0, |t| t.scan_all().len());
        println!("{name:<9} {n} cells");
    }

    // Degrees in the store match the generator's own counts.
    let top = top_k(&store, "ip.dst", 5)?;
    println!("\ntop destinations:");
    for (ip, deg) in &top {
        println!("  {ip:<16} {deg:>7}   (generated {})", truth.get("ip.dst", ip));
    }

    // Connection query, once through the tables and once through E.
    let (ip, _) = &top[0];
    let via_store = connections_to(&store, ip)?;
    let via_array = query_via_array(&e_files(&cfg)?, ip)?;
    println!(
        "\nconnections to {ip}: {} packets ({:.1} ms via tables, {:.1} ms via arrays, same answer: {})",
        via_store.packets.len(),
        via_store.elapsed * 1e3,
        via_array.elapsed * 1e3,
        via_store.same_answer(&via_array)
    );
    if let Some(p) = via_store.packets.first() {
        println!("first packet {p}:");
        for c in via_store.cells.iter().filter(|c| &c.row == p) {
            println!("  {}", c.col);
        }
    }

    println!("\ntcp.dstport degree distribution (degree: values):");
    for (deg, n) in degree_distribution(&store, "tcp.dstport")?.iter().rev().take(8) {
        println!("  {deg:>6}: {n}");
    }
    Ok(())
}
