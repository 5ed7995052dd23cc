use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn assocpipe(args: &[&str], env_work: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_assocpipe"));
    cmd.args(args).env_remove("ASSOCPIPE_WORK_DIR");
    if let Some(w) = env_work {
        cmd.env("ASSOCPIPE_WORK_DIR", w);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let o = assocpipe(&[], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(assocpipe(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(assocpipe(&["--version"], None).status.code(), Some(0));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for tag in ["a", "b"] {
        let data = dir.path().join(tag);
        let o = assocpipe(
            &[
                "generate",
                "--data-dir",
                data.to_str().unwrap(),
                "--packets",
                "5000",
                "--seed",
                "7",
                "--files",
                "2",
            ],
            None,
        );
        assert!(o.status.success(), "{o:?}");
        let mut files: Vec<Vec<u8>> = Vec::new();
        for name in ["cap0000.pcap.gz", "cap0001.pcap.gz", "cap0000.counts.tsv"] {
            files.push(fs::read(data.join(name)).unwrap());
        }
        bytes.push(files);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn generate_run_query_dump_via_env_work_dir() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("w");
    let env = Some(work.as_path());
    assert!(assocpipe(&["generate", "--packets", "2000", "--seed", "3"], env)
        .status
        .success());
    assert!(work.join("data").join("cap0000.pcap.gz").is_file());

    let report = dir.path().join("timing.csv");
    let o = assocpipe(
        &[
            "run",
            "--workers",
            "4",
            "--split-size",
            "5242880",
            "--report",
            report.to_str().unwrap(),
        ],
        env,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&report).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("stage,workers,seconds,bytes_in,bytes_out,files")
    );
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(stdout(&o), csv);

    let o = assocpipe(&["query", "topk", "--field", "ip.proto", "-k", "5"], env);
    assert!(o.status.success());
    let total: u64 = stdout(&o)
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    let counts = fs::read_to_string(work.join("data").join("cap0000.counts.tsv")).unwrap();
    let expected: u64 = counts
        .lines()
        .filter(|l| l.starts_with("ip.proto\t"))
        .map(|l| l.rsplit('\t').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, expected);

    let top = stdout(&assocpipe(&["query", "topk", "--field", "ip.dst", "-k", "1"], env));
    let ip = top.split('\t').next().unwrap().to_owned();
    let via_store = assocpipe(&["query", "connections", "--ip", &ip], env);
    let via_array = assocpipe(&["query", "connections", "--ip", &ip, "--via-array"], env);
    assert!(via_store.status.success() && via_array.status.success());
    assert!(!via_store.stdout.is_empty());
    assert_eq!(via_store.stdout, via_array.stdout);

    let jl = stdout(&assocpipe(
        &["query", "connections", "--ip", &ip, "--format", "jsonl"],
        env,
    ));
    for line in jl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["packet"].as_str().unwrap().ends_with(".A.mat"));
    }

    let dd = stdout(&assocpipe(&["query", "degdist", "--field", "ip.proto"], env));
    assert!(!dd.is_empty());

    let bad = assocpipe(&["query", "connections", "--ip", "300.1.1.1"], env);
    assert_eq!(bad.status.code(), Some(2));

    let dump = stdout(&assocpipe(&["dump", "--table", "TedgeDeg"], env));
    assert!(dump.lines().all(|l| l.split('\t').count() == 3));
    let all = stdout(&assocpipe(&["dump"], env));
    assert!(all.lines().any(|l| l.starts_with("TedgeT\t")));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("w");
    let conf = dir.path().join("assocpipe.conf");
    fs::write(
        &conf,
        format!(
            "# test settings\nwork_dir = {}\npackets = 600\nworkers = 2\nstages = 1-2\n",
            work.display()
        ),
    )
    .unwrap();
    let c = conf.to_str().unwrap();
    assert!(assocpipe(&["--config", c, "generate"], None).status.success());
    let o = assocpipe(&["--config", c, "run", "--workers", "3"], None);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3, "{out}");
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(1) == Some("3")));

    fs::write(&conf, "workers = many\n").unwrap();
    assert_eq!(assocpipe(&["--config", c, "run"], None).status.code(), Some(1));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("w");
    let w = work.to_str().unwrap();
    assert!(assocpipe(
        &["generate", "--work-dir", w, "--packets", "1500", "--files", "2"],
        None
    )
    .status
    .success());
    let o = assocpipe(
        &["bench", "--work-dir", w, "--workers", "1,2", "--split-size", "20000"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(work.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 2);
    for line in csv.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("1")) {
        assert_eq!(line.split(',').nth(3), Some("1.0000"));
    }
    let dat = fs::read_to_string(work.join("bench.dat")).unwrap();
    assert!(dat.starts_with("# workers stage1"));

    let o = assocpipe(&["bench", "--work-dir", w, "--workers", "2,4"], None);
    assert_eq!(o.status.code(), Some(1));
}
