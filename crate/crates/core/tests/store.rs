use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use assocpipe::store::{scan_col, Cell, Combiner, EdgeSchema, Store, StoreError};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key(i: u8) -> String {
    format!("k{:02}", i % 13)
}

#[derive(Debug, Clone)]
enum Op {
    Put(Vec<(u8, u8, i64)>),
    Flush,
    Compact,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => prop::collection::vec((any::<u8>(), any::<u8>(), -50i64..50), 0..20).prop_map(Op::Put),
        1 => Just(Op::Flush),
        1 => Just(Op::Compact),
    ]
}

fn apply(table: &assocpipe::store::Table, ops: &[Op], plain_value: impl Fn(u8, u8) -> String) {
    for o in ops {
        match o {
            Op::Put(cells) => {
                let batch = cells
                    .iter()
                    .map(|&(r, c, v)| {
                        let val = match table.combiner() {
                            Combiner::Sum => v.to_string(),
                            Combiner::None => plain_value(r, c),
                        };
                        Cell::new(key(r), key(c), val)
                    })
                    .collect();
                table.put(batch).unwrap();
            }
            Op::Flush => table.flush().unwrap(),
            Op::Compact => table.compact().unwrap(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_scan_is_decimal_sum_under_any_flush_schedule(ops in prop::collection::vec(op(), 0..25)) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table("D", Combiner::Sum).unwrap();
        apply(&t, &ops, |_, _| unreachable!());
        let mut oracle: BTreeMap<(String, String), i64> = BTreeMap::new();
        for o in &ops {
            if let Op::Put(cells) = o {
                for &(r, c, v) in cells {
                    *oracle.entry((key(r), key(c))).or_default() += v;
                }
            }
        }
        let got: Vec<Cell> = t.scan_all();
        let want: Vec<Cell> = oracle.into_iter().map(|((r, c), v)| Cell::new(r, c, v.to_string())).collect();
        prop_assert_eq!(&got, &want);
        prop_assert!(got.windows(2).all(|w| (&w[0].row, &w[0].col) < (&w[1].row, &w[1].col)));

        // Reordering the puts into one shuffled batch gives the same scan.
        let mut flat: Vec<(u8, u8, i64)> = ops.iter().filter_map(|o| match o { Op::Put(c) => Some(c.clone()), _ => None }).flatten().collect();
        flat.reverse();
        let t2 = store.create_table("D2", Combiner::Sum).unwrap();
        apply(&t2, &[Op::Put(flat)], |_, _| unreachable!());
        prop_assert_eq!(t2.scan_all(), want);

        // Durability after flush.
        t.flush().unwrap();
        drop(t);
        drop(t2);
        drop(store);
        let reopened = Store::open(dir.path()).unwrap();
        prop_assert_eq!(reopened.table("D").unwrap().scan_all(), got);
    }

    #[test]
    fn plain_scan_is_order_independent(ops in prop::collection::vec(op(), 0..25), seed in any::<u64>()) {
        // Plain tables keep the newest value; order independence holds when
        // repeated puts of a cell carry the same value, as edge puts do.
        let value = |r: u8, c: u8| format!("v{}", (r % 13) as u32 * 13 + (c % 13) as u32);
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let a = store.create_table("A", Combiner::None).unwrap();
        apply(&a, &ops, value);
        let mut shuffled = ops.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = store.create_table("B", Combiner::None).unwrap();
        apply(&b, &shuffled, value);
        prop_assert_eq!(a.scan_all(), b.scan_all());
    }
}

#[test]
fn reopen_after_many_inserts_gives_identical_scan() {
    let dir = tempfile::tempdir().unwrap();
    let before;
    {
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table("Tedge", Combiner::None).unwrap();
        for chunk in (0..100_000u32).collect::<Vec<_>>().chunks(10_000) {
            let cells = chunk
                .iter()
                .map(|i| Cell::new(format!("{:07}.cap.A.mat", i / 9), format!("f{}|{}", i % 9, i % 97), "1"))
                .collect();
            t.put(cells).unwrap();
            t.flush().unwrap();
        }
        before = t.scan_all();
        assert_eq!(before.len(), 100_000);
        assert_eq!(t.run_count(), 10);
    }
    let store = Store::open(dir.path()).unwrap();
    let t = store.table("Tedge").unwrap();
    assert_eq!(t.scan_all(), before);
    t.compact().unwrap();
    assert_eq!(t.run_count(), 1);
    assert_eq!(t.scan_all(), before);
}

#[test]
fn unflushed_buffer_is_not_durable() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table("T", Combiner::None).unwrap();
        t.put(vec![Cell::new("a", "b", "1")]).unwrap();
    }
    let store = Store::open(dir.path()).unwrap();
    assert!(store.table("T").unwrap().scan_all().is_empty());
}

#[test]
fn concurrent_disjoint_writers_yield_union() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let t = store.create_table("T", Combiner::None).unwrap();
    std::thread::scope(|s| {
        for w in 0..4 {
            let t = &t;
            s.spawn(move || {
                for i in 0..500 {
                    t.put(vec![Cell::new(format!("w{w}"), format!("c{i:04}"), "1")])
                        .unwrap();
                    if i % 100 == 0 {
                        t.flush().unwrap();
                    }
                }
            });
        }
    });
    let all = t.scan_all();
    assert_eq!(all.len(), 2000);
    for w in 0..4 {
        assert_eq!(t.scan_row(&format!("w{w}")).len(), 500);
    }
}

#[test]
fn scans_never_see_a_partial_batch() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let t = Arc::new(store.create_table("T", Combiner::Sum).unwrap());
    let done = AtomicBool::new(false);
    std::thread::scope(|s| {
        let writer = s.spawn(|| {
            for b in 0..300 {
                let batch = (0..10).map(|i| Cell::new("r", format!("c{i}"), "1")).collect();
                t.put(batch).unwrap();
                if b % 50 == 0 {
                    t.flush().unwrap();
                }
                if b % 120 == 0 {
                    t.compact().unwrap();
                }
            }
            done.store(true, Ordering::SeqCst);
        });
        let mut scans = 0;
        while !done.load(Ordering::SeqCst) {
            let row = t.scan_row("r");
            let vals: Vec<&str> = row.iter().map(|c| c.val.as_str()).collect();
            if let Some(first) = vals.first() {
                assert_eq!(vals.len(), 10);
                assert!(vals.iter().all(|v| v == first), "torn batch: {vals:?}");
            }
            scans += 1;
        }
        writer.join().unwrap();
        assert!(scans > 0);
    });
    assert!(t.scan_all().iter().all(|c| c.val == "300"));
}

#[test]
fn scan_col_equals_full_scan_filter() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let schema = EdgeSchema::create(&store).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cols = [
        "ip.dst|1.1.1.1",
        "ip.dst|1.1.1.10",
        "ip.src|1.1.1.1",
        "ip.proto|6",
        "tcp.flags|0x00000010",
    ];
    let mut cells = Vec::new();
    for p in 0..300 {
        for c in cols.choose_multiple(&mut rng, 3) {
            cells.push(Cell::new(format!("{p:07}.x.A.mat"), *c, "1"));
        }
    }
    schema.tedge.put(cells.clone()).unwrap();
    schema
        .tedge_t
        .put(cells.iter().map(Cell::transposed).collect())
        .unwrap();
    schema.tedge_t.flush().unwrap();
    for prefix in ["ip.dst|1.1.1.1", "ip.", "tcp.flags|", "zzz", "ip.dst|1.1.1.10"] {
        let want: Vec<Cell> = schema
            .tedge
            .scan_all()
            .into_iter()
            .filter(|c| c.col.starts_with(prefix))
            .collect();
        assert_eq!(scan_col(&schema.tedge_t, prefix), want, "prefix {prefix}");
    }
}

#[test]
fn corrupt_run_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table("T", Combiner::None).unwrap();
        t.put(vec![Cell::new("a", "b", "c")]).unwrap();
        t.flush().unwrap();
    }
    let run = dir.path().join("T").join("run-0001.srt");
    let mut bytes = std::fs::read(&run).unwrap();
    bytes[0] = b'X';
    std::fs::write(&run, bytes).unwrap();
    assert!(matches!(Store::open(dir.path()), Err(StoreError::Corrupt { .. })));
}
