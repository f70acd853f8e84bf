//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Every expected value is computed here by an oracle that shares no code
//! with the library: brute-force supports over plain row vectors, a
//! standalone KRIMP replay, and a plaintext query engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fedmdl_cli::commands::cmd_mine;
use fedmdl_cli::{MineArgs, Scenario};
use fedmdl_core::datamodel::{
    k_anonymize, partition_horizontal, partition_vertical, to_vertical, Generalization, RelationSchema,
};
use fedmdl_core::federated::{
    cross_party_count, mine_model, pruning_merging_tables, Federation, GlobalModel, ProtocolSettings,
};
use fedmdl_core::krimp::{cover, krimp_compress, krimp_compress_traced, total_encoded_size, CodeTable};
use fedmdl_core::protocol::{collision_check, ring_intersection_count, ProtocolTranscript};
use fedmdl_core::query::{
    decrypt_answer, encrypt_answer, execute_query, parse_query, QueryAnswer, QueryCatalog, QueryOutput, QueryResult,
    UserKey,
};
use fedmdl_core::{Itemset, PartyId, TransactionDatabase};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Row = BTreeSet<u32>;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

const CRITERIA: [Criterion; 8] = [
    Criterion { name: "sample-vertical-layout", budget: Some(Duration::from_secs(1)), check: sample_vertical },
    Criterion { name: "clinic-k-anonymity", budget: Some(Duration::from_secs(1)), check: clinic_anonymity },
    Criterion { name: "federated-count-oracle", budget: Some(Duration::from_secs(60)), check: federated_count },
    Criterion { name: "mdl-properties", budget: None, check: mdl_properties },
    Criterion { name: "protocol-privacy-and-threshold", budget: None, check: protocol_privacy },
    Criterion { name: "topology-independence", budget: Some(Duration::from_secs(120)), check: topology_independence },
    Criterion { name: "query-engine", budget: None, check: query_engine },
    Criterion { name: "pruning-merging", budget: None, check: pruning_merging },
];

fn main() -> ExitCode {
    // `cargo test -- <filter>` style arguments are accepted and ignored
    let mut failed = 0;
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_text(&e))));
        let elapsed = start.elapsed();
        let mut pass = outcome.pass;
        let mut detail = outcome.detail;
        if let Some(budget) = c.budget {
            if elapsed > budget {
                pass = false;
                let _ = write!(detail, "; over the {} s budget", budget.as_secs());
            }
        }
        println!("{} {} ({:.3} s): {}", if pass { "PASS" } else { "FAIL" }, c.name, elapsed.as_secs_f64(), detail);
        if !pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

// ---------------------------------------------------------------- oracles

fn parse_rows(text: &str) -> Vec<Row> {
    text.lines().map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect()).collect()
}

fn rows_text(rows: &[Row]) -> String {
    rows.iter().map(|r| r.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ") + "\n").collect()
}

fn database(rows: &[Row]) -> TransactionDatabase {
    TransactionDatabase::parse(&rows_text(rows)).unwrap()
}

fn support(rows: &[Row], x: &[u32]) -> usize {
    rows.iter().filter(|r| x.iter().all(|i| r.contains(i))).count()
}

fn alphabet(rows: &[Row]) -> Vec<u32> {
    rows.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: u32, density: f64) -> Vec<Row> {
    (0..n)
        .map(|_| {
            let mut r: Row = (1..=m).filter(|_| rng.random_bool(density)).collect();
            if r.is_empty() {
                r.insert(rng.random_range(1..=m));
            }
            r
        })
        .collect()
}

fn items_of(x: &Itemset) -> Vec<u32> {
    x.iter().collect()
}

/// Length descending, support descending, then lexicographic.
fn cover_cmp(a: &(Vec<u32>, usize), b: &(Vec<u32>, usize)) -> std::cmp::Ordering {
    b.0.len().cmp(&a.0.len()).then(b.1.cmp(&a.1)).then(a.0.cmp(&b.0))
}

/// Support descending, length descending, then lexicographic.
fn candidate_cmp(a: &(Vec<u32>, usize), b: &(Vec<u32>, usize)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then(b.0.len().cmp(&a.0.len())).then(a.0.cmp(&b.0))
}

/// Plain re-implementation of the two-part code: cover order table, greedy
/// cover, Shannon lengths from usage, itemsets spelled with the standard
/// singleton codes.
struct OracleTable {
    entries: Vec<(Vec<u32>, usize)>,
    usage: Vec<usize>,
    size: f64,
}

fn oracle_table(rows: &[Row], patterns: &[(Vec<u32>, usize)]) -> OracleTable {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in rows {
        for &i in r {
            *counts.entry(i).or_default() += 1;
        }
    }
    let occurrences: usize = counts.values().sum();
    let standard: BTreeMap<u32, f64> =
        counts.iter().map(|(&i, &c)| (i, (occurrences as f64 / c as f64).log2())).collect();

    let mut pats: Vec<(Vec<u32>, usize)> = patterns.iter().filter(|p| p.0.len() >= 2).cloned().collect();
    pats.sort_by(cover_cmp);
    let mut singles: Vec<(Vec<u32>, usize)> = counts.iter().map(|(&i, &c)| (vec![i], c)).collect();
    singles.sort_by(cover_cmp);
    let entries: Vec<(Vec<u32>, usize)> = pats.into_iter().chain(singles).collect();

    let mut usage = vec![0usize; entries.len()];
    for r in rows {
        let mut left = r.clone();
        for (n, (x, _)) in entries.iter().enumerate() {
            if x.iter().all(|i| left.contains(i)) {
                for i in x {
                    left.remove(i);
                }
                usage[n] += 1;
            }
        }
        assert!(left.is_empty(), "singletons always finish a cover");
    }
    let total: usize = usage.iter().sum();
    let mut size = 0.0;
    for ((x, _), &u) in entries.iter().zip(&usage) {
        if u == 0 {
            continue;
        }
        let len = (total as f64 / u as f64).log2();
        size += u as f64 * len + len + x.iter().map(|i| standard[i]).sum::<f64>();
    }
    OracleTable { entries, usage, size }
}

fn oracle_cover(row: &Row, table: &[Vec<u32>]) -> Row {
    let mut left = row.clone();
    let mut covered = Row::new();
    for x in table {
        if x.iter().all(|i| left.contains(i)) {
            for i in x {
                left.remove(i);
                covered.insert(*i);
            }
        }
    }
    covered
}

/// Every itemset of size ≥ 1 reaching `min_count`, by subset enumeration.
fn brute_force_frequent(rows: &[Row], min_count: usize) -> Vec<(Vec<u32>, usize)> {
    let alpha = alphabet(rows);
    let mut out = Vec::new();
    for mask in 1u32..(1 << alpha.len()) {
        let x: Vec<u32> = (0..alpha.len()).filter(|b| mask >> b & 1 == 1).map(|b| alpha[b]).collect();
        let s = support(rows, &x);
        if s >= min_count {
            out.push((x, s));
        }
    }
    out
}

/// The compression loop replayed from scratch: `(candidate, accepted,
/// size after)` per offered candidate, and the final pattern set.
#[allow(clippy::type_complexity)]
fn krimp_replay(rows: &[Row], min_count: usize) -> (Vec<(Vec<u32>, bool, f64)>, Vec<Vec<u32>>) {
    let mut candidates = brute_force_frequent(rows, min_count);
    candidates.sort_by(candidate_cmp);
    let mut kept: Vec<(Vec<u32>, usize)> = Vec::new();
    let mut best = oracle_table(rows, &kept).size;
    let mut trace = Vec::new();
    for c in candidates.into_iter().filter(|c| c.0.len() >= 2) {
        let mut trial = kept.clone();
        trial.push(c.clone());
        let size = oracle_table(rows, &trial).size;
        let accepted = size < best - 1e-9;
        trace.push((c.0.clone(), accepted, size));
        if accepted {
            kept = trial;
            best = size;
        }
    }
    let mut finals: Vec<Vec<u32>> = kept.into_iter().map(|k| k.0).collect();
    finals.sort();
    (trace, finals)
}

fn kraft(ct: &CodeTable) -> f64 {
    ct.entries().iter().filter_map(|e| e.code_length).map(|l| (-l).exp2()).sum()
}

fn kraft_ok(ct: &CodeTable) -> bool {
    ct.entries().iter().all(|e| e.usage == 0) || (kraft(ct) - 1.0).abs() <= 1e-9
}

// ------------------------------------------------------------- criteria

const SAMPLE: &str = "2 1 5 3\n2 3\n1 4\n3 1 5\n2 1 3\n2 4";

fn sample_vertical() -> Outcome {
    let rows = parse_rows(SAMPLE);
    let db = TransactionDatabase::parse(SAMPLE).unwrap();
    let got = to_vertical(&db).tidsets;
    let published: [(u32, &[u32]); 4] = [(1, &[1, 3, 4, 5]), (2, &[1, 2, 5, 6]), (3, &[1, 2, 4, 5]), (5, &[1, 4])];
    let mut problems = Vec::new();
    for (item, tids) in published {
        if got.get(&item).map(Vec::as_slice) != Some(tids) {
            problems.push(format!("item {item}: got {:?}, published {tids:?}", got.get(&item)));
        }
    }
    // item 4 occurs in rows 3 and 6
    let oracle4: Vec<u32> = (1..).zip(&rows).filter(|(_, r)| r.contains(&4)).map(|(t, _)| t).collect();
    if oracle4 != [3, 6] || got.get(&4) != Some(&oracle4) {
        problems.push(format!("item 4: got {:?}, want {oracle4:?}", got.get(&4)));
    }
    if got.len() != 5 {
        problems.push(format!("{} items in the vertical layout, want 5", got.len()));
    }
    if problems.is_empty() {
        Outcome::new(true, "items 1,2,3,5 match the reference layout; item 4 = {3,6}")
    } else {
        Outcome::new(false, problems.join("; "))
    }
}

const CLINIC: &str = "\
ZIPcode,Age,Disease
17601,31,Cancer
17601,32,BRCA Mutation
17605,33,Cancer
17605,34,Alzheimer
13059,36,Cancer
13056,38,Cancer
13054,37,Viral Infection
13055,38,Viral Infection
13059,39,Viral Infection
";

fn clinic_anonymity() -> Outcome {
    let table = RelationSchema::from_csv(CLINIC).unwrap();
    let qi = [("ZIPcode", Generalization::SuffixMask), ("Age", Generalization::Interval { width: 5 })];
    let anon = k_anonymize(&table, &qi, 4).unwrap();
    let rows = &anon.table.rows;
    let want_zip = ["176**", "176**", "176**", "176**", "1305*", "1305*", "1305*", "1305*", "1305*"];
    let want_age = ["[30,35]", "[30,35]", "[30,35]", "[30,35]", "[35,40]", "[35,40]", "[35,40]", "[35,40]", "[35,40]"];

    let mut problems = Vec::new();
    let zip: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    if zip != want_zip {
        problems.push(format!("ZIP column {zip:?}, reference {want_zip:?}"));
    }
    let age: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    if age != want_age {
        problems.push(format!("age column {age:?}, reference {want_age:?}"));
    }
    let mut classes: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in rows {
        *classes.entry((r[0].as_str(), r[1].as_str())).or_default() += 1;
    }
    let mut sizes: Vec<usize> = classes.values().copied().collect();
    sizes.sort();
    if sizes != [4, 5] {
        problems.push(format!("class sizes {sizes:?}, want [4, 5]"));
    }
    let disease_in: Vec<&String> = table.rows.iter().map(|r| &r[2]).collect();
    let disease_out: Vec<&String> = rows.iter().map(|r| &r[2]).collect();
    if disease_in != disease_out {
        problems.push("sensitive column changed".into());
    }
    if problems.is_empty() {
        Outcome::new(true, "quasi-identifiers match the reference table, classes 4 and 5, sensitive column kept")
    } else {
        Outcome::new(false, problems.join("; "))
    }
}

fn federated_count() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfed_c0de);
    let (mut instances, mut zero_collision, mut mismatches) = (0usize, 0usize, Vec::new());
    let mut collided = 0usize;
    while instances < 1000 {
        let n = rng.random_range(1..=200);
        let m = rng.random_range(2..=20);
        let density = rng.random_range(0.1..0.7);
        let rows = random_rows(&mut rng, n, m, density);
        let alpha = alphabet(&rows);
        if alpha.len() < 2 {
            continue;
        }
        let parties = rng.random_range(2..=4).min(alpha.len());
        let mut shuffled = alpha.clone();
        shuffled.shuffle(&mut rng);
        let mut owner: BTreeMap<u32, PartyId> = BTreeMap::new();
        for (k, &i) in shuffled.iter().enumerate() {
            let p = if k < parties { k } else { rng.random_range(0..parties) };
            owner.insert(i, PartyId(p as u32 + 1));
        }
        let fed = Federation::new(partition_vertical(&database(&rows), "d", &owner).unwrap()).unwrap();

        // a candidate spanning at least two parties
        let first = *alpha.choose(&mut rng).unwrap();
        let others: Vec<u32> = alpha.iter().copied().filter(|i| owner[i] != owner[&first]).collect();
        let second = *others.choose(&mut rng).unwrap();
        let mut c: BTreeSet<u32> = [first, second].into();
        let extra = rng.random_range(0..=3usize);
        for _ in 0..extra {
            c.insert(*alpha.choose(&mut rng).unwrap());
        }
        let c: Vec<u32> = c.into_iter().collect();

        let settings = ProtocolSettings { seed: instances as u64, ..ProtocolSettings::default() };
        instances += 1;
        let out = match cross_party_count(&Itemset::new(c.clone()), &fed, &settings) {
            Ok(out) => out,
            Err(e) => {
                mismatches.push(format!("{c:?}: {e}"));
                continue;
            }
        };
        let transcript = out.transcript.expect("cross-party counts keep their transcript");
        if transcript.collisions != 0 {
            collided += 1;
            continue;
        }
        zero_collision += 1;
        let want = support(&rows, &c);
        if out.count.count != want {
            mismatches.push(format!("{c:?}: protocol {} brute force {want}", out.count.count));
        }
    }
    let detail = format!(
        "{instances} instances, {zero_collision} zero-collision runs, {collided} with collisions, {} mismatches",
        mismatches.len()
    );
    if mismatches.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}: {}", mismatches.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn mdl_properties() -> Outcome {
    let mut problems = Vec::new();

    // standard table of the sample database: 3 items at 2 bits × 4 uses, 2 at 3 bits × 2
    let sample = TransactionDatabase::parse(SAMPLE).unwrap();
    let st = CodeTable::singletons(&sample, "");
    let data_bits = total_encoded_size(&sample, &st).data_bits;
    if (data_bits - 36.0).abs() > 1e-9 {
        problems.push(format!("sample L(D|ST) = {data_bits}, want 36.0"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x4d_444c);
    let mut tables = 0usize;
    for run in 0..100 {
        let n = rng.random_range(5..=80);
        let m = rng.random_range(3..=12);
        let density = rng.random_range(0.2..0.7);
        let rows = random_rows(&mut rng, n, m, density);
        let min_count = rng.random_range(1..=(n / 4).max(1));
        let db = database(&rows);
        let ct = krimp_compress(&db, min_count).unwrap();
        let baseline = oracle_table(&rows, &[]).size;
        let patterns: Vec<(Vec<u32>, usize)> =
            ct.patterns().iter().map(|e| (items_of(&e.itemset), e.support)).collect();
        let size = oracle_table(&rows, &patterns).size;
        if size > baseline + 1e-9 {
            problems.push(format!("run {run}: {size} bits > singleton baseline {baseline}"));
        }
        for t in [&ct, &CodeTable::singletons(&db, "")] {
            tables += 1;
            if !kraft_ok(t) {
                problems.push(format!("run {run}: Kraft sum {}", kraft(t)));
            }
        }
    }

    // replay: every database over 3 items with up to 8 rows, then random
    // ones over up to 5 items
    let subsets: Vec<Row> =
        (1u32..8).map(|mask| (0..3).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()).collect();
    let mut small: Vec<Vec<Row>> = Vec::new();
    multisets(&subsets, 8, 0, &mut Vec::new(), &mut small);
    let exhaustive = small.len();
    for _ in 0..3000 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=5);
        let density = rng.random_range(0.2..0.8);
        small.push(random_rows(&mut rng, n, m, density));
    }
    let mut replays = 0usize;
    for rows in &small {
        for min_count in 1..=2 {
            replays += 1;
            let db = database(rows);
            let (ct, trace) = krimp_compress_traced(&db, min_count).unwrap();
            tables += 1;
            if !kraft_ok(&ct) {
                problems.push(format!("{rows:?}: Kraft sum {}", kraft(&ct)));
            }
            let (want, finals) = krimp_replay(rows, min_count);
            let got: Vec<(Vec<u32>, bool, f64)> =
                trace.iter().map(|s| (items_of(&s.candidate), s.accepted, s.size_after)).collect();
            let same = got.len() == want.len()
                && got.iter().zip(&want).all(|(g, w)| g.0 == w.0 && g.1 == w.1 && (g.2 - w.2).abs() <= 1e-9);
            let mut kept: Vec<Vec<u32>> = ct.patterns().iter().map(|e| items_of(&e.itemset)).collect();
            kept.sort();
            if !same || kept != finals {
                problems.push(format!("{rows:?} min_count {min_count}: trace differs from replay"));
            }
        }
    }

    let detail = format!(
        "sample L(D|ST)={data_bits}; 100 random dbs within baseline; {tables} tables Kraft-checked; {replays} replays ({exhaustive} exhaustive dbs)"
    );
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}

/// All multisets of `pool` elements with at most `max` members.
fn multisets(pool: &[Row], max: usize, from: usize, cur: &mut Vec<Row>, out: &mut Vec<Vec<Row>>) {
    if !cur.is_empty() {
        out.push(cur.clone());
    }
    if cur.len() == max {
        return;
    }
    for k in from..pool.len() {
        cur.push(pool[k].clone());
        multisets(pool, max, k, cur, out);
        cur.pop();
    }
}

fn protocol_privacy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05e5_71e1);
    let mut problems = Vec::new();
    let mut messages = 0usize;
    for run in 0..100u64 {
        let parties = rng.random_range(2..=4u32);
        // even runs use tid-like values, odd runs recognizable sentinels
        let base: u64 = if run % 2 == 0 { 0 } else { 0x5e17_1e15_0000_0000 };
        let universe = rng.random_range(5..=200u64);
        let sets: BTreeMap<PartyId, Vec<u64>> = (1..=parties)
            .map(|p| {
                let s: BTreeSet<u64> = (1..=universe).filter(|_| rng.random_bool(0.6)).map(|t| base + t).collect();
                (PartyId(p), s.into_iter().collect())
            })
            .collect();
        let ring: Vec<PartyId> = sets.keys().copied().collect();
        let (count, transcript) = ring_intersection_count(&sets, &ring, run).unwrap();
        let raw: BTreeSet<u64> = sets.values().flatten().copied().collect();
        let log = transcript.to_log();
        for m in &transcript.messages {
            messages += 1;
            if let Some(t) = m.payload.tokens.iter().find(|t| raw.contains(t)) {
                problems.push(format!("run {run}: raw value {t} in round {}", m.round));
            }
        }
        if base != 0 {
            if let Some(v) = raw.iter().find(|v| log.contains(&v.to_string()) || log.contains(&format!("{v:016x}"))) {
                problems.push(format!("run {run}: sentinel {v:#x} in the transcript log"));
            }
        }
        let mut inter: BTreeSet<u64> = sets.values().next().unwrap().iter().copied().collect();
        for s in sets.values() {
            inter = inter.intersection(&s.iter().copied().collect()).copied().collect();
        }
        if transcript.collisions == 0 && count != inter.len() {
            problems.push(format!("run {run}: count {count}, intersection {}", inter.len()));
        }
    }

    // threshold rule on injected collision counts; tau = p / q
    let taus: [(usize, usize); 8] = [(0, 1), (1, 200), (1, 100), (1, 20), (1, 10), (1, 4), (1, 2), (1, 1)];
    let mut fixtures = 0usize;
    for total in [1usize, 2, 3, 10, 99, 100, 200, 1000] {
        for collisions in 0..=total {
            for (p, q) in taus {
                fixtures += 1;
                let mut t = ProtocolTranscript { collisions, total_tokens: total, ..ProtocolTranscript::default() };
                let v = collision_check(&mut t, p as f64 / q as f64);
                let want = collisions * q <= p * total;
                if v.accepted != want || v.exact != (collisions == 0) || t.accepted != Some(want) {
                    problems.push(format!("{collisions}/{total} at tau {p}/{q}: accepted={}", v.accepted));
                }
            }
        }
    }
    let named = [(0usize, 1000usize, true, true), (500, 1000, false, false), (5, 1000, true, false)];
    for (collisions, total, accept, exact) in named {
        let mut t = ProtocolTranscript { collisions, total_tokens: total, ..ProtocolTranscript::default() };
        let v = collision_check(&mut t, 0.01);
        if v.accepted != accept || v.exact != exact {
            problems.push(format!("rate {collisions}/{total}: accepted={} exact={}", v.accepted, v.exact));
        }
    }

    let detail = format!("100 ring runs, {messages} messages scanned, {fixtures} threshold fixtures");
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}

fn topology_independence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70_7010);
    let mut problems = Vec::new();
    let mut min_cross = u64::MAX;
    for run in 0..20 {
        let n = rng.random_range(10..=40);
        let m = rng.random_range(5..=9);
        let density = rng.random_range(0.3..0.6);
        let rows = random_rows(&mut rng, n, m, density);
        let input = dir.path().join(format!("db{run}.txt"));
        std::fs::write(&input, rows_text(&rows)).unwrap();
        let mut payloads = Vec::new();
        let mut cross = BTreeMap::new();
        for scenario in Scenario::ALL {
            let args = MineArgs {
                input: Some(input.clone()),
                fragments: None,
                scenario,
                min_count: (n / 5).max(2) as u64,
                theta: 0.5,
                tau: 0.01,
                seed: run,
                parties: 3,
                name: "d".into(),
                out: dir.path().join("out"),
                key: None,
            };
            let mined = cmd_mine(&args).unwrap();
            let codetable = std::fs::read(mined.dir.join("codetable.txt")).unwrap();
            payloads.push((scenario, mined.result.payload.to_bytes(), codetable));
            cross.insert(scenario.preset(), mined.result.stats.cross_csp_messages);
        }
        let (_, bytes0, ct0) = &payloads[0];
        for (scenario, bytes, ct) in &payloads[1..] {
            if bytes != bytes0 || ct != ct0 {
                problems.push(format!("db {run}: {} payload differs from standalone", scenario.preset()));
            }
        }
        let (standalone, hetero) = (cross["standalone"], cross["heterogeneous"]);
        if standalone != 0 || hetero <= standalone {
            problems.push(format!("db {run}: cross-CSP messages standalone={standalone} heterogeneous={hetero}"));
        }
        min_cross = min_cross.min(hetero);
    }
    let detail =
        format!("20 dbs x 4 presets byte-identical; heterogeneous cross-CSP messages >= {min_cross}, standalone 0");
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}

fn keyword(rng: &mut ChaCha8Rng, k: &str) -> String {
    match rng.random_range(0..3) {
        0 => k.to_uppercase(),
        1 => k.to_lowercase(),
        _ => k
            .chars()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
            .collect(),
    }
}

/// A generated query and the rows the plaintext engine expects for it.
struct Generated {
    text: String,
    expected: Vec<(u32, Row)>,
}

fn generate_query(rng: &mut ChaCha8Rng, a: &[Row], b: &[Row]) -> Generated {
    let join = rng.random_bool(0.3);
    let mut alpha: BTreeSet<u32> = alphabet(a).into_iter().collect();
    if join {
        alpha.extend(alphabet(b));
    }
    let alpha: Vec<u32> = alpha.into_iter().collect();
    let projection: Option<BTreeSet<u32>> = rng.random_bool(0.4).then(|| {
        let k = rng.random_range(1..=alpha.len().min(4));
        alpha.choose_multiple(rng, k).copied().collect()
    });
    let predicate: BTreeSet<u32> = {
        let k = rng.random_range(0..=alpha.len().min(3));
        alpha.choose_multiple(rng, k).copied().collect()
    };

    let mut text = keyword(rng, "select");
    match &projection {
        None => text.push_str(" *"),
        Some(p) => {
            let sep = *[",", ", ", " , "].choose(rng).unwrap();
            text.push(' ');
            text.push_str(&p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep));
        }
    }
    let _ = write!(text, " {} a", keyword(rng, "from"));
    if join {
        let _ = write!(text, " {} b {} {}", keyword(rng, "join"), keyword(rng, "on"), keyword(rng, "id"));
    }
    if !predicate.is_empty() {
        let has: Vec<String> = predicate.iter().map(|i| format!("{} {i}", keyword(rng, "has"))).collect();
        let _ = write!(text, " {} {}", keyword(rng, "where"), has.join(&format!(" {} ", keyword(rng, "and"))));
    }
    let _ = write!(text, " {} {}", keyword(rng, "mode"), keyword(rng, "exact"));

    let project = |r: &Row| -> Row {
        match &projection {
            None => r.clone(),
            Some(p) => r.intersection(p).copied().collect(),
        }
    };
    let mut expected = Vec::new();
    for (n, ra) in a.iter().enumerate() {
        let tid = n as u32 + 1;
        if join {
            let rb = &b[n];
            let whole: Row = ra.union(rb).copied().collect();
            if predicate.is_subset(&whole) {
                expected.push((tid, project(ra).union(&project(rb)).copied().collect()));
            }
        } else if predicate.is_subset(ra) {
            expected.push((tid, project(ra)));
        }
    }
    Generated { text, expected }
}

fn check_rows(out: &QueryOutput, expected: &[(u32, Row)]) -> Result<(), String> {
    let QueryResult::Rows { count, approximate, .. } = &out.result else {
        return Err("not a row answer".into());
    };
    if *approximate {
        return Err("approximate count".into());
    }
    if *count != expected.len() {
        return Err(format!("count {count}, reference {}", expected.len()));
    }
    let decoded = out.decode_rows().map_err(|e| e.to_string())?;
    let got: Vec<(u32, Row)> =
        decoded.into_iter().map(|(tid, sets)| (tid, sets.iter().flat_map(|s| s.iter()).collect())).collect();
    if got != expected {
        return Err(format!("rows {got:?}, reference {expected:?}"));
    }
    Ok(())
}

fn check_envelope(out: &QueryOutput, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let key = UserKey::generate(rng);
    let answer = encrypt_answer(out, &key, rng);
    let back = decrypt_answer(&QueryAnswer::from_base64(&answer.to_base64()).map_err(|e| e.to_string())?, &key)
        .map_err(|e| format!("round trip: {e}"))?;
    if &back != out {
        return Err("round trip changed the answer".into());
    }
    if decrypt_answer(&answer, &UserKey::generate(rng)).is_ok() {
        return Err("a different key decrypted the answer".into());
    }
    let bytes = answer.to_bytes();
    for pos in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[pos] ^= rng.random_range(1..=255u8);
        if let Ok(tampered) = QueryAnswer::from_bytes(&bad) {
            if decrypt_answer(&tampered, &key).is_ok() {
                return Err(format!("byte {pos} tampered and still authenticated"));
            }
        }
    }
    Ok(bytes.len())
}

fn query_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e_e21);
    let mut problems = Vec::new();
    let (mut queries, mut topk, mut tampered) = (0usize, 0usize, 0usize);
    for round in 0..12u64 {
        let n = rng.random_range(4..=25);
        let m = rng.random_range(3..=7);
        let a = random_rows(&mut rng, n, m, 0.45);
        let m = rng.random_range(3..=7);
        let b = random_rows(&mut rng, n, m, 0.45);
        let settings = ProtocolSettings { seed: round, ..ProtocolSettings::default() };
        let mut catalog = QueryCatalog::new(settings);
        let mut models = BTreeMap::new();
        for (name, rows) in [("a", &a), ("b", &b)] {
            let db = database(rows);
            let owner = alphabet(rows).into_iter().map(|i| (i, PartyId(1 + i % 2))).collect();
            let frags = partition_vertical(&db, name, &owner).unwrap();
            let mined = mine_model(frags.clone(), 2, 0.5, &settings).unwrap();
            catalog.add_fragments(frags).unwrap();
            // half the rounds answer exact queries with the model's symbols
            if round % 2 == 0 {
                catalog.add_model(name, mined.model.code_table.clone());
            }
            models.insert(name, mined.model.code_table);
        }

        for _ in 0..20 {
            let g = generate_query(&mut rng, &a, &b);
            queries += 1;
            let result = parse_query(&g.text)
                .map_err(|e| e.to_string())
                .and_then(|ast| execute_query(&ast, &catalog).map_err(|e| e.to_string()));
            let checked = result.and_then(|out| {
                check_rows(&out, &g.expected)?;
                check_envelope(&out, &mut rng)
            });
            match checked {
                Ok(len) => tampered += len,
                Err(e) => problems.push(format!("{}: {e}", g.text)),
            }
        }

        if round % 2 == 0 {
            let k = rng.random_range(1..=6);
            topk += 1;
            let text = format!("TOPK {k} ITEMSETS FROM a");
            let out = execute_query(&parse_query(&text).unwrap(), &catalog).unwrap();
            let QueryResult::TopK { ranked } = &out.result else { unreachable!() };
            let mut want: Vec<(Vec<u32>, usize)> = models["a"]
                .entries()
                .iter()
                .map(|e| (items_of(&e.itemset), support(&a, &items_of(&e.itemset))))
                .collect();
            want.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            want.truncate(k);
            let got: Vec<(Vec<u32>, usize)> = ranked.iter().map(|&(s, sup)| (items_of(&out.symbols[s]), sup)).collect();
            if got != want {
                problems.push(format!("{text}: {got:?}, reference {want:?}"));
            }
        }
    }
    let detail =
        format!("{queries} exact queries and {topk} top-k queries match; {tampered} single-byte tamperings rejected");
    if queries < 200 {
        problems.push(format!("only {queries} queries generated"));
    }
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}

fn check_model(rows: &[Row], inputs: &[(Vec<u32>, usize)], model: &GlobalModel) -> Result<(), String> {
    let baseline = oracle_table(rows, inputs).size;
    let output: Vec<(Vec<u32>, usize)> =
        model.code_table.patterns().iter().map(|e| (items_of(&e.itemset), e.support)).collect();
    let fin = oracle_table(rows, &output);
    if fin.size > baseline + 1e-9 {
        return Err(format!("{} bits after merging, baseline {baseline}", fin.size));
    }
    let table: Vec<Vec<u32>> = fin.entries.iter().map(|e| e.0.clone()).collect();
    let db = database(rows);
    for (row, t) in rows.iter().zip(db.transactions()) {
        if &oracle_cover(row, &table) != row {
            return Err(format!("row {row:?} not covered"));
        }
        let lib: Row = cover(t, &model.code_table).map_err(|e| e.to_string())?.union().iter().collect();
        if &lib != row {
            return Err(format!("library cover of {row:?} gives {lib:?}"));
        }
    }
    if !kraft_ok(&model.code_table) {
        return Err(format!("Kraft sum {}", kraft(&model.code_table)));
    }
    let used: usize = fin.usage.iter().sum();
    if rows.iter().any(|r| !r.is_empty()) && used == 0 {
        return Err("no usage".into());
    }
    Ok(())
}

fn pruning_merging() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e_26e);
    let mut problems = Vec::new();
    let (mut runs, mut merges) = (0usize, 0usize);
    for run in 0..60u64 {
        let n = rng.random_range(5..=40);
        let m = rng.random_range(3..=8);
        let density = rng.random_range(0.3..0.7);
        let rows = random_rows(&mut rng, n, m, density);
        let db = database(&rows);
        let theta = rng.random_range(1..=10) as f64 / 10.0;
        let min_count = rng.random_range(1..=(n / 4).max(1));

        // levelwise output of a 2-party split
        let owner = alphabet(&rows).into_iter().map(|i| (i, PartyId(1 + i % 2))).collect();
        let frags = partition_vertical(&db, "d", &owner).unwrap();
        let settings = ProtocolSettings { seed: run, ..ProtocolSettings::default() };
        let mined = mine_model(frags, min_count, theta, &settings).unwrap();
        let inputs: Vec<(Vec<u32>, usize)> =
            mined.itemsets.itemsets().map(|c| (items_of(&c.itemset), c.count)).collect();
        runs += 1;
        merges += mined.model.audit.iter().filter(|r| r.accepted).count();
        if let Err(e) = check_model(&rows, &inputs, &mined.model) {
            problems.push(format!("run {run} levelwise: {e}"));
        }

        // per-part code tables of a horizontal split
        let parts = partition_horizontal(&db, rng.random_range(1..=3)).unwrap();
        let tables: Vec<CodeTable> = parts.iter().map(|p| krimp_compress(p, 1).unwrap()).collect();
        let mut inputs: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        for e in tables.iter().flat_map(|t| t.patterns()) {
            let s = inputs.entry(items_of(&e.itemset)).or_default();
            *s = (*s).max(e.support);
        }
        let inputs: Vec<(Vec<u32>, usize)> = inputs.into_iter().collect();
        let model = pruning_merging_tables(&tables, &db, theta);
        runs += 1;
        merges += model.audit.iter().filter(|r| r.accepted).count();
        if let Err(e) = check_model(&rows, &inputs, &model) {
            problems.push(format!("run {run} tables: {e}"));
        }
    }
    let detail = format!("{runs} merge runs ({merges} accepted removals) within baseline, covers total");
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}
