use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fedmdl_core::cloudsim::{build_topology, submit_job, Cluster, Job, JobOp, JobPayload, JobResult, PlacementPolicy};
use fedmdl_core::datamodel::{
    contiguous_assignment, k_anonymize, partition_vertical, Fragment, Generalization, RelationSchema,
    TransactionDatabase,
};
use fedmdl_core::federated::ProtocolSettings;
use fedmdl_core::krimp::CodeTable;
use fedmdl_core::query::{
    decrypt_answer, encrypt_answer, parse_query, Mode, QueryAnswer, QueryError, QueryOutput, QueryResult, UserKey,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::rundir::{load_run, read_fragments, read_key, sha256_hex, write_fragments, LoadedRun, RunConfig};
use crate::{BenchArgs, MineArgs, QueryArgs, Scenario};

fn read_db(path: &Path) -> Result<(TransactionDatabase, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let db = TransactionDatabase::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((db, bytes))
}

pub fn cmd_ingest(path: &Path, store: Option<&Path>) -> Result<String> {
    let (db, _) = read_db(path)?;
    if let Some(dest) = store {
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(dest, db.to_text()).with_context(|| format!("writing {}", dest.display()))?;
    }
    Ok(format!(
        "{} transactions, {} items, {} item occurrences\n",
        db.len(),
        db.alphabet().len(),
        db.item_occurrences()
    ))
}

/// `COLUMN=suffix` or `COLUMN=interval:WIDTH`.
pub fn parse_quasi(spec: &str) -> Result<(String, Generalization)> {
    let (col, kind) = spec.split_once('=').with_context(|| format!("expected COLUMN=KIND, got {spec:?}"))?;
    let g = match kind.split_once(':') {
        None if kind == "suffix" => Generalization::SuffixMask,
        Some(("interval", w)) => {
            Generalization::Interval { width: w.parse().with_context(|| format!("bad width {w:?}"))? }
        }
        _ => bail!("unknown hierarchy {kind:?}; use suffix or interval:WIDTH"),
    };
    Ok((col.to_string(), g))
}

pub fn cmd_anonymize(path: &Path, k: usize, quasi: &[String], output: Option<&Path>) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table = RelationSchema::from_csv(&text)?;
    let specs = quasi.iter().map(|q| parse_quasi(q)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&str, Generalization)> = specs.iter().map(|(c, g)| (c.as_str(), *g)).collect();
    let anon = k_anonymize(&table, &refs, k)?;
    let csv = anon.table.to_csv();
    match output {
        Some(p) => {
            fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
            Ok(format!("{} rows, smallest class {}\n", anon.table.rows.len(), anon.min_class_size()))
        }
        None => Ok(csv),
    }
}

fn split(db: &TransactionDatabase, parties: usize, name: &str) -> Result<Vec<Fragment>> {
    Ok(partition_vertical(db, name, &contiguous_assignment(db.alphabet(), parties))?)
}

pub fn cmd_partition(path: &Path, parties: usize, name: &str, out: &Path) -> Result<String> {
    let (db, _) = read_db(path)?;
    let fragments = split(&db, parties, name)?;
    let paths = write_fragments(out, &fragments)?;
    let mut report = String::new();
    for (f, p) in fragments.iter().zip(paths) {
        let items: Vec<String> = f.items.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(report, "{} items {} -> {}", f.id(), items.join(","), p.display());
    }
    Ok(report)
}

fn settings(tau: f64, seed: u64) -> ProtocolSettings {
    ProtocolSettings { tau, seed, ..ProtocolSettings::default() }
}

fn run_mine_job(
    fragments: Vec<Fragment>,
    preset: &str,
    min_count: usize,
    theta: f64,
    s: ProtocolSettings,
) -> Result<(Cluster, JobResult)> {
    let Some(database) = fragments.first().map(|f| f.meta.database.clone()) else {
        bail!("database has no items to mine");
    };
    let mut cluster = Cluster::new(build_topology(preset)?)?;
    cluster.place_fragments(fragments, PlacementPolicy::RoundRobin)?;
    let job = Job { op: JobOp::Mine { min_count, theta, settings: s }, database };
    let result = submit_job(&cluster, &job)?;
    Ok((cluster, result))
}

/// Output of one `mine` invocation.
#[derive(Debug)]
pub struct MineRun {
    pub dir: PathBuf,
    pub result: JobResult,
    pub report: String,
}

pub fn cmd_mine(args: &MineArgs) -> Result<MineRun> {
    let (fragments, input_digest) = match (&args.input, &args.fragments) {
        (Some(path), _) => {
            let (db, bytes) = read_db(path)?;
            (split(&db, args.parties, &args.name)?, sha256_hex(&bytes))
        }
        (None, Some(dir)) => {
            let frags = read_fragments(dir)?;
            let all: String = frags.iter().map(Fragment::to_text).collect();
            (frags, sha256_hex(all.as_bytes()))
        }
        (None, None) => bail!("give a database file or --fragments"),
    };
    let config = RunConfig {
        name: fragments.first().map_or(args.name.clone(), |f| f.meta.database.clone()),
        scenario: args.scenario.preset().to_string(),
        min_count: args.min_count as usize,
        theta: args.theta,
        tau: args.tau,
        seed: args.seed,
        parties: fragments.len(),
        input_digest,
    };
    let (cluster, result) = run_mine_job(
        fragments.clone(),
        &config.scenario,
        config.min_count,
        config.theta,
        settings(config.tau, config.seed),
    )?;
    let JobPayload::Mine(mined) = &result.payload else { unreachable!("mine job returns a mined model") };

    let dir = args.out.join(config.run_id());
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    fs::create_dir_all(dir.join("transcripts"))?;
    let write = |name: &str, body: &str| fs::write(dir.join(name), body).with_context(|| format!("writing {name}"));
    write("codetable.txt", &mined.model.code_table.to_text())?;
    write("model.json", &serde_json::to_string_pretty(&mined.model)?)?;
    write("trace.log", &mined.trace.to_text())?;
    write("events.log", &result.trace_text())?;
    write("timing.txt", &timing_report(&config.scenario, &result))?;
    write("topology.cfg", &cluster.topology().to_config())?;
    write("run.json", &serde_json::to_string_pretty(&config)?)?;
    for (n, (c, t)) in mined.trace.transcripts.iter().enumerate() {
        let items: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        write(&format!("transcripts/{:04}-{}.log", n + 1, items.join("_")), &t.to_log())?;
    }
    write_fragments(&dir.join("fragments"), &fragments)?;
    if let Some(key) = &args.key {
        let k = read_key(key)?;
        write("user.key", &format!("{}\n", k.to_hex()))?;
    }

    let ct = &mined.model.code_table;
    let mut report = String::new();
    let _ = writeln!(report, "run {}", dir.display());
    let _ = writeln!(report, "frequent itemsets {}", mined.itemsets.len());
    let _ = writeln!(
        report,
        "code table {} patterns, {:.6} bits (before merge {:.6})",
        ct.patterns().len(),
        mined.model.final_bits,
        mined.model.baseline_bits
    );
    let s = result.stats;
    let _ = writeln!(
        report,
        "elapsed_us={} messages={} bytes={} cross_csp_messages={}",
        result.elapsed_us, s.messages, s.bytes, s.cross_csp_messages
    );
    Ok(MineRun { dir, result, report })
}

fn timing_report(scenario: &str, r: &JobResult) -> String {
    let s = r.stats;
    let mut out = format!(
        "scenario={scenario}\nelapsed_us={}\nmessages={} bytes={} cross_csp_messages={} cross_csp_bytes={}\n",
        r.elapsed_us, s.messages, s.bytes, s.cross_csp_messages, s.cross_csp_bytes
    );
    for (node, us) in &r.node_times {
        let _ = writeln!(out, "node={node} busy_us={us}");
    }
    out
}

/// Nonce stream for one answer: a function of the seed and the plaintext.
pub(crate) fn answer_rng(seed: u64, output: &QueryOutput) -> ChaCha20Rng {
    let body = serde_json::to_vec(output).expect("answers serialize");
    let mut material = seed.to_le_bytes().to_vec();
    material.extend_from_slice(&body);
    let digest = hex::decode(sha256_hex(&material)).expect("hex");
    ChaCha20Rng::from_seed(digest.try_into().expect("32 bytes"))
}

pub fn encrypt_for(output: &QueryOutput, key: &UserKey, seed: u64) -> QueryAnswer {
    encrypt_answer(output, key, &mut answer_rng(seed, output))
}

/// Plaintext result of a query against a run, before encryption.
pub fn execute_on_run(run: &LoadedRun, text: &str, mode: Option<Mode>) -> Result<QueryOutput> {
    let mut cluster = Cluster::new(run.topology.clone())?;
    cluster.place_fragments(run.fragments.clone(), PlacementPolicy::RoundRobin)?;
    execute_on_cluster(&cluster, &run.config, &run.model.code_table, text, mode)
}

/// Parses `text` and runs it as a query job on `cluster`.
pub fn execute_on_cluster(
    cluster: &Cluster,
    config: &RunConfig,
    model: &CodeTable,
    text: &str,
    mode: Option<Mode>,
) -> Result<QueryOutput> {
    let mut ast = parse_query(text)?;
    if let Some(m) = mode {
        ast.mode = m;
    }
    if let Some(db) = ast.databases.iter().find(|d| **d != config.name) {
        return Err(QueryError::UnknownDatabase(db.clone()).into());
    }
    let job = Job {
        op: JobOp::Query { ast, model: Some(model.clone()), settings: settings(config.tau, config.seed) },
        database: config.name.clone(),
    };
    match submit_job(cluster, &job)?.payload {
        JobPayload::Query(out) => Ok(out),
        _ => unreachable!("query job returns a query output"),
    }
}

pub fn cmd_query(args: &QueryArgs) -> Result<String> {
    let run = load_run(&args.run)?;
    let registered = run
        .key
        .clone()
        .with_context(|| format!("no user key registered in {}; pass --key to mine", args.run.display()))?;
    let output = execute_on_run(&run, &args.text, args.mode.map(Into::into))?;
    let answer = encrypt_for(&output, &registered, run.config.seed);
    if args.raw {
        return Ok(format!("{}\n", answer.to_base64()));
    }
    let key = read_key(args.key.as_ref().expect("clap requires --key without --raw"))?;
    Ok(render(&decrypt_answer(&answer, &key)?))
}

pub fn cmd_decrypt(answer: &str, key: &Path) -> Result<String> {
    let answer = QueryAnswer::from_base64(answer)?;
    Ok(render(&decrypt_answer(&answer, &read_key(key)?)?))
}

/// Decrypted answer as text: rows as `tid,symbols` CSV followed by the
/// symbols they use; top-k as `itemset,support`.
pub fn render(out: &QueryOutput) -> String {
    let mut text = String::new();
    if let QueryResult::Rows { count, approximate, rows } = &out.result {
        let _ = writeln!(text, "count={count} approximate={approximate}");
        text.push_str(&out.to_csv());
        let used: BTreeSet<usize> = rows.iter().flat_map(|r| r.symbols.iter().copied()).collect();
        if !used.is_empty() {
            text.push_str("\nsymbol,itemset\n");
            for s in used {
                let _ = writeln!(text, "{s},{}", out.symbols[s]);
            }
        }
    } else {
        text.push_str(&out.to_csv());
    }
    text
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRow {
    pub rows: usize,
    pub scenario: Scenario,
    pub elapsed_us: u64,
    pub messages: u64,
    pub bytes: u64,
    pub cross_csp_messages: u64,
    pub cross_csp_bytes: u64,
    pub payload_sha256: String,
}

#[derive(Debug)]
pub struct BenchRun {
    pub dir: PathBuf,
    pub rows: Vec<BenchRow>,
    pub payload_equal: bool,
    pub report: String,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchRun> {
    let (db, bytes) = read_db(&args.input)?;
    let tiers = if args.tiers.is_empty() { vec![db.len()] } else { args.tiers.clone() };
    let s = settings(args.tau, args.seed);
    let mut rows = Vec::new();
    let mut payload_equal = true;
    for &tier in &tiers {
        let n = tier.min(db.len());
        let sub = TransactionDatabase::from_itemsets(db.transactions()[..n].to_vec());
        let fragments = split(&sub, args.parties, "d")?;
        let mut first: Option<Vec<u8>> = None;
        for scenario in Scenario::ALL {
            let (_, r) = run_mine_job(fragments.clone(), scenario.preset(), args.min_count as usize, args.theta, s)?;
            let payload = r.payload.to_bytes();
            match &first {
                None => first = Some(payload.clone()),
                Some(p) => payload_equal &= *p == payload,
            }
            rows.push(BenchRow {
                rows: n,
                scenario,
                elapsed_us: r.elapsed_us,
                messages: r.stats.messages,
                bytes: r.stats.bytes,
                cross_csp_messages: r.stats.cross_csp_messages,
                cross_csp_bytes: r.stats.cross_csp_bytes,
                payload_sha256: sha256_hex(&payload),
            });
        }
    }
    let mut csv =
        String::from("rows,scenario,elapsed_us,messages,bytes,cross_csp_messages,cross_csp_bytes,payload_sha256\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.rows,
            r.scenario.preset(),
            r.elapsed_us,
            r.messages,
            r.bytes,
            r.cross_csp_messages,
            r.cross_csp_bytes,
            &r.payload_sha256[..16]
        );
    }
    let config = format!(
        "bench {} {} {} {} {} {:?} {}",
        args.min_count,
        args.theta,
        args.tau,
        args.parties,
        args.seed,
        tiers,
        sha256_hex(&bytes)
    );
    let dir = args.out.join(format!("{}-{}", args.seed, &sha256_hex(config.as_bytes())[..12]));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("bench.csv"), &csv)?;
    let report = format!("{csv}payload-equal={payload_equal}\n");
    Ok(BenchRun { dir, rows, payload_equal, report })
}

pub fn cmd_keygen(out: &Path, seed: Option<u64>) -> Result<String> {
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    };
    let key = UserKey::generate(&mut rng);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, format!("{}\n", key.to_hex())).with_context(|| format!("writing {}", out.display()))?;
    Ok(format!("wrote key to {}\n", out.display()))
}
