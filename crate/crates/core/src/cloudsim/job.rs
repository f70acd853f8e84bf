use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::datamodel::{to_horizontal, Fragment, Itemset, PartyId, VerticalIndex};
use crate::federated::{
    count_candidate, mine_federation_model, pruning_merging_tables, CountOutcome, Federation, GlobalModel, MinedModel,
    ProtocolSettings,
};
use crate::krimp::{krimp_compress, CodeTable};
use crate::protocol::ProtocolTranscript;
use crate::query::{execute_query, QueryAst, QueryCatalog, QueryOutput, QueryResult};

use super::cluster::Cluster;
use super::topology::{Role, Topology};
use super::CloudError;

/// Size of a job announcement on the wire.
const CONTROL_BYTES: u64 = 64;
/// Bytes per reported count or row.
const RECORD_BYTES: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum JobOp {
    /// Levelwise federated mining plus the merge into one model.
    Mine {
        min_count: usize,
        theta: f64,
        settings: ProtocolSettings,
    },
    /// Support of one itemset.
    Count {
        itemset: Itemset,
        settings: ProtocolSettings,
    },
    /// Compress each fragment on its own, then merge the tables.
    Merge {
        min_count: usize,
        theta: f64,
    },
    Query {
        ast: QueryAst,
        model: Option<CodeTable>,
        settings: ProtocolSettings,
    },
}

impl JobOp {
    pub fn tag(&self) -> &'static str {
        match self {
            JobOp::Mine { .. } => "mine",
            JobOp::Count { .. } => "count",
            JobOp::Merge { .. } => "merge",
            JobOp::Query { .. } => "query",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub op: JobOp,
    /// Every fragment of this database (both, for a join) is a target.
    pub database: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum JobPayload {
    Mine(Box<MinedModel>),
    Count(CountOutcome),
    Merge(Box<GlobalModel>),
    Query(QueryOutput),
}

impl JobPayload {
    /// Canonical bytes of the payload. Equal across topologies.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        match self {
            JobPayload::Mine(m) => {
                out.push_str(&m.model.code_table.to_text());
                out.push_str(&m.trace.to_text());
                for (c, t) in &m.trace.transcripts {
                    let _ = writeln!(out, "transcript {c}");
                    out.push_str(&t.to_log());
                }
            }
            JobPayload::Count(c) => {
                let _ =
                    writeln!(out, "{} count={} approximate={}", c.count.itemset, c.count.count, c.count.approximate);
                if let Some(t) = &c.transcript {
                    out.push_str(&t.to_log());
                }
            }
            JobPayload::Merge(m) => out.push_str(&m.code_table.to_text()),
            JobPayload::Query(q) => out.push_str(&serde_json::to_string(q).expect("answers serialize")),
        }
        out.into_bytes()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetStats {
    pub messages: u64,
    pub bytes: u64,
    pub cross_csp_messages: u64,
    pub cross_csp_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub node: String,
    pub kind: String,
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} node={} event={}", self.t, self.node, self.kind)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobResult {
    pub payload: JobPayload,
    /// Simulated microseconds until the coordinator holds the result.
    pub elapsed_us: u64,
    /// Simulated compute microseconds per node.
    pub node_times: BTreeMap<String, u64>,
    pub stats: NetStats,
    pub events: Vec<Event>,
}

impl JobResult {
    pub fn trace_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Per-node clocks advanced by compute steps and message deliveries.
struct Sim<'a> {
    topo: &'a Topology,
    clock: BTreeMap<String, u64>,
    busy: BTreeMap<String, u64>,
    events: Vec<Event>,
    stats: NetStats,
}

impl<'a> Sim<'a> {
    fn new(topo: &'a Topology) -> Self {
        Sim { topo, clock: BTreeMap::new(), busy: BTreeMap::new(), events: Vec::new(), stats: NetStats::default() }
    }

    fn now(&self, node: &str) -> u64 {
        self.clock.get(node).copied().unwrap_or(0)
    }

    fn check_up(&self, node: &str) -> Result<(), CloudError> {
        match self.topo.node(node) {
            Some(n) if n.up => Ok(()),
            _ => Err(CloudError::Unreachable { node: node.to_string(), trace: self.sorted_lines() }),
        }
    }

    fn log(&mut self, t: u64, node: &str, kind: &str, detail: String) {
        self.events.push(Event { t, node: node.to_string(), kind: kind.to_string(), detail });
    }

    fn compute(&mut self, node: &str, kind: &str, work: u64, detail: &str) -> Result<(), CloudError> {
        self.check_up(node)?;
        let dt = (self.topo.alpha(node) * work as f64).round() as u64;
        let start = self.now(node);
        self.log(start, node, kind, format!("work={work} {detail}").trim_end().to_string());
        self.clock.insert(node.to_string(), start + dt);
        *self.busy.entry(node.to_string()).or_default() += dt;
        Ok(())
    }

    fn send(&mut self, from: &str, to: &str, bytes: u64, what: &str) -> Result<(), CloudError> {
        if from == to {
            return Ok(());
        }
        self.check_up(from)?;
        self.check_up(to)?;
        let t0 = self.now(from);
        let arrive = t0 + self.topo.latency_us(from, to);
        self.log(t0, from, "send", format!("to={to} bytes={bytes} msg={what}"));
        self.log(arrive, to, "recv", format!("from={from} bytes={bytes} msg={what}"));
        let c = self.clock.entry(to.to_string()).or_default();
        *c = (*c).max(arrive);
        self.stats.messages += 1;
        self.stats.bytes += bytes;
        if self.topo.is_cross_csp(from, to) {
            self.stats.cross_csp_messages += 1;
            self.stats.cross_csp_bytes += bytes;
        }
        Ok(())
    }

    fn sorted_lines(&self) -> Vec<String> {
        let mut ev: Vec<&Event> = self.events.iter().collect();
        ev.sort_by_key(|e| e.t);
        ev.iter().map(|e| e.to_string()).collect()
    }

    fn finish(mut self, payload: JobPayload, coordinator: &str) -> JobResult {
        self.events.sort_by_key(|e| e.t);
        JobResult {
            payload,
            elapsed_us: self.now(coordinator),
            node_times: self.busy,
            stats: self.stats,
            events: self.events,
        }
    }
}

/// Per-fragment work: units of map work and records sent to the master.
#[derive(Default)]
struct MapWork {
    units: u64,
    records: u64,
}

/// Runs a job over the cluster's stored fragments.
///
/// The payload is computed by the same functions a single machine would
/// call, so it depends on the data and the job only. The schedule around it
/// is simulated: the coordinator announces the job to the masters of every
/// cloud holding a target, masters forward it to their slaves, slaves run
/// the map work and the protocol rounds (each ring message travels between
/// the nodes holding the two parties' fragments), and partial results flow
/// back through the masters to the coordinator.
pub fn submit_job(cluster: &Cluster, job: &Job) -> Result<JobResult, CloudError> {
    let topo = cluster.topology();
    let databases: Vec<String> = match &job.op {
        JobOp::Query { ast, .. } => ast.databases.clone(),
        _ => vec![job.database.clone()],
    };
    let mut feds: BTreeMap<String, Federation> = BTreeMap::new();
    let mut location: BTreeMap<(String, PartyId), String> = BTreeMap::new();
    for db in &databases {
        if feds.contains_key(db) {
            continue;
        }
        let entries: Vec<_> = cluster.catalog().of_database(db).cloned().collect();
        let model_only =
            matches!(&job.op, JobOp::Query { model: Some(_), ast, .. } if ast.mode == crate::query::Mode::Model);
        if entries.is_empty() && !model_only {
            return Err(CloudError::UnknownDatabase(db.clone()));
        }
        if entries.is_empty() {
            continue;
        }
        let mut frags = Vec::new();
        for e in &entries {
            let f = cluster.fragment(&e.fragment)?.clone();
            location.insert((db.clone(), f.party()), e.node.clone());
            frags.push(f);
        }
        feds.insert(db.clone(), Federation::new(frags)?);
    }

    let coordinator = topo.coordinator().name.clone();
    let mut sim = Sim::new(topo);
    sim.check_up(&coordinator)?;

    let holders: Vec<String> = {
        let mut h: Vec<String> = location.values().cloned().collect();
        h.sort_by_key(|n| topo.nodes.iter().position(|x| &x.name == n));
        h.dedup();
        h
    };
    dispatch(&mut sim, topo, &coordinator, &holders, job.op.tag())?;

    let primary = feds.get(&job.database);
    let (payload, map, transcripts, reduce_units) = match &job.op {
        JobOp::Mine { min_count, theta, settings } => {
            let fed = primary.expect("checked above");
            let mined = mine_federation_model(fed, *min_count, *theta, settings)?;
            let mut map: BTreeMap<String, MapWork> = BTreeMap::new();
            for line in &mined.trace.lines {
                add_share_work(&mut map, fed, &location, &line.itemset)?;
            }
            let transcripts = mined.trace.transcripts.iter().map(|(_, t)| t.clone()).collect();
            let reduce = (mined.itemsets.len() as u64).max(1) * (fed.n_transactions() as u64).max(1);
            (JobPayload::Mine(Box::new(mined)), map, transcripts, reduce)
        }
        JobOp::Count { itemset, settings } => {
            let fed = primary.expect("checked above");
            let out = count_candidate(itemset, fed, settings)?;
            let mut map = BTreeMap::new();
            add_share_work(&mut map, fed, &location, itemset)?;
            let transcripts = out.transcript.iter().cloned().collect();
            (JobPayload::Count(out), map, transcripts, 1)
        }
        JobOp::Merge { min_count, theta } => {
            let fed = primary.expect("checked above");
            let mut map: BTreeMap<String, MapWork> = BTreeMap::new();
            let mut tables = Vec::new();
            for f in fed.fragments() {
                let local = to_horizontal(&VerticalIndex { tidsets: f.tidsets.clone() }, f.meta.n_transactions)?;
                let mut ct = krimp_compress(&local, *min_count)?;
                ct.provenance = f.id();
                let w = map.entry(node_of(&location, f)).or_default();
                w.units += (f.occurrences() as u64).max(1) * (ct.len() as u64);
                w.records += ct.len() as u64;
                tables.push(ct);
            }
            let db = fed.joined_database();
            let merged = pruning_merging_tables(&tables, &db, *theta);
            let reduce = tables.iter().map(|t| t.len() as u64).sum::<u64>() * (db.len() as u64).max(1);
            (JobPayload::Merge(Box::new(merged)), map, Vec::new(), reduce)
        }
        JobOp::Query { ast, model, settings } => {
            let mut qc = QueryCatalog::new(*settings);
            for fed in feds.values() {
                qc.add_federation(fed.clone());
            }
            if let Some(m) = model {
                qc.add_model(&ast.databases[0], m.clone());
            }
            let out = execute_query(ast, &qc)?;
            let mut map: BTreeMap<String, MapWork> = BTreeMap::new();
            for db in &ast.databases {
                if let Some(fed) = feds.get(db) {
                    let share: Itemset = ast.predicate.iter().filter(|&i| fed.owner_of(i).is_some()).collect();
                    add_share_work(&mut map, fed, &location, &share)?;
                }
            }
            let rows = match &out.result {
                QueryResult::Rows { rows, .. } => rows.len() as u64,
                QueryResult::TopK { ranked } => ranked.len() as u64,
            };
            (JobPayload::Query(out), map, Vec::new(), rows.max(1))
        }
    };

    for (node, w) in &map {
        sim.compute(node, "map", w.units, "")?;
    }
    for t in &transcripts {
        replay_protocol(&mut sim, t, &job.database, &location)?;
    }
    reduce(&mut sim, topo, &coordinator, &map, reduce_units)?;
    Ok(sim.finish(payload, &coordinator))
}

fn node_of(location: &BTreeMap<(String, PartyId), String>, f: &Fragment) -> String {
    location[&(f.meta.database.clone(), f.party())].clone()
}

fn dispatch(
    sim: &mut Sim<'_>,
    topo: &Topology,
    coordinator: &str,
    holders: &[String],
    tag: &str,
) -> Result<(), CloudError> {
    let mut by_cloud: Vec<(String, Vec<&String>)> = Vec::new();
    for h in holders {
        let cloud = &topo.node(h).expect("placed on a known node").cloud;
        let master = topo.master_of(cloud).expect("validated").name.clone();
        match by_cloud.iter_mut().find(|(m, _)| m == &master) {
            Some((_, v)) => v.push(h),
            None => by_cloud.push((master, vec![h])),
        }
    }
    for (master, _) in &by_cloud {
        sim.send(coordinator, master, CONTROL_BYTES, &format!("job:{tag}"))?;
    }
    for (master, nodes) in &by_cloud {
        for n in nodes {
            sim.send(master, n, CONTROL_BYTES, &format!("job:{tag}"))?;
        }
    }
    Ok(())
}

/// Each party intersects the tidsets of its share of `c`.
fn add_share_work(
    map: &mut BTreeMap<String, MapWork>,
    fed: &Federation,
    location: &BTreeMap<(String, PartyId), String>,
    c: &Itemset,
) -> Result<(), CloudError> {
    for (party, share) in fed.split(c)? {
        let f = fed.fragments().iter().find(|f| f.party() == party).expect("split names holders");
        let units: usize = share.iter().map(|i| f.tidsets.get(&i).map_or(0, Vec::len)).sum();
        let w = map.entry(node_of(location, f)).or_default();
        w.units += units.max(1) as u64;
        w.records += 1;
    }
    Ok(())
}

/// Charges one masking step per token at the sender, then ships the set.
fn replay_protocol(
    sim: &mut Sim<'_>,
    t: &ProtocolTranscript,
    database: &str,
    location: &BTreeMap<(String, PartyId), String>,
) -> Result<(), CloudError> {
    let at = |p: PartyId| location[&(database.to_string(), p)].clone();
    for m in &t.messages {
        let (from, to) = (at(m.from), at(m.to));
        let tokens = m.payload.len() as u64;
        sim.compute(&from, "mask", tokens, &format!("round={}", m.round))?;
        sim.send(&from, &to, tokens * 8, &format!("ring:{}", m.round))?;
    }
    Ok(())
}

fn reduce(
    sim: &mut Sim<'_>,
    topo: &Topology,
    coordinator: &str,
    map: &BTreeMap<String, MapWork>,
    final_units: u64,
) -> Result<(), CloudError> {
    let mut per_master: BTreeMap<String, u64> = BTreeMap::new();
    for node in topo.nodes.iter().filter(|n| map.contains_key(&n.name)) {
        let w = &map[&node.name];
        let master = topo.master_of(&node.cloud).expect("validated").name.clone();
        sim.send(&node.name, &master, w.records * RECORD_BYTES, "partial")?;
        *per_master.entry(master).or_default() += w.records;
    }
    for master in topo.nodes.iter().filter(|n| n.role == Role::Master && per_master.contains_key(&n.name)) {
        let records = per_master[&master.name];
        sim.compute(&master.name, "reduce", records, "")?;
        sim.send(&master.name, coordinator, records * RECORD_BYTES, "reduced")?;
    }
    sim.compute(coordinator, "reduce", final_units, "final")
}
