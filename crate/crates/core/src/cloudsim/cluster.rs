use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{verify_digest, Fragment};

use super::topology::{Node, Role, Topology};
use super::CloudError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub fragment: String,
    pub node: String,
    pub digest: String,
    pub database: String,
    pub table: String,
    pub storage_id: String,
    pub key_id: String,
    pub structure: String,
}

/// Where every placed fragment lives, keyed by fragment id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataCatalog {
    pub entries: BTreeMap<String, CatalogEntry>,
}

impl MetadataCatalog {
    pub fn get(&self, fragment: &str) -> Option<&CatalogEntry> {
        self.entries.get(fragment)
    }

    /// Entries of one database, in fragment id order.
    pub fn of_database<'a>(&'a self, database: &'a str) -> impl Iterator<Item = &'a CatalogEntry> + 'a {
        self.entries.values().filter(move |e| e.database == database)
    }

    pub fn databases(&self) -> Vec<String> {
        let mut dbs: Vec<String> = self.entries.values().map(|e| e.database.clone()).collect();
        dbs.sort();
        dbs.dedup();
        dbs
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementPolicy {
    #[default]
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Rebalance {
    Add { cloud: String, node: String },
    Remove { node: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub fragment: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLoad {
    pub node: String,
    pub cloud: String,
    pub csp: String,
    pub role: Role,
    pub up: bool,
    pub fragments: usize,
    pub occurrences: usize,
}

/// A topology plus the fragments stored on its nodes.
#[derive(Clone, Debug)]
pub struct Cluster {
    topology: Topology,
    catalog: MetadataCatalog,
    storage: BTreeMap<String, BTreeMap<String, Fragment>>,
    cursor: usize,
}

impl Cluster {
    pub fn new(topology: Topology) -> Result<Self, CloudError> {
        topology.validate()?;
        Ok(Cluster { topology, catalog: MetadataCatalog::default(), storage: BTreeMap::new(), cursor: 0 })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn catalog(&self) -> &MetadataCatalog {
        &self.catalog
    }

    /// Nodes that take fragments: the live slaves, or the masters when the
    /// topology has no slave at all (a single machine).
    fn storage_nodes(&self) -> Vec<&Node> {
        let slaves = self.topology.slaves_interleaved();
        if !slaves.is_empty() || self.topology.nodes.iter().any(|n| n.role == Role::Slave) {
            return slaves;
        }
        self.topology.nodes.iter().filter(|n| n.up).collect()
    }

    /// Places fragments round-robin over the storage nodes, continuing from
    /// where the previous placement stopped. All fragments are checked
    /// before any is stored.
    pub fn place_fragments(
        &mut self,
        fragments: Vec<Fragment>,
        policy: PlacementPolicy,
    ) -> Result<Vec<String>, CloudError> {
        let PlacementPolicy::RoundRobin = policy;
        for f in &fragments {
            if !verify_digest(f) {
                return Err(CloudError::Integrity { fragment: f.id() });
            }
        }
        let mut ids: Vec<String> = fragments.iter().map(Fragment::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CloudError::DuplicateFragment(w[0].clone()));
        }
        if let Some(id) = ids.iter().find(|id| self.catalog.entries.contains_key(*id)) {
            return Err(CloudError::DuplicateFragment(id.clone()));
        }
        let targets: Vec<String> = self.storage_nodes().iter().map(|n| n.name.clone()).collect();
        if targets.is_empty() {
            return Err(CloudError::NoStorage);
        }
        let mut placed = Vec::new();
        for f in fragments {
            let node = targets[self.cursor % targets.len()].clone();
            self.cursor += 1;
            self.store(node.clone(), f);
            placed.push(node);
        }
        Ok(placed)
    }

    fn store(&mut self, node: String, f: Fragment) {
        let id = f.id();
        let entry = CatalogEntry {
            fragment: id.clone(),
            node: node.clone(),
            digest: f.digest.clone(),
            database: f.meta.database.clone(),
            table: format!("{}.p{}", f.meta.database, f.meta.party.0),
            storage_id: format!("{node}/{id}"),
            key_id: format!("key-{}-{}", f.meta.database, f.meta.party.0),
            structure: "tidset".to_string(),
        };
        self.catalog.entries.insert(id.clone(), entry);
        self.storage.entry(node).or_default().insert(id, f);
    }

    /// A stored fragment, re-verified against its catalog digest.
    pub fn fragment(&self, id: &str) -> Result<&Fragment, CloudError> {
        let entry = self.catalog.get(id).ok_or_else(|| CloudError::UnknownFragment(id.to_string()))?;
        let f = self
            .storage
            .get(&entry.node)
            .and_then(|s| s.get(id))
            .ok_or_else(|| CloudError::UnknownFragment(id.to_string()))?;
        if f.digest != entry.digest || !verify_digest(f) {
            return Err(CloudError::Integrity { fragment: id.to_string() });
        }
        Ok(f)
    }

    /// Mutable access to stored data, for fault injection in tests.
    pub fn fragment_mut_unchecked(&mut self, id: &str) -> Option<&mut Fragment> {
        let node = &self.catalog.get(id)?.node;
        self.storage.get_mut(node)?.get_mut(id)
    }

    pub fn set_node_up(&mut self, node: &str, up: bool) -> Result<(), CloudError> {
        self.topology.node_mut(node).ok_or_else(|| CloudError::UnknownNode(node.to_string()))?.up = up;
        Ok(())
    }

    /// Adds a slave, or removes a node after migrating its fragments
    /// round-robin to the surviving slaves of its cloud (any cloud if it
    /// was the last one there).
    pub fn rebalance(&mut self, op: &Rebalance) -> Result<Vec<Migration>, CloudError> {
        match op {
            Rebalance::Add { cloud, node } => {
                if self.topology.cloud(cloud).is_none() {
                    return Err(CloudError::UnknownCloud(cloud.clone()));
                }
                let mut t = self.topology.clone();
                let at = t.nodes.iter().rposition(|n| &n.cloud == cloud).map_or(t.nodes.len(), |i| i + 1);
                t.nodes.insert(at, Node { name: node.clone(), cloud: cloud.clone(), role: Role::Slave, up: true });
                t.validate()?;
                self.topology = t;
                Ok(Vec::new())
            }
            Rebalance::Remove { node } => {
                let gone = self.topology.node(node).ok_or_else(|| CloudError::UnknownNode(node.clone()))?.clone();
                if gone.role == Role::Master {
                    return Err(CloudError::CannotRemoveMaster(node.clone()));
                }
                let survivors: Vec<&Node> =
                    self.topology.slaves_interleaved().into_iter().filter(|n| &n.name != node).collect();
                let same_cloud: Vec<String> =
                    survivors.iter().filter(|n| n.cloud == gone.cloud).map(|n| n.name.clone()).collect();
                let targets =
                    if same_cloud.is_empty() { survivors.iter().map(|n| n.name.clone()).collect() } else { same_cloud };
                let held = self.storage.get(node).cloned().unwrap_or_default();
                if !held.is_empty() && targets.is_empty() {
                    return Err(CloudError::Orphaned { node: node.clone(), fragments: held.keys().cloned().collect() });
                }
                for (id, f) in &held {
                    if !verify_digest(f) || self.catalog.get(id).is_none_or(|e| e.digest != f.digest) {
                        return Err(CloudError::Integrity { fragment: id.clone() });
                    }
                }
                let mut moves = Vec::new();
                for (n, (id, f)) in held.into_iter().enumerate() {
                    let to = targets[n % targets.len()].clone();
                    moves.push(Migration { fragment: id, from: node.clone(), to: to.clone() });
                    self.store(to, f);
                }
                self.storage.remove(node);
                self.topology.nodes.retain(|n| &n.name != node);
                Ok(moves)
            }
        }
    }

    /// Fragment counts and stored occurrences per node, in topology order.
    pub fn load(&self) -> Vec<NodeLoad> {
        self.topology
            .nodes
            .iter()
            .map(|n| {
                let held = self.storage.get(&n.name);
                NodeLoad {
                    node: n.name.clone(),
                    cloud: n.cloud.clone(),
                    csp: self.topology.csp_of(&n.name).map(|c| c.name.clone()).unwrap_or_default(),
                    role: n.role,
                    up: n.up,
                    fragments: held.map_or(0, BTreeMap::len),
                    occurrences: held.map_or(0, |h| h.values().map(Fragment::occurrences).sum()),
                }
            })
            .collect()
    }
}
