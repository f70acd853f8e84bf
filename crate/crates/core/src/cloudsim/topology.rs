use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CloudError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Master,
    Slave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csp {
    pub name: String,
    /// Simulated microseconds per unit of work on this provider's nodes.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cloud {
    pub name: String,
    pub csp: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub cloud: String,
    pub role: Role,
    pub up: bool,
}

/// Default one-way channel latencies in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyDefaults {
    pub intra_cloud: u64,
    pub intra_csp: u64,
    pub cross_csp: u64,
}

impl Default for LatencyDefaults {
    fn default() -> Self {
        LatencyDefaults { intra_cloud: 1_000, intra_csp: 10_000, cross_csp: 50_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub csps: Vec<Csp>,
    pub clouds: Vec<Cloud>,
    /// Grouped by cloud, in cloud order.
    pub nodes: Vec<Node>,
    pub latency: LatencyDefaults,
    /// Per-channel overrides keyed by `(from, to)` node names.
    pub overrides: BTreeMap<(String, String), u64>,
}

pub const PRESETS: [&str; 4] = ["standalone", "one-cloud", "multi-cloud", "heterogeneous"];

/// A preset name or a custom layout in the sectioned key-value format.
pub fn build_topology(config: &str) -> Result<Topology, CloudError> {
    let trimmed = config.trim();
    if PRESETS.contains(&trimmed) {
        Topology::preset(trimmed)
    } else {
        Topology::parse(config)
    }
}

impl Topology {
    /// The four deployment scenarios.
    ///
    /// * `standalone`: one machine, zero-latency channels.
    /// * `one-cloud`: one provider, one cloud of a master and two slaves.
    /// * `multi-cloud`: one provider, three such clouds.
    /// * `heterogeneous`: three providers with one such cloud each.
    pub fn preset(name: &str) -> Result<Self, CloudError> {
        let layout: Vec<(&str, Vec<&str>)> = match name {
            "standalone" => {
                let mut t = Topology::from_layout(name, &[("local", vec!["local-1"])], 0);
                t.latency = LatencyDefaults { intra_cloud: 0, intra_csp: 0, cross_csp: 0 };
                return Ok(t);
            }
            "one-cloud" => vec![("csp-1", vec!["c1"])],
            "multi-cloud" => vec![("csp-1", vec!["c1", "c2", "c3"])],
            "heterogeneous" => vec![("aws", vec!["aws-1"]), ("azure", vec!["azure-1"]), ("gcp", vec!["gcp-1"])],
            other => return Err(CloudError::UnknownPreset(other.to_string())),
        };
        Ok(Topology::from_layout(name, &layout, 2))
    }

    fn from_layout(name: &str, layout: &[(&str, Vec<&str>)], slaves: usize) -> Self {
        let mut t = Topology {
            name: name.to_string(),
            csps: Vec::new(),
            clouds: Vec::new(),
            nodes: Vec::new(),
            latency: LatencyDefaults::default(),
            overrides: BTreeMap::new(),
        };
        for (csp, clouds) in layout {
            t.csps.push(Csp { name: csp.to_string(), alpha: 1.0 });
            for cloud in clouds {
                t.clouds.push(Cloud { name: cloud.to_string(), csp: csp.to_string() });
                let master = if slaves == 0 { "node-0".to_string() } else { format!("{cloud}-m") };
                t.nodes.push(Node { name: master, cloud: cloud.to_string(), role: Role::Master, up: true });
                for s in 1..=slaves {
                    t.nodes.push(Node {
                        name: format!("{cloud}-s{s}"),
                        cloud: cloud.to_string(),
                        role: Role::Slave,
                        up: true,
                    });
                }
            }
        }
        t
    }

    /// Parses the sectioned format:
    ///
    /// ```text
    /// [topology]
    /// name=lab
    /// [csp.aws]
    /// alpha=1.5
    /// [cloud.aws-1]
    /// csp=aws
    /// [node.aws-1-m]
    /// cloud=aws-1
    /// role=master
    /// [latency]
    /// intra-cloud=1
    /// aws-1-m->aws-1-s1=2.5
    /// ```
    ///
    /// Latencies are in milliseconds. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, CloudError> {
        let mut t = Topology {
            name: "custom".to_string(),
            csps: Vec::new(),
            clouds: Vec::new(),
            nodes: Vec::new(),
            latency: LatencyDefaults::default(),
            overrides: BTreeMap::new(),
        };
        let err = |line: usize, msg: String| CloudError::Config { line, msg };
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if let Some(csp) = section.strip_prefix("csp.") {
                    t.csps.push(Csp { name: csp.to_string(), alpha: 1.0 });
                } else if let Some(cloud) = section.strip_prefix("cloud.") {
                    t.clouds.push(Cloud { name: cloud.to_string(), csp: String::new() });
                } else if let Some(node) = section.strip_prefix("node.") {
                    t.nodes.push(Node { name: node.to_string(), cloud: String::new(), role: Role::Slave, up: true });
                } else if section != "latency" && section != "topology" {
                    return Err(err(line, format!("unknown section [{section}]")));
                }
                continue;
            }
            let (key, value) = l.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got {l:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let ms = || -> Result<u64, CloudError> {
                let v: f64 = value.parse().map_err(|_| err(line, format!("bad latency {value:?}")))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(err(line, format!("bad latency {value:?}")));
                }
                Ok((v * 1000.0).round() as u64)
            };
            match (section.split_once('.').map_or(section.as_str(), |(s, _)| s), key) {
                ("topology", "name") => t.name = value.to_string(),
                ("csp", "alpha") => {
                    let a: f64 = value.parse().map_err(|_| err(line, format!("bad alpha {value:?}")))?;
                    if !(a >= 0.0 && a.is_finite()) {
                        return Err(err(line, format!("bad alpha {value:?}")));
                    }
                    t.csps.last_mut().expect("in a csp section").alpha = a;
                }
                ("cloud", "csp") => t.clouds.last_mut().expect("in a cloud section").csp = value.to_string(),
                ("node", "cloud") => t.nodes.last_mut().expect("in a node section").cloud = value.to_string(),
                ("node", "role") => {
                    t.nodes.last_mut().expect("in a node section").role = match value {
                        "master" => Role::Master,
                        "slave" => Role::Slave,
                        other => return Err(err(line, format!("role must be master or slave, got {other:?}"))),
                    }
                }
                ("latency", "intra-cloud") => t.latency.intra_cloud = ms()?,
                ("latency", "intra-csp") => t.latency.intra_csp = ms()?,
                ("latency", "cross-csp") => t.latency.cross_csp = ms()?,
                ("latency", channel) => {
                    let (a, b) =
                        channel.split_once("->").ok_or_else(|| err(line, format!("expected a->b, got {channel:?}")))?;
                    t.overrides.insert((a.trim().to_string(), b.trim().to_string()), ms()?);
                }
                (s, k) => return Err(err(line, format!("unknown key {k:?} in [{s}]"))),
            }
        }
        // keep nodes grouped by cloud, in cloud order
        let order: BTreeMap<&str, usize> = t.clouds.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
        let mut nodes = t.nodes.clone();
        nodes.sort_by_key(|n| order.get(n.cloud.as_str()).copied().unwrap_or(usize::MAX));
        t.nodes = nodes;
        t.validate()?;
        Ok(t)
    }

    /// Unique names, resolvable references and exactly one master per cloud.
    pub fn validate(&self) -> Result<(), CloudError> {
        let bad = |m: String| Err(CloudError::Invariant(m));
        let mut names = BTreeSet::new();
        for n in self
            .csps
            .iter()
            .map(|c| &c.name)
            .chain(self.clouds.iter().map(|c| &c.name))
            .chain(self.nodes.iter().map(|n| &n.name))
        {
            if !names.insert(n.as_str()) {
                return bad(format!("name {n:?} is used twice"));
            }
        }
        if self.nodes.is_empty() {
            return bad("topology has no nodes".into());
        }
        for c in &self.clouds {
            if !self.csps.iter().any(|p| p.name == c.csp) {
                return bad(format!("cloud {} names unknown provider {:?}", c.name, c.csp));
            }
            let masters = self.nodes.iter().filter(|n| n.cloud == c.name && n.role == Role::Master).count();
            if masters != 1 {
                return bad(format!("cloud {} has {masters} masters", c.name));
            }
        }
        for n in &self.nodes {
            if !self.clouds.iter().any(|c| c.name == n.cloud) {
                return bad(format!("node {} names unknown cloud {:?}", n.name, n.cloud));
            }
        }
        for (a, b) in self.overrides.keys() {
            if self.node(a).is_none() || self.node(b).is_none() {
                return bad(format!("latency override {a}->{b} names an unknown node"));
            }
        }
        Ok(())
    }

    /// Text form accepted by [`Topology::parse`].
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[topology]\nname={}", self.name);
        for c in &self.csps {
            let _ = writeln!(out, "[csp.{}]\nalpha={}", c.name, c.alpha);
        }
        for c in &self.clouds {
            let _ = writeln!(out, "[cloud.{}]\ncsp={}", c.name, c.csp);
        }
        for n in &self.nodes {
            let role = if n.role == Role::Master { "master" } else { "slave" };
            let _ = writeln!(out, "[node.{}]\ncloud={}\nrole={role}", n.name, n.cloud);
        }
        let ms = |us: u64| us as f64 / 1000.0;
        let _ = writeln!(
            out,
            "[latency]\nintra-cloud={}\nintra-csp={}\ncross-csp={}",
            ms(self.latency.intra_cloud),
            ms(self.latency.intra_csp),
            ms(self.latency.cross_csp)
        );
        for ((a, b), us) in &self.overrides {
            let _ = writeln!(out, "{a}->{b}={}", ms(*us));
        }
        out
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub(crate) fn node_mut(&mut self, name: &str) -> Option<&mut Node> {
        self.nodes.iter_mut().find(|n| n.name == name)
    }

    pub fn cloud(&self, name: &str) -> Option<&Cloud> {
        self.clouds.iter().find(|c| c.name == name)
    }

    pub fn csp_of(&self, node: &str) -> Option<&Csp> {
        let cloud = self.cloud(&self.node(node)?.cloud)?;
        self.csps.iter().find(|p| p.name == cloud.csp)
    }

    pub fn master_of(&self, cloud: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.cloud == cloud && n.role == Role::Master)
    }

    /// The master of the first cloud runs the final reduce.
    pub fn coordinator(&self) -> &Node {
        self.master_of(&self.clouds[0].name).expect("validated: one master per cloud")
    }

    /// Live slaves interleaved across clouds: the first slave of every
    /// cloud, then the second of every cloud, and so on.
    pub fn slaves_interleaved(&self) -> Vec<&Node> {
        let per_cloud: Vec<Vec<&Node>> = self
            .clouds
            .iter()
            .map(|c| self.nodes.iter().filter(|n| n.cloud == c.name && n.role == Role::Slave && n.up).collect())
            .collect();
        let depth = per_cloud.iter().map(Vec::len).max().unwrap_or(0);
        (0..depth).flat_map(|i| per_cloud.iter().filter_map(move |s| s.get(i).copied())).collect()
    }

    pub fn is_cross_csp(&self, a: &str, b: &str) -> bool {
        match (self.csp_of(a), self.csp_of(b)) {
            (Some(x), Some(y)) => x.name != y.name,
            _ => false,
        }
    }

    /// One-way latency in microseconds; zero from a node to itself.
    pub fn latency_us(&self, a: &str, b: &str) -> u64 {
        if a == b {
            return 0;
        }
        let key = (a.to_string(), b.to_string());
        if let Some(&us) = self.overrides.get(&key).or_else(|| self.overrides.get(&(key.1.clone(), key.0.clone()))) {
            return us;
        }
        let (na, nb) = (self.node(a), self.node(b));
        match (na, nb) {
            (Some(x), Some(y)) if x.cloud == y.cloud => self.latency.intra_cloud,
            _ if !self.is_cross_csp(a, b) => self.latency.intra_csp,
            _ => self.latency.cross_csp,
        }
    }

    pub fn alpha(&self, node: &str) -> f64 {
        self.csp_of(node).map_or(1.0, |c| c.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let h = Topology::preset("heterogeneous").unwrap();
        assert_eq!((h.csps.len(), h.clouds.len(), h.nodes.len()), (3, 3, 9));
        let s = Topology::preset("standalone").unwrap();
        assert_eq!(s.nodes.len(), 1);
        assert_eq!(s.latency, LatencyDefaults { intra_cloud: 0, intra_csp: 0, cross_csp: 0 });
        let m = Topology::preset("multi-cloud").unwrap();
        assert_eq!((m.csps.len(), m.clouds.len(), m.nodes.len()), (1, 3, 9));
        let o = Topology::preset("one-cloud").unwrap();
        assert_eq!(o.nodes.len(), 3);
        assert!(Topology::preset("mesh").is_err());
    }

    #[test]
    fn interleaved_slaves() {
        let h = Topology::preset("heterogeneous").unwrap();
        let names: Vec<&str> = h.slaves_interleaved().iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, ["aws-1-s1", "azure-1-s1", "gcp-1-s1", "aws-1-s2", "azure-1-s2", "gcp-1-s2"]);
    }

    #[test]
    fn latencies() {
        let h = Topology::preset("heterogeneous").unwrap();
        assert_eq!(h.latency_us("aws-1-m", "aws-1-s1"), 1_000);
        assert_eq!(h.latency_us("aws-1-m", "gcp-1-s1"), 50_000);
        assert_eq!(h.latency_us("aws-1-m", "aws-1-m"), 0);
        let m = Topology::preset("multi-cloud").unwrap();
        assert_eq!(m.latency_us("c1-m", "c2-m"), 10_000);
    }

    #[test]
    fn config_round_trip() {
        for p in PRESETS {
            let t = Topology::preset(p).unwrap();
            assert_eq!(Topology::parse(&t.to_config()).unwrap(), t, "{p}");
        }
    }

    #[test]
    fn custom_layout_with_override() {
        let cfg = "[csp.a]\nalpha=2\n[cloud.x]\ncsp=a\n[node.m]\ncloud=x\nrole=master\n[node.s]\ncloud=x\nrole=slave\n[latency]\nm->s=2.5\n";
        let t = build_topology(cfg).unwrap();
        assert_eq!(t.latency_us("s", "m"), 2_500);
        assert_eq!(t.alpha("s"), 2.0);
    }

    #[test]
    fn two_masters_rejected() {
        let cfg = "[csp.a]\n[cloud.x]\ncsp=a\n[node.m1]\ncloud=x\nrole=master\n[node.m2]\ncloud=x\nrole=master\n";
        assert!(matches!(build_topology(cfg), Err(CloudError::Invariant(_))));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(build_topology("[csp.a]\nalpha"), Err(CloudError::Config { line: 2, .. })));
        assert!(matches!(build_topology("[zone.a]"), Err(CloudError::Config { line: 1, .. })));
        assert!(matches!(
            build_topology("[csp.a]\n[cloud.x]\ncsp=a\n[node.m]\ncloud=x\nrole=boss"),
            Err(CloudError::Config { line: 6, .. })
        ));
    }
}
