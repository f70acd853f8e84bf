use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fedmdl_core::cloudsim::{build_topology, Topology};
use fedmdl_core::datamodel::Fragment;
use fedmdl_core::federated::GlobalModel;
use fedmdl_core::query::UserKey;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Parameters of one mining run, stored as `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub scenario: String,
    pub min_count: usize,
    pub theta: f64,
    pub tau: f64,
    pub seed: u64,
    pub parties: usize,
    /// SHA-256 of the input database or fragment files.
    pub input_digest: String,
}

impl RunConfig {
    /// `<seed>-<first 12 hex digits of the config digest>`.
    pub fn run_id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("plain struct");
        let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
        format!("{}-{}", self.seed, &digest[..12])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fragment_file_name(f: &Fragment) -> String {
    format!("{}-p{}.frag", f.meta.database, f.meta.party.0)
}

pub fn write_fragments(dir: &Path, fragments: &[Fragment]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for f in fragments {
        let p = dir.join(fragment_file_name(f));
        fs::write(&p, f.to_text()).with_context(|| format!("writing {}", p.display()))?;
        paths.push(p);
    }
    Ok(paths)
}

/// Every `*.frag` file of `dir`, by file name. Digests are kept as stored
/// and checked when the fragments are placed.
pub fn read_fragments(dir: &Path) -> Result<Vec<Fragment>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "frag"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no fragment files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Fragment::parse(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

pub fn read_key(path: &Path) -> Result<UserKey> {
    let text = fs::read_to_string(path).with_context(|| format!("reading key {}", path.display()))?;
    Ok(UserKey::from_hex(&text)?)
}

/// Everything a mined run directory holds.
#[derive(Debug)]
pub struct LoadedRun {
    pub config: RunConfig,
    pub fragments: Vec<Fragment>,
    pub model: GlobalModel,
    pub topology: Topology,
    /// Key the answers are encrypted for.
    pub key: Option<UserKey>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let read =
        |name: &str| fs::read_to_string(dir.join(name)).with_context(|| format!("reading {}/{name}", dir.display()));
    let config: RunConfig = serde_json::from_str(&read("run.json")?).context("parsing run.json")?;
    let model: GlobalModel = serde_json::from_str(&read("model.json")?).context("parsing model.json")?;
    let topology = build_topology(&read("topology.cfg")?)?;
    let fragments = read_fragments(&dir.join("fragments"))?;
    let key_path = dir.join("user.key");
    let key = if key_path.exists() { Some(read_key(&key_path)?) } else { None };
    Ok(LoadedRun { config, fragments, model, topology, key })
}
