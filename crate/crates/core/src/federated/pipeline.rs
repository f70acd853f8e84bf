use super::count::{Federation, ProtocolSettings};
use super::levelwise::{mine_federation, FederatedItemsets, RunTrace};
use super::merge::{pruning_merging, GlobalModel};
use super::FederatedError;
use crate::datamodel::Fragment;

/// Frequent itemsets, the mining trace and the merged model of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct MinedModel {
    pub itemsets: FederatedItemsets,
    pub trace: RunTrace,
    pub model: GlobalModel,
}

/// Levelwise federated mining followed by the subset/superset merge.
///
/// The merge scores code tables against the joined database, which only
/// the trusted cluster reconstructs; parties see nothing but masked tokens.
pub fn mine_model(
    fragments: Vec<Fragment>,
    min_count: usize,
    theta: f64,
    settings: &ProtocolSettings,
) -> Result<MinedModel, FederatedError> {
    let federation = Federation::new(fragments)?;
    mine_federation_model(&federation, min_count, theta, settings)
}

pub fn mine_federation_model(
    federation: &Federation,
    min_count: usize,
    theta: f64,
    settings: &ProtocolSettings,
) -> Result<MinedModel, FederatedError> {
    let (itemsets, trace) = mine_federation(federation, min_count, settings)?;
    let db = federation.joined_database();
    let found: Vec<_> = itemsets.itemsets().cloned().collect();
    let sources = federation.fragments().iter().map(Fragment::id).collect();
    let model = pruning_merging(&found, &db, theta, sources);
    Ok(MinedModel { itemsets, trace, model })
}
