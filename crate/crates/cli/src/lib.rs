//! Command-line front end: ingest, anonymize, partition, mine, query,
//! benchmark and serve.

pub mod commands;
pub mod rundir;
pub mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedmdl_core::cloudsim::CloudError;
use fedmdl_core::datamodel::DataError;
use fedmdl_core::federated::FederatedError;
use fedmdl_core::query::{Mode, QueryError};

#[derive(Debug, Parser)]
#[command(name = "fedmdl", version, about = "Federated MDL pattern mining over simulated clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Standalone,
    OneCloud,
    MultiCloud,
    Heterogeneous,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::Standalone, Scenario::OneCloud, Scenario::MultiCloud, Scenario::Heterogeneous];

    pub fn preset(self) -> &'static str {
        match self {
            Scenario::Standalone => "standalone",
            Scenario::OneCloud => "one-cloud",
            Scenario::MultiCloud => "multi-cloud",
            Scenario::Heterogeneous => "heterogeneous",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Model,
    Exact,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Model => Mode::Model,
            ModeArg::Exact => Mode::Exact,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a transaction file and report its size.
    Ingest {
        path: PathBuf,
        /// Also store the normalized database here.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// k-anonymize a CSV table.
    Anonymize {
        path: PathBuf,
        #[arg(short, long)]
        k: usize,
        /// `COLUMN=suffix` or `COLUMN=interval:WIDTH`; repeatable, order
        /// sets the round-robin order.
        #[arg(long = "quasi", required = true)]
        quasi: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a database by items into per-party fragment files.
    Partition {
        path: PathBuf,
        #[arg(long, default_value_t = 3)]
        parties: usize,
        #[arg(long, default_value = "d")]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run federated mining on a simulated deployment.
    Mine(MineArgs),
    /// Run a query against a mined run directory.
    Query(QueryArgs),
    /// Decrypt a base64 answer printed by `query --raw`.
    Decrypt {
        answer: String,
        #[arg(long)]
        key: PathBuf,
    },
    /// Mine on all four deployment presets and compare.
    Bench(BenchArgs),
    /// Serve queries and cluster status over HTTP.
    Serve {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a fresh 256-bit user key as hex.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "fragments"])))]
pub struct MineArgs {
    /// Transaction file, partitioned on the fly.
    pub input: Option<PathBuf>,
    /// Directory of fragment files to use instead of a database.
    #[arg(long)]
    pub fragments: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standalone")]
    pub scenario: Scenario,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_count: u64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub parties: usize,
    #[arg(long, default_value = "d")]
    pub name: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// User key to register; answers are encrypted for it.
    #[arg(long)]
    pub key: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    pub text: String,
    #[arg(long)]
    pub run: PathBuf,
    /// Key used to decrypt the answer.
    #[arg(long, required_unless_present = "raw")]
    pub key: Option<PathBuf>,
    /// Overrides a MODE clause.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Print the encrypted answer instead of decrypting it.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 2)]
    pub min_count: u64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value_t = 3)]
    pub parties: usize,
    /// Row-count tiers; each runs on the first N transactions.
    #[arg(long, value_delimiter = ',')]
    pub tiers: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Process exit status for an error.
///
/// 3 parse or syntax, 4 authentication or key, 5 integrity, 6 protocol
/// rejection, 7 model insufficient, 1 anything else. Usage errors exit 2
/// through clap.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|cause| {
            if let Some(e) = cause.downcast_ref::<QueryError>() {
                query_code(e)
            } else if let Some(e) = cause.downcast_ref::<CloudError>() {
                cloud_code(e)
            } else if let Some(e) = cause.downcast_ref::<FederatedError>() {
                federated_code(e)
            } else if let Some(e) = cause.downcast_ref::<DataError>() {
                data_code(e)
            } else {
                None
            }
        })
        .unwrap_or(1)
}

fn query_code(e: &QueryError) -> Option<i32> {
    match e {
        QueryError::Syntax { .. } | QueryError::UnknownDatabase(_) | QueryError::UnknownItem { .. } => Some(3),
        QueryError::Authentication | QueryError::MalformedAnswer(_) | QueryError::BadKey(_) => Some(4),
        QueryError::ModelInsufficient(_) => Some(7),
        QueryError::Federated(f) => federated_code(f),
        _ => None,
    }
}

fn cloud_code(e: &CloudError) -> Option<i32> {
    match e {
        CloudError::Integrity { .. } => Some(5),
        CloudError::Config { .. } => Some(3),
        CloudError::Query(q) => query_code(q),
        CloudError::Federated(f) => federated_code(f),
        CloudError::Data(d) => data_code(d),
        _ => None,
    }
}

fn federated_code(e: &FederatedError) -> Option<i32> {
    match e {
        FederatedError::Integrity { .. } => Some(5),
        FederatedError::Rejected { .. } | FederatedError::Protocol(_) => Some(6),
        FederatedError::Data(d) => data_code(d),
        _ => None,
    }
}

fn data_code(e: &DataError) -> Option<i32> {
    match e {
        DataError::DigestMismatch { .. } => Some(5),
        DataError::Parse { .. } | DataError::DuplicateItem { .. } | DataError::FragmentFormat { .. } => Some(3),
        _ => None,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<String> {
    match cli.command {
        Command::Ingest { path, store } => commands::cmd_ingest(&path, store.as_deref()),
        Command::Anonymize { path, k, quasi, output } => commands::cmd_anonymize(&path, k, &quasi, output.as_deref()),
        Command::Partition { path, parties, name, out } => commands::cmd_partition(&path, parties, &name, &out),
        Command::Mine(args) => commands::cmd_mine(&args).map(|r| r.report),
        Command::Query(args) => commands::cmd_query(&args),
        Command::Decrypt { answer, key } => commands::cmd_decrypt(&answer, &key),
        Command::Bench(args) => commands::cmd_bench(&args).map(|b| b.report),
        Command::Keygen { out, seed } => commands::cmd_keygen(&out, seed),
        Command::Serve { run, addr, scenario, seed } => {
            let state = serve::ServerState::load(&run, scenario, seed)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve::serve(state, &addr))?;
            Ok(String::new())
        }
    }
}
