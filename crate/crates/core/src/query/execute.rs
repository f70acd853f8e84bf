use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Fragment, Itemset, Tid, TransactionDatabase};
use crate::federated::{count_candidate, Federation, ProtocolSettings};
use crate::krimp::{cover_indices, CodeTable};

use super::estimate::estimate_support;
use super::parse::{Mode, Operation, QueryAst, QuerySchema};
use super::QueryError;

/// One answer row, coded as code-table symbol ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub tid: Tid,
    pub symbols: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QueryResult {
    Rows {
        count: usize,
        approximate: bool,
        rows: Vec<Row>,
    },
    /// `(symbol, support)` pairs, highest support first.
    TopK {
        ranked: Vec<(usize, usize)>,
    },
}

/// A result together with the symbol table that decodes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryOutput {
    pub result: QueryResult,
    /// Symbol id `s` stands for `symbols[s]`.
    pub symbols: Vec<Itemset>,
}

impl QueryOutput {
    /// Rows with every symbol expanded to its itemset.
    pub fn decode_rows(&self) -> Result<Vec<(Tid, Vec<Itemset>)>, QueryError> {
        let QueryResult::Rows { rows, .. } = &self.result else { return Ok(Vec::new()) };
        rows.iter()
            .map(|r| {
                let sets = r.symbols.iter().map(|&s| self.symbol(s).cloned()).collect::<Result<_, _>>()?;
                Ok((r.tid, sets))
            })
            .collect()
    }

    fn symbol(&self, s: usize) -> Result<&Itemset, QueryError> {
        self.symbols.get(s).ok_or(QueryError::UnknownSymbol(s))
    }

    /// Rows as `tid,symbols` CSV, symbols space-separated; top-k answers as
    /// `itemset,support`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.result {
            QueryResult::Rows { rows, .. } => {
                out.push_str("tid,symbols\n");
                for r in rows {
                    let syms: Vec<String> = r.symbols.iter().map(|s| s.to_string()).collect();
                    let _ = writeln!(out, "{},{}", r.tid, syms.join(" "));
                }
            }
            QueryResult::TopK { ranked } => {
                out.push_str("itemset,support\n");
                for &(s, support) in ranked {
                    let set = self.symbols.get(s).map_or_else(|| format!("?{s}"), |x| x.to_string());
                    let _ = writeln!(out, "{set},{support}");
                }
            }
        }
        out
    }

    /// One-line summary: match count or number of ranked itemsets.
    pub fn summary(&self) -> String {
        match &self.result {
            QueryResult::Rows { count, approximate, rows } => {
                format!("count={count} approximate={approximate} rows={}", rows.len())
            }
            QueryResult::TopK { ranked } => format!("itemsets={}", ranked.len()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct DataSource {
    pub federation: Option<Federation>,
    pub model: Option<CodeTable>,
}

/// What the query engine may read: fragments and/or a merged model per
/// database name.
#[derive(Clone, Debug, Default)]
pub struct QueryCatalog {
    sources: BTreeMap<String, DataSource>,
    pub settings: ProtocolSettings,
}

impl QueryCatalog {
    pub fn new(settings: ProtocolSettings) -> Self {
        QueryCatalog { sources: BTreeMap::new(), settings }
    }

    /// Registers the fragments of one database under their database name.
    pub fn add_fragments(&mut self, fragments: Vec<Fragment>) -> Result<(), QueryError> {
        let fed = Federation::new(fragments)?;
        let name = fed.database().to_string();
        self.sources.entry(name).or_default().federation = Some(fed);
        Ok(())
    }

    pub fn add_federation(&mut self, federation: Federation) {
        let name = federation.database().to_string();
        self.sources.entry(name).or_default().federation = Some(federation);
    }

    pub fn add_model(&mut self, database: &str, model: CodeTable) {
        self.sources.entry(database.to_string()).or_default().model = Some(model);
    }

    pub fn source(&self, database: &str) -> Option<&DataSource> {
        self.sources.get(database)
    }

    pub fn schema(&self) -> QuerySchema {
        self.sources
            .iter()
            .map(|(name, s)| {
                let mut items: std::collections::BTreeSet<_> = s.model.iter().flat_map(|m| m.alphabet()).collect();
                items.extend(s.federation.iter().flat_map(|f| f.alphabet()));
                (name.clone(), items)
            })
            .collect()
    }

    fn model(&self, db: &str) -> Result<&CodeTable, QueryError> {
        self.sources
            .get(db)
            .and_then(|s| s.model.as_ref())
            .ok_or_else(|| QueryError::MissingSource { database: db.to_string(), mode: Mode::Model })
    }

    fn federation(&self, db: &str) -> Result<&Federation, QueryError> {
        self.sources
            .get(db)
            .and_then(|s| s.federation.as_ref())
            .ok_or_else(|| QueryError::MissingSource { database: db.to_string(), mode: Mode::Exact })
    }

    /// Symbol table for exact answers: the model if one is registered,
    /// else the singleton table of the joined rows.
    fn exact_table(&self, db: &str, rows: &TransactionDatabase) -> CodeTable {
        match self.sources.get(db).and_then(|s| s.model.as_ref()) {
            Some(m) if rows.alphabet().iter().all(|&i| m.has_item(i)) => m.clone(),
            _ => CodeTable::singletons(rows, db),
        }
    }
}

/// Runs a validated query against the catalog.
pub fn execute_query(ast: &QueryAst, catalog: &QueryCatalog) -> Result<QueryOutput, QueryError> {
    ast.validate(&catalog.schema())?;
    match (ast.operation, ast.mode) {
        (Operation::TopK, _) => topk(ast, catalog),
        (Operation::Join, Mode::Model) => {
            Err(QueryError::ModelInsufficient("a join pairs rows by object id, which the model does not keep".into()))
        }
        (Operation::Join, Mode::Exact) => exact_join(ast, catalog),
        (_, Mode::Model) => model_select(ast, catalog),
        (_, Mode::Exact) => exact_select(ast, catalog),
    }
}

fn symbols_of(ct: &CodeTable) -> Vec<Itemset> {
    ct.entries().iter().map(|e| e.itemset.clone()).collect()
}

fn topk(ast: &QueryAst, catalog: &QueryCatalog) -> Result<QueryOutput, QueryError> {
    let ct = catalog.model(&ast.databases[0])?;
    let mut ranked: Vec<(usize, usize)> = ct.entries().iter().enumerate().map(|(s, e)| (s, e.support)).collect();
    let entries = ct.entries();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| entries[a.0].itemset.cmp(&entries[b.0].itemset)));
    ranked.truncate(ast.k.unwrap_or(0));
    Ok(QueryOutput { result: QueryResult::TopK { ranked }, symbols: symbols_of(ct) })
}

fn model_select(ast: &QueryAst, catalog: &QueryCatalog) -> Result<QueryOutput, QueryError> {
    let db = &ast.databases[0];
    let ct = catalog.model(db)?;
    let wanted = ast.predicate.iter().chain(ast.attributes.iter().flat_map(Itemset::iter));
    if let Some(item) = wanted.into_iter().find(|&i| !ct.has_item(i)) {
        return Err(QueryError::ModelInsufficient(format!("item {item} is not in the model of {db}")));
    }
    let est = estimate_support(&ast.predicate, ct)?;
    Ok(QueryOutput {
        result: QueryResult::Rows { count: est.count, approximate: est.approximate, rows: Vec::new() },
        symbols: symbols_of(ct),
    })
}

fn project(t: &Itemset, attributes: &Option<Itemset>) -> Itemset {
    match attributes {
        Some(a) => t.intersection(a),
        None => t.clone(),
    }
}

fn symbol_row(t: &Itemset, ct: &CodeTable, offset: usize) -> Result<Vec<usize>, QueryError> {
    Ok(cover_indices(t, ct)?.into_iter().map(|s| s + offset).collect())
}

fn exact_select(ast: &QueryAst, catalog: &QueryCatalog) -> Result<QueryOutput, QueryError> {
    let db = &ast.databases[0];
    let fed = catalog.federation(db)?;
    let outcome = count_candidate(&ast.predicate, fed, &catalog.settings)?;
    let joined = fed.joined_database();
    let ct = catalog.exact_table(db, &joined);
    let mut rows = Vec::new();
    for (n, t) in joined.transactions().iter().enumerate() {
        if ast.predicate.is_subset_of(t) {
            let symbols = symbol_row(&project(t, &ast.attributes), &ct, 0)?;
            rows.push(Row { tid: n as Tid + 1, symbols });
        }
    }
    Ok(QueryOutput {
        result: QueryResult::Rows { count: outcome.count.count, approximate: outcome.count.approximate, rows },
        symbols: symbols_of(&ct),
    })
}

/// Equi-join on object id: row `tid` of the left database pairs with row
/// `tid` of the right one; the predicate applies to their union.
fn exact_join(ast: &QueryAst, catalog: &QueryCatalog) -> Result<QueryOutput, QueryError> {
    let (l, r) = (&ast.databases[0], &ast.databases[1]);
    let left = catalog.federation(l)?.joined_database();
    let right = catalog.federation(r)?.joined_database();
    let (lt, rt) = (catalog.exact_table(l, &left), catalog.exact_table(r, &right));
    let offset = lt.len();
    let mut rows = Vec::new();
    for (n, (a, b)) in left.transactions().iter().zip(right.transactions()).enumerate() {
        if !ast.predicate.is_subset_of(&a.union(b)) {
            continue;
        }
        let mut symbols = symbol_row(&project(a, &ast.attributes), &lt, 0)?;
        symbols.extend(symbol_row(&project(b, &ast.attributes), &rt, offset)?);
        rows.push(Row { tid: n as Tid + 1, symbols });
    }
    let mut symbols = symbols_of(&lt);
    symbols.extend(symbols_of(&rt));
    Ok(QueryOutput { result: QueryResult::Rows { count: rows.len(), approximate: false, rows }, symbols })
}
