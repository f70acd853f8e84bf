use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Item, Itemset};

use super::QueryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Select,
    Project,
    Join,
    TopK,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Answer from the merged code table.
    #[default]
    Model,
    /// Answer from the fragments themselves.
    Exact,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Model => "model",
            Mode::Exact => "exact",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "model" => Ok(Mode::Model),
            "exact" => Ok(Mode::Exact),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryAst {
    pub operation: Operation,
    /// One database, or two for a join.
    pub databases: Vec<String>,
    /// Conjunction of `HAS` items; empty when there is no `WHERE`.
    pub predicate: Itemset,
    /// Projected items; `None` stands for `*`.
    pub attributes: Option<Itemset>,
    pub k: Option<usize>,
    pub mode: Mode,
}

/// Database names and their item alphabets, for validation.
pub type QuerySchema = BTreeMap<String, BTreeSet<Item>>;

impl QueryAst {
    /// Checks that every database exists and every referenced item belongs
    /// to one of the queried databases.
    pub fn validate(&self, schema: &QuerySchema) -> Result<(), QueryError> {
        let mut alphabet = BTreeSet::new();
        for db in &self.databases {
            let items = schema.get(db).ok_or_else(|| QueryError::UnknownDatabase(db.clone()))?;
            alphabet.extend(items.iter().copied());
        }
        let referenced = self.predicate.iter().chain(self.attributes.iter().flat_map(Itemset::iter));
        for item in referenced {
            if !alphabet.contains(&item) {
                return Err(QueryError::UnknownItem { item, database: self.databases.join(",") });
            }
        }
        Ok(())
    }
}

struct Tokens<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for word in text.split_whitespace() {
            let mut rest = word;
            while let Some(i) = rest.find(',') {
                if i > 0 {
                    toks.push(&rest[..i]);
                }
                toks.push(",");
                rest = &rest[i + 1..];
            }
            if !rest.is_empty() {
                toks.push(rest);
            }
        }
        Tokens { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.eq_ignore_ascii_case(kw))
    }

    fn error(&self, expected: &str) -> QueryError {
        QueryError::Syntax {
            token: self.pos + 1,
            found: self.peek().unwrap_or("end of input").to_string(),
            expected: expected.to_string(),
        }
    }

    fn next(&mut self, expected: &str) -> Result<&'a str, QueryError> {
        let t = self.peek().ok_or_else(|| self.error(expected))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.peek_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(kw))
        }
    }

    fn number<T: std::str::FromStr>(&mut self, expected: &str) -> Result<T, QueryError> {
        match self.peek().map(str::parse) {
            Some(Ok(v)) => {
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn name(&mut self) -> Result<String, QueryError> {
        let t = self.peek().filter(|t| is_name(t)).ok_or_else(|| self.error("database name"))?;
        self.pos += 1;
        Ok(t.to_string())
    }
}

const KEYWORDS: [&str; 11] = ["SELECT", "FROM", "JOIN", "ON", "WHERE", "HAS", "AND", "MODE", "TOPK", "ITEMSETS", "ID"];

fn is_name(t: &str) -> bool {
    !KEYWORDS.iter().any(|k| t.eq_ignore_ascii_case(k))
        && t != ","
        && t.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

/// Parses one query. Keywords are case-insensitive; errors carry the
/// 1-based index of the offending token.
///
/// ```text
/// SELECT <items|*> FROM <db> [JOIN <db2> ON id] [WHERE HAS <i> [AND HAS <i>]*] [MODE model|exact]
/// TOPK <k> ITEMSETS FROM <db>
/// ```
pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let mut t = Tokens::new(text);
    let ast = if t.peek_keyword("TOPK") {
        t.pos += 1;
        let k = t.number("k")?;
        t.keyword("ITEMSETS")?;
        t.keyword("FROM")?;
        let db = t.name()?;
        QueryAst {
            operation: Operation::TopK,
            databases: vec![db],
            predicate: Itemset::empty(),
            attributes: None,
            k: Some(k),
            mode: Mode::Model,
        }
    } else {
        t.keyword("SELECT")?;
        let attributes = if t.peek() == Some("*") {
            t.pos += 1;
            None
        } else {
            let mut items: Vec<Item> = vec![t.number("item list or *")?];
            while t.peek() == Some(",") {
                t.pos += 1;
                items.push(t.number("item")?);
            }
            Some(Itemset::new(items))
        };
        t.keyword("FROM")?;
        let mut databases = vec![t.name()?];
        if t.peek_keyword("JOIN") {
            t.pos += 1;
            databases.push(t.name()?);
            t.keyword("ON")?;
            t.keyword("ID")?;
        }
        let mut predicate = Vec::new();
        if t.peek_keyword("WHERE") {
            t.pos += 1;
            loop {
                t.keyword("HAS")?;
                predicate.push(t.number("item")?);
                if !t.peek_keyword("AND") {
                    break;
                }
                t.pos += 1;
            }
        }
        let mut mode = Mode::Model;
        if t.peek_keyword("MODE") {
            t.pos += 1;
            mode = t.next("model or exact")?.parse().map_err(|_| {
                t.pos -= 1;
                t.error("model or exact")
            })?;
        }
        let operation = match (databases.len(), &attributes) {
            (2, _) => Operation::Join,
            (_, Some(_)) => Operation::Project,
            _ => Operation::Select,
        };
        QueryAst { operation, databases, predicate: Itemset::new(predicate), attributes, k: None, mode }
    };
    if t.peek().is_some() {
        return Err(t.error("end of input"));
    }
    Ok(ast)
}
