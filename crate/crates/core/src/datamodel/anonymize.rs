use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Relation table `S(X, A, F)`: the first column holds object identifiers,
/// the remaining columns are attributes, and row `r` is the valuation of
/// every attribute at object `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RelationSchema {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, DataError> {
        if columns.is_empty() {
            return Err(DataError::Table("no columns".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(DataError::Table(format!("duplicate attribute `{dup}`")));
        }
        if let Some(n) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(DataError::Table(format!("row {} is not total over the attributes", n + 1)));
        }
        Ok(RelationSchema { columns, rows })
    }

    /// CSV with a header row; first column is the object id.
    pub fn from_csv(text: &str) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let columns =
            reader.headers().map_err(|e| DataError::Table(e.to_string()))?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| DataError::Table(e.to_string()))?;
        Self::new(columns, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(&self.columns);
        for r in &self.rows {
            let _ = w.write_record(r);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn column(&self, name: &str) -> Result<usize, DataError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| DataError::UnknownAttribute(name.to_string()))
    }

    pub fn object_ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r[0].as_str())
    }
}

/// Generalization hierarchy of one quasi-identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generalization {
    /// Codes such as ZIP: level `n` replaces the last `n` characters by `*`.
    SuffixMask,
    /// Integers: level 1 bins at `width` anchored at multiples of it, and
    /// every further level doubles the width. Rendered `[lo,hi]`.
    Interval { width: u32 },
}

impl Generalization {
    fn generalize(self, value: &str, level: u32) -> Option<String> {
        if level == 0 {
            return Some(value.to_string());
        }
        match self {
            Generalization::SuffixMask => {
                let chars: Vec<char> = value.chars().collect();
                let keep = chars.len().saturating_sub(level as usize);
                Some(chars[..keep].iter().chain(std::iter::repeat_n(&'*', chars.len() - keep)).collect())
            }
            Generalization::Interval { width } => {
                let v: i64 = value.trim().parse().ok()?;
                let w = i64::from(width.max(1)).checked_shl(level - 1)?;
                let lo = v.div_euclid(w) * w;
                Some(format!("[{},{}]", lo, lo + w))
            }
        }
    }

    /// Level at which every value of `values` is generalized to one token.
    fn top_level(self, values: &[&str]) -> u32 {
        match self {
            Generalization::SuffixMask => values.iter().map(|v| v.chars().count()).max().unwrap_or(0) as u32,
            Generalization::Interval { .. } => (0..=62)
                .find(|&l| {
                    let mut it = values.iter().map(|v| self.generalize(v, l));
                    let first = it.next().flatten();
                    it.all(|g| g == first)
                })
                .unwrap_or(62),
        }
    }
}

/// Table whose quasi-identifier equivalence classes all have ≥ k rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizedTable {
    pub table: RelationSchema,
    pub quasi_ids: Vec<String>,
    pub k: usize,
}

impl AnonymizedTable {
    /// Equivalence classes keyed by the generalized quasi-identifier tuple,
    /// valued by the member row indices.
    pub fn classes(&self) -> BTreeMap<Vec<String>, Vec<usize>> {
        let cols: Vec<usize> = self.quasi_ids.iter().filter_map(|q| self.table.column(q).ok()).collect();
        let mut classes: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
        for (n, row) in self.table.rows.iter().enumerate() {
            classes.entry(cols.iter().map(|&c| row[c].clone()).collect()).or_default().push(n);
        }
        classes
    }

    pub fn min_class_size(&self) -> usize {
        self.classes().values().map(Vec::len).min().unwrap_or(0)
    }
}

/// Greedy bottom-up local recoding.
///
/// Rows start ungeneralized. Each round raises the next quasi-identifier
/// (round-robin in the given order) by one level on every row whose class
/// is still below `k`; rows in classes of size ≥ k are frozen. When no
/// unsatisfied row can be raised further, every row is raised instead.
/// Non-quasi-identifier columns are copied unchanged.
pub fn k_anonymize(
    table: &RelationSchema,
    quasi_ids: &[(&str, Generalization)],
    k: usize,
) -> Result<AnonymizedTable, DataError> {
    if k == 0 {
        return Err(DataError::ZeroK);
    }
    if k > table.rows.len() {
        return Err(DataError::KTooLarge { k, rows: table.rows.len() });
    }
    let cols = quasi_ids.iter().map(|(name, _)| table.column(name)).collect::<Result<Vec<_>, _>>()?;
    let hierarchies: Vec<Generalization> = quasi_ids.iter().map(|(_, g)| *g).collect();
    let tops: Vec<u32> = cols
        .iter()
        .zip(&hierarchies)
        .map(|(&c, g)| {
            let values: Vec<&str> = table.rows.iter().map(|r| r[c].as_str()).collect();
            g.top_level(&values) + 1
        })
        .collect();
    // the value past `top` is the fully suppressed `*`
    let render = |q: usize, row: &[String], level: u32| -> Result<String, DataError> {
        if level >= tops[q] {
            return Ok("*".to_string());
        }
        hierarchies[q].generalize(&row[cols[q]], level).ok_or_else(|| DataError::NotGeneralizable {
            attribute: quasi_ids[q].0.to_string(),
            value: row[cols[q]].clone(),
        })
    };

    let n = table.rows.len();
    let mut levels = vec![vec![0u32; cols.len()]; n];
    let mut step = 0usize;
    loop {
        let keys = (0..n)
            .map(|r| (0..cols.len()).map(|q| render(q, &table.rows[r], levels[r][q])).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut sizes: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
        for key in &keys {
            *sizes.entry(key).or_default() += 1;
        }
        let unsatisfied: Vec<usize> = (0..n).filter(|&r| sizes[&keys[r]] < k).collect();
        if unsatisfied.is_empty() {
            let mut rows = table.rows.clone();
            for (r, key) in keys.into_iter().enumerate() {
                for (q, value) in key.into_iter().enumerate() {
                    rows[r][cols[q]] = value;
                }
            }
            return Ok(AnonymizedTable {
                table: RelationSchema { columns: table.columns.clone(), rows },
                quasi_ids: quasi_ids.iter().map(|(q, _)| q.to_string()).collect(),
                k,
            });
        }

        let can_raise = |rows: &[usize], q: usize| rows.iter().any(|&r| levels[r][q] < tops[q]);
        let all: Vec<usize> = (0..n).collect();
        let targets = if (0..cols.len()).any(|q| can_raise(&unsatisfied, q)) { &unsatisfied } else { &all };
        // next attribute in round-robin order that still has room
        let q = (0..cols.len())
            .map(|off| (step + off) % cols.len())
            .find(|&q| can_raise(targets, q))
            .expect("k <= rows guarantees a raisable attribute");
        for &r in targets {
            levels[r][q] = (levels[r][q] + 1).min(tops[q]);
        }
        step = q + 1;
    }
}
