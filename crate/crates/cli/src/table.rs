//! Tab-separated report tables.
//!
//! Every row starts with the producing module, the operation and an anchor
//! naming the quantity, so rows can be traced back to the formula they
//! evaluate.

use std::fmt::Write as _;

pub use stripes_core::report::fmt_f64 as num;

pub const LEAD: [&str; 3] = ["module", "operation", "anchor"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the `.tsv` output.
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; `values` must match the columns.
    pub fn push(&mut self, module: &str, operation: &str, anchor: &str, values: Vec<String>) {
        assert_eq!(values.len(), self.columns.len(), "table {}: row width", self.name);
        let mut row = vec![module.to_string(), operation.to_string(), anchor.to_string()];
        row.extend(values);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose `flagged` column is `true`.
    pub fn flagged(&self) -> usize {
        let Some(k) = self.columns.iter().position(|c| c == "flagged") else {
            return 0;
        };
        self.rows.iter().filter(|r| r[k + LEAD.len()] == "true").count()
    }

    /// The cell of `column` in row `row` (lead columns included).
    pub fn get(&self, row: usize, column: &str) -> Option<&str> {
        let k = LEAD.iter().map(|s| s.to_string()).chain(self.columns.iter().cloned()).position(|c| c == column)?;
        self.rows.get(row).map(|r| r[k].as_str())
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let header: Vec<&str> = LEAD.iter().copied().chain(self.columns.iter().map(String::as_str)).collect();
        let _ = writeln!(s, "{}", header.join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        s
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}
