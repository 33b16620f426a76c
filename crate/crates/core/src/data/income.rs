//! Median household income keyed by ZIP code.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INCOME_HEADER: &str = "zip,income";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IncomeTable {
    incomes: BTreeMap<String, f64>,
    global_median: f64,
}

/// How a user's ZIP code was resolved against the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZipMatch {
    Exact,
    Prefix,
    Fallback,
}

impl IncomeTable {
    pub fn new(incomes: BTreeMap<String, f64>) -> Result<Self> {
        if incomes.is_empty() {
            return Err(Error::Invalid("income table is empty".into()));
        }
        if let Some((zip, v)) = incomes.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Invalid(format!(
                "income for {zip} must be positive, got {v}"
            )));
        }
        let mut values: Vec<f64> = incomes.values().copied().collect();
        values.sort_by(f64::total_cmp);
        let global_median = crate::stats::median_sorted(&values);
        Ok(Self {
            incomes,
            global_median,
        })
    }

    /// Parses a `zip,income` CSV with that exact header.
    pub fn parse_csv(file: &str, bytes: &[u8]) -> Result<Self> {
        let text = String::from_utf8_lossy(bytes);
        let mut rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        match rows.next() {
            Some((_, h)) if h.trim().eq_ignore_ascii_case(INCOME_HEADER) => {}
            _ => {
                return Err(Error::parse(
                    file,
                    1,
                    format!("expected header {INCOME_HEADER:?}"),
                ));
            }
        }
        let mut incomes = BTreeMap::new();
        for (line, row) in rows {
            if row.trim().is_empty() {
                continue;
            }
            let (zip, value) = row
                .split_once(',')
                .ok_or_else(|| Error::parse(file, line, "expected two comma-separated fields"))?;
            let zip = zip.trim();
            if zip.is_empty() {
                return Err(Error::parse(file, line, "empty zip"));
            }
            let v: f64 = value.trim().parse().map_err(|_| {
                Error::parse(file, line, format!("income {value:?} is not a number"))
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::parse(
                    file,
                    line,
                    format!("income must be positive, got {v}"),
                ));
            }
            if incomes.insert(zip.to_string(), v).is_some() {
                return Err(Error::parse(file, line, format!("duplicate zip {zip}")));
            }
        }
        Self::new(incomes).map_err(|e| Error::parse(file, 1, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(
                    e.kind(),
                    format!("{e} (expected a CSV with header {INCOME_HEADER:?})"),
                ),
            )
        })?;
        Self::parse_csv(&path.display().to_string(), &bytes)
    }

    pub fn global_median(&self) -> f64 {
        self.global_median
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    /// Exact key, then the 5-digit prefix, then the global median.
    pub fn lookup(&self, zip: &str) -> (f64, ZipMatch) {
        let zip = zip.trim();
        if let Some(v) = self.incomes.get(zip) {
            return (*v, ZipMatch::Exact);
        }
        if zip.len() > 5 && zip.as_bytes()[..5].iter().all(u8::is_ascii_digit) {
            if let Some(v) = self.incomes.get(&zip[..5]) {
                return (*v, ZipMatch::Prefix);
            }
        }
        (self.global_median, ZipMatch::Fallback)
    }
}
