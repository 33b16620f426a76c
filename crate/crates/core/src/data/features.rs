//! Dense per-instance feature encoding.
//!
//! Base columns: age, income, release year (z-scored), a release-year-missing
//! flag, gender and occupation one-hot groups, genre flags. The extended table
//! appends six user and six item rating statistics, also z-scored. All scaling
//! parameters come from the training rows only.

use serde::{Deserialize, Serialize};

use super::efstats::{EfStats, RatingStats};
use super::income::{IncomeTable, ZipMatch};
use super::movielens::{Gender, RawDataset};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Ordered column names of the base and extended feature tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub base: Vec<String>,
    pub extended: Vec<String>,
}

impl FeatureSchema {
    pub fn for_dataset(raw: &RawDataset) -> Self {
        let mut base: Vec<String> = [
            "age",
            "income",
            "release_year",
            "release_year_missing",
            "gender_M",
            "gender_F",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        base.extend(raw.occupations.iter().map(|o| format!("occupation_{o}")));
        base.extend(raw.genres.iter().map(|g| format!("genre_{g}")));
        let mut extended = base.clone();
        for who in ["user", "item"] {
            extended.extend(RatingStats::NAMES.iter().map(|s| format!("{who}_{s}")));
        }
        Self {
            version: SCHEMA_VERSION,
            base,
            extended,
        }
    }

    /// One column name per line, preceded by a version line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# feature schema v{} ({} base, {} extended)\n",
            self.version,
            self.base.len(),
            self.extended.len()
        );
        for (k, c) in self.extended.iter().enumerate() {
            let tag = if k < self.base.len() {
                "base"
            } else {
                "extended"
            };
            s.push_str(&format!("{k}\t{c}\t{tag}\n"));
        }
        s
    }
}

/// z-score parameters of one continuous column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub column: usize,
    pub mean: f64,
    pub std: f64,
}

impl ColumnScaler {
    fn fit(column: usize, values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        // constant columns are centred but not scaled
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { column, mean, std }
    }
}

/// Counts of fallbacks applied while encoding.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingReport {
    pub users_zip_unmatched: usize,
    pub users_zip_prefix: usize,
    pub rows_zip_unmatched: usize,
    pub items_year_missing: usize,
    pub rows_year_missing: usize,
    pub imputed_year: f64,
}

/// Row-major `n × d` feature matrix aligned with the dataset's rating order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub user_ids: Vec<u32>,
    pub item_ids: Vec<u32>,
    pub scalers: Vec<ColumnScaler>,
    pub report: EncodingReport,
    data: Vec<f64>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.user_ids.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let d = self.width();
        &self.data[r * d..(r + 1) * d]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        let d = self.width();
        self.data.iter().skip(c).step_by(d).copied()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copies the given rows into a new row-major buffer.
    pub fn gather(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * self.width());
        for &r in rows {
            out.extend_from_slice(self.row(r));
        }
        out
    }

    fn standardize(&mut self, columns: &[usize], train_rows: &[usize]) {
        let d = self.width();
        for &c in columns {
            let s = ColumnScaler::fit(c, train_rows.iter().map(|&r| self.data[r * d + c]));
            for r in 0..self.n_rows() {
                let x = &mut self.data[r * d + c];
                *x = (*x - s.mean) / s.std;
            }
            self.scalers.push(s);
        }
    }
}

/// Encodes every rating instance; scaling and imputation use `train_rows` only.
pub fn build_base_features(
    raw: &RawDataset,
    income: &IncomeTable,
    train_rows: &[usize],
) -> Result<FeatureTable> {
    if train_rows.is_empty() {
        return Err(Error::Invalid(
            "no training rows for feature scaling".into(),
        ));
    }
    let schema = FeatureSchema::for_dataset(raw);
    let d = schema.base.len();
    let n_occ = raw.occupations.len();

    let mut report = EncodingReport::default();
    let mut user_income = std::collections::BTreeMap::new();
    for (id, u) in &raw.users {
        let (v, how) = income.lookup(&u.zip);
        match how {
            ZipMatch::Fallback => report.users_zip_unmatched += 1,
            ZipMatch::Prefix => report.users_zip_prefix += 1,
            ZipMatch::Exact => {}
        }
        user_income.insert(*id, (v, how));
    }
    report.items_year_missing = raw
        .items
        .values()
        .filter(|i| i.release_year.is_none())
        .count();

    let mut known_years: Vec<f64> = train_rows
        .iter()
        .filter_map(|&r| raw.items[&raw.ratings[r].item_id].release_year)
        .map(f64::from)
        .collect();
    if known_years.is_empty() {
        known_years = raw
            .items
            .values()
            .filter_map(|i| i.release_year)
            .map(f64::from)
            .collect();
    }
    known_years.sort_by(f64::total_cmp);
    let imputed_year = if known_years.is_empty() {
        0.0
    } else {
        crate::stats::median_sorted(&known_years)
    };
    report.imputed_year = imputed_year;

    let n = raw.ratings.len();
    let mut data = Vec::with_capacity(n * d);
    let (mut user_ids, mut item_ids) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for rec in &raw.ratings {
        let user = &raw.users[&rec.user_id];
        let item = &raw.items[&rec.item_id];
        let (inc, how) = user_income[&rec.user_id];
        if how == ZipMatch::Fallback {
            report.rows_zip_unmatched += 1;
        }
        if item.release_year.is_none() {
            report.rows_year_missing += 1;
        }
        data.push(user.age as f64);
        data.push(inc);
        data.push(item.release_year.map_or(imputed_year, f64::from));
        data.push(if item.release_year.is_none() {
            1.0
        } else {
            0.0
        });
        data.push(if user.gender == Gender::M { 1.0 } else { 0.0 });
        data.push(if user.gender == Gender::F { 1.0 } else { 0.0 });
        let occ = raw
            .occupations
            .iter()
            .position(|o| *o == user.occupation)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "occupation {:?} outside the vocabulary",
                    user.occupation
                ))
            })?;
        data.extend((0..n_occ).map(|k| if k == occ { 1.0 } else { 0.0 }));
        data.extend(item.genres.iter().map(|&g| if g { 1.0 } else { 0.0 }));
        user_ids.push(rec.user_id);
        item_ids.push(rec.item_id);
    }
    if report.users_zip_unmatched > 0 || report.items_year_missing > 0 {
        log::debug!(
            "encoding fallbacks: {} users with unmatched zip ({} rows), {} items without release year ({} rows, imputed {})",
            report.users_zip_unmatched,
            report.rows_zip_unmatched,
            report.items_year_missing,
            report.rows_year_missing,
            imputed_year
        );
    }

    let mut table = FeatureTable {
        columns: schema.base,
        user_ids,
        item_ids,
        scalers: Vec::new(),
        report,
        data,
    };
    table.standardize(&[0, 1, 2], train_rows);
    Ok(table)
}

/// Appends the 12 user/item statistic columns, z-scored on `train_rows`.
pub fn extend_features(
    base: &FeatureTable,
    ef: &EfStats,
    train_rows: &[usize],
    schema: &FeatureSchema,
) -> Result<FeatureTable> {
    if base.columns != schema.base {
        return Err(Error::Schema {
            expected: schema.base.clone(),
            found: base.width(),
        });
    }
    let d0 = base.width();
    let d = d0 + 2 * RatingStats::NAMES.len();
    if d != schema.extended.len() {
        return Err(Error::Schema {
            expected: schema.extended.clone(),
            found: d,
        });
    }
    let mut data = Vec::with_capacity(base.n_rows() * d);
    for r in 0..base.n_rows() {
        data.extend_from_slice(base.row(r));
        data.extend(ef.for_user(base.user_ids[r]).as_array());
        data.extend(ef.for_item(base.item_ids[r]).as_array());
    }
    let mut table = FeatureTable {
        columns: schema.extended.clone(),
        user_ids: base.user_ids.clone(),
        item_ids: base.item_ids.clone(),
        scalers: base.scalers.clone(),
        report: base.report.clone(),
        data,
    };
    let cols: Vec<usize> = (d0..d).collect();
    table.standardize(&cols, train_rows);
    Ok(table)
}
