use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{MonthKey, MonthlySeries};
use crate::error::{Error, Result};

/// Column layout of a long-format monthly CSV: one row per
/// `(key columns..., year, month)` with a single value column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub keys: Vec<String>,
    pub value: String,
}

impl Schema {
    pub fn new(keys: &[&str], value: &str) -> Self {
        Self { keys: keys.iter().map(|s| s.to_string()).collect(), value: value.to_string() }
    }

    /// `destination,year,month,arrivals`
    pub fn arrivals() -> Self {
        Self::new(&["destination"], "arrivals")
    }

    /// `destination,keyword,year,month,volume`
    pub fn keywords() -> Self {
        Self::new(&["destination", "keyword"], "volume")
    }

    /// `destination,year,month,flights`
    pub fn flights() -> Self {
        Self::new(&["destination"], "flights")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Actual,
    Imputed,
}

impl ObservationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationKind::Actual => "actual",
            ObservationKind::Imputed => "imputed",
        }
    }
}

/// Reads a long-format CSV into one series per key tuple. Months between the
/// first and last row of a key become missing values.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<BTreeMap<Vec<String>, MonthlySeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::SchemaError { row: 0, message: e.to_string() })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaError { row: 0, message: format!("missing column `{name}`") })
    };
    let key_cols = schema.keys.iter().map(|k| column(k)).collect::<Result<Vec<_>>>()?;
    let year_col = column("year")?;
    let month_col = column("month")?;
    let value_col = column(&schema.value)?;

    let mut cells: BTreeMap<Vec<String>, BTreeMap<MonthKey, Option<f64>>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::SchemaError { row, message: e.to_string() })?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let schema_err = |message: String| Error::SchemaError { row, message };

        let key: Vec<String> = key_cols.iter().map(|&c| field(c).to_string()).collect();
        if key.iter().any(String::is_empty) {
            return Err(schema_err("empty key column".into()));
        }
        let year: i32 = field(year_col).parse().map_err(|_| schema_err(format!("bad year `{}`", field(year_col))))?;
        let month: u32 = field(month_col).parse().map_err(|_| schema_err(format!("bad month `{}`", field(month_col))))?;
        let month = MonthKey::new(year, month).map_err(|e| schema_err(e.to_string()))?;
        let raw = field(value_col);
        let value = if raw.is_empty() {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| schema_err(format!("bad value `{raw}`")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(schema_err(format!("value must be non-negative, got {raw}")));
            }
            Some(v)
        };
        let slot = cells.entry(key.clone()).or_default();
        if slot.insert(month, value).is_some() {
            return Err(Error::DuplicateObservation { destination: key.join("/"), month: month.to_string() });
        }
    }

    let mut out = BTreeMap::new();
    for (key, months) in cells {
        let start = *months.keys().next().expect("non-empty by construction");
        let end = *months.keys().next_back().expect("non-empty by construction");
        let mut values = vec![None; end.months_since(start) as usize + 1];
        for (m, v) in months {
            values[m.months_since(start) as usize] = v;
        }
        let name = key.last().cloned().unwrap_or_default();
        out.insert(key, MonthlySeries::new(name, start, values)?);
    }
    Ok(out)
}

/// Loads a single-key long-format CSV (arrivals or flights) keyed by destination.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<BTreeMap<String, MonthlySeries>> {
    let file = std::fs::File::open(path.as_ref())?;
    let map = read_csv(file, schema)?;
    Ok(map.into_iter().map(|(mut k, v)| (k.swap_remove(0), v)).collect())
}

/// Writes arrivals in long format with a trailing `kind` column. A month is
/// `imputed` when `original` has it missing and `series` has it filled.
pub fn write_csv<W: Write>(
    writer: W,
    series: &BTreeMap<String, MonthlySeries>,
    original: Option<&BTreeMap<String, MonthlySeries>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["destination", "year", "month", "arrivals", "kind"]).map_err(io)?;
    for (dest, s) in series {
        for (i, v) in s.values().iter().enumerate() {
            let m = s.month_at(i);
            let was_missing = original
                .and_then(|o| o.get(dest))
                .map(|o| o.index_of(m).is_none_or(|j| o.values()[j].is_none()))
                .unwrap_or(false);
            let kind = if was_missing && v.is_some() { ObservationKind::Imputed } else { ObservationKind::Actual };
            let value = v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([dest.as_str(), &m.year().to_string(), &m.month().to_string(), &value, kind.as_str()])
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
