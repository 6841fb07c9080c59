//! Header-keyed row tables read from CSV or from a JSON array of objects.
//!
//! Both formats are flattened to strings so the same validation code runs
//! over either. Line numbers are 1-based physical lines for CSV (the header
//! is line 1) and 1-based element positions for JSON.

use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TableError {
    Io(String),
    Parse { line: usize, message: String },
    MissingColumn(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub line: usize,
    fields: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Table {
    columns: HashMap<String, usize>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, TableError> {
        let bytes = std::fs::read(path).map_err(|e| TableError::Io(e.to_string()))?;
        let text = String::from_utf8(bytes)
            .map_err(|e| TableError::Parse { line: 0, message: format!("not UTF-8: {e}") })?;
        let is_json = path
            .extension()
            .map(|ext| ext.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            Table::from_json_str(&text)
        } else {
            Table::from_csv_str(&text)
        }
    }

    pub fn from_csv_str(text: &str) -> Result<Table, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(csv_error)?.clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            rows.push(Row { line, fields: record.iter().map(str::to_string).collect() });
        }
        Ok(Table { columns, rows })
    }

    pub fn from_json_str(text: &str) -> Result<Table, TableError> {
        let value: Value = serde_json::from_str(text).map_err(|e| TableError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let Value::Array(items) = value else {
            return Err(TableError::Parse { line: 1, message: "expected a JSON array of objects".into() });
        };
        let mut columns: HashMap<String, usize> = HashMap::new();
        let mut objects = Vec::with_capacity(items.len());
        for (i, item) in items.into_iter().enumerate() {
            let Value::Object(map) = item else {
                return Err(TableError::Parse { line: i + 1, message: "expected an object".into() });
            };
            for key in map.keys() {
                let next = columns.len();
                columns.entry(key.clone()).or_insert(next);
            }
            objects.push(map);
        }
        let width = columns.len();
        let rows = objects
            .into_iter()
            .enumerate()
            .map(|(i, map)| {
                let mut fields = vec![String::new(); width];
                for (key, value) in map {
                    fields[columns[&key]] = flatten(&value);
                }
                Row { line: i + 1, fields }
            })
            .collect();
        Ok(Table { columns, rows })
    }

    /// Checks that every named column is declared. A file with no header at
    /// all is treated as an empty table.
    pub fn require(&self, names: &[&str]) -> Result<(), TableError> {
        if self.columns.is_empty() {
            return Ok(());
        }
        match names.iter().find(|n| !self.columns.contains_key(**n)) {
            Some(missing) => Err(TableError::MissingColumn((*missing).to_string())),
            None => Ok(()),
        }
    }

    /// Trimmed field value; absent columns read as empty.
    pub fn get<'a>(&self, row: &'a Row, name: &str) -> &'a str {
        self.columns
            .get(name)
            .and_then(|&i| row.fields.get(i))
            .map(|s| s.trim())
            .unwrap_or("")
    }
}

fn flatten(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::Array(items) => items.iter().map(flatten).collect::<Vec<_>>().join("|"),
        Value::Object(_) => value.to_string(),
    }
}

fn csv_error(err: csv::Error) -> TableError {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    TableError::Parse { line, message: err.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let csv = Table::from_csv_str("a,b\n1, x \n2,\n").unwrap();
        let json = Table::from_json_str(r#"[{"a":1,"b":"x"},{"a":2,"b":null}]"#).unwrap();
        for t in [&csv, &json] {
            assert_eq!(t.rows.len(), 2);
            assert_eq!(t.get(&t.rows[0], "a"), "1");
            assert_eq!(t.get(&t.rows[0], "b"), "x");
            assert_eq!(t.get(&t.rows[1], "b"), "");
            assert_eq!(t.get(&t.rows[1], "zzz"), "");
        }
        assert_eq!(csv.rows[1].line, 3);
        assert_eq!(json.rows[1].line, 2);
    }

    #[test]
    fn json_arrays_join_with_pipes() {
        let t = Table::from_json_str(r#"[{"tags":["2019-20","2020-21"]}]"#).unwrap();
        assert_eq!(t.get(&t.rows[0], "tags"), "2019-20|2020-21");
    }

    #[test]
    fn missing_column_reported() {
        let t = Table::from_csv_str("a,b\n1,2\n").unwrap();
        assert_eq!(t.require(&["a", "c"]), Err(TableError::MissingColumn("c".into())));
    }

    #[test]
    fn ragged_csv_is_a_parse_error() {
        let err = Table::from_csv_str("a,b\n1,2,3\n").unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 2, .. }));
    }
}
