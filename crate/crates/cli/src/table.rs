//! Table rendering: CSV with round-trip float encoding, or JSON.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Text(v) => escape_csv(v),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Text(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }
}

/// 17 significant digits: enough for a decimal -> f64 round trip to
/// reproduce the original bits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One emitted table: named columns, data rows, and key/value metadata that
/// lands in CSV comment footers or a JSON `meta` object.
#[derive(Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Vec<(String, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_meta(&mut self, key: &str, value: Cell) {
        self.meta.push((key.to_string(), value));
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        for (key, value) in &self.meta {
            out.push_str(&format!("# {key}={}\n", value.csv()));
        }
        out
    }

    pub fn render_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut object = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    object.insert((*name).to_string(), cell.json());
                }
                Value::Object(object)
            })
            .collect();
        let mut meta = Map::new();
        for (key, value) in &self.meta {
            meta.insert(key.clone(), value.json());
        }
        let document = json!({ "rows": rows, "meta": meta });
        serde_json::to_string_pretty(&document).expect("tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.58, 1.0 / 3.0, 1e-17, 719.0 / 1400.0, f64::MIN_POSITIVE] {
            let text = fmt_float(x);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn csv_escapes_commas_and_quotes() {
        let mut table = Table::new(&["name", "value"]);
        table.push_row(vec![Cell::Text("a, \"b\"".into()), Cell::Int(1)]);
        let csv = table.render_csv();
        assert!(csv.contains("\"a, \"\"b\"\"\",1"));
    }

    #[test]
    fn json_has_rows_and_meta() {
        let mut table = Table::new(&["x"]);
        table.push_row(vec![Cell::Float(0.5)]);
        table.push_meta("note", Cell::Text("hi".into()));
        let parsed: serde_json::Value = serde_json::from_str(&table.render_json()).unwrap();
        assert_eq!(parsed["rows"][0]["x"], 0.5);
        assert_eq!(parsed["meta"]["note"], "hi");
    }
}
