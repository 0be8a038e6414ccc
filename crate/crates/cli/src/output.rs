//! Deterministic rendering: every float is printed with nine significant
//! digits so identical inputs and flags produce byte-identical output.

use crate::FormatArg;

/// Nine significant digits, scientific notation.
pub fn fmt9(x: f64) -> String {
    // collapse negative zero so output is canonical
    format!("{:.8e}", x + 0.0)
}

pub fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Clone)]
pub enum Value {
    Str(String),
    Int(u64),
    Float(f64),
}

impl Value {
    fn as_json(&self) -> String {
        match self {
            Value::Str(s) => json_string(s),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => fmt9(*f),
        }
    }

    fn as_text(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => fmt9(*f),
        }
    }
}

/// Key-value command summary, renderable as an aligned table, a JSON
/// object, or a one-row CSV.
pub struct Summary {
    fields: Vec<(&'static str, Value)>,
}

impl Summary {
    pub fn new() -> Self {
        Summary { fields: Vec::new() }
    }

    pub fn str(mut self, key: &'static str, value: impl Into<String>) -> Self {
        self.fields.push((key, Value::Str(value.into())));
        self
    }

    pub fn int(mut self, key: &'static str, value: u64) -> Self {
        self.fields.push((key, Value::Int(value)));
        self
    }

    pub fn float(mut self, key: &'static str, value: f64) -> Self {
        self.fields.push((key, Value::Float(value)));
        self
    }

    pub fn render(&self, format: FormatArg) -> String {
        match format {
            FormatArg::Table => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                self.fields
                    .iter()
                    .map(|(k, v)| format!("{k:width$}  {}\n", v.as_text()))
                    .collect()
            }
            FormatArg::Json => {
                let body: Vec<String> = self
                    .fields
                    .iter()
                    .map(|(k, v)| format!("{}:{}", json_string(k), v.as_json()))
                    .collect();
                format!("{{{}}}\n", body.join(","))
            }
            FormatArg::Csv => {
                let header: Vec<&str> = self.fields.iter().map(|(k, _)| *k).collect();
                let row: Vec<String> = self
                    .fields
                    .iter()
                    .map(|(_, v)| csv_field(&v.as_text()))
                    .collect();
                format!("{}\n{}\n", header.join(","), row.join(","))
            }
        }
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
