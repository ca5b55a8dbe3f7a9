//! Plain-text writers. Floats always carry 17 significant digits.

use std::fmt::Write as _;

/// Formats with 17 significant digits in scientific notation (`-1.2345678901234567e-3`).
/// Non-finite values are written as `inf`, `-inf` or `nan`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// JSON number with 17 significant digits; `null` for non-finite values.
pub fn json_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

/// CSV table with a mandatory header row.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut text = header.join(",");
        text.push('\n');
        Csv {
            text,
            columns: header.len(),
        }
    }

    /// Appends one row of preformatted cells.
    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Minimal JSON object builder that keeps float formatting under our control.
#[derive(Debug, Clone, Default)]
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> JsonObject {
        JsonObject::default()
    }

    pub fn num(mut self, key: &str, v: f64) -> Self {
        self.fields.push((key.to_string(), json_num(v)));
        self
    }

    pub fn int(mut self, key: &str, v: i64) -> Self {
        self.fields.push((key.to_string(), v.to_string()));
        self
    }

    pub fn boolean(mut self, key: &str, v: bool) -> Self {
        self.fields.push((key.to_string(), v.to_string()));
        self
    }

    pub fn string(mut self, key: &str, v: &str) -> Self {
        self.fields.push((key.to_string(), quote(v)));
        self
    }

    /// Inserts an already-serialized JSON value.
    pub fn raw(mut self, key: &str, json: String) -> Self {
        self.fields.push((key.to_string(), json));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}:{}", quote(k), v);
        }
        out.push('}');
        out
    }
}

pub fn json_array(items: impl IntoIterator<Item = String>) -> String {
    let items: Vec<String> = items.into_iter().collect();
    format!("[{}]", items.join(","))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
