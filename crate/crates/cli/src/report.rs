use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mms_lab::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(mms_lab::Error::Parse(_)) => "parse",
            Self::Core(mms_lab::Error::Precondition(_)) => "precondition",
            Self::Core(_) => "invalid-input",
            Self::Io { .. } => "io",
            Self::Csv(_) => "io",
            Self::Usage(_) => "usage",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Rows of the tabular section of a report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

/// What a verb produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub paper_anchor: &'static str,
    pub results: Value,
    pub table: Option<Table>,
    pub inconclusive: bool,
}

impl Outcome {
    pub fn new(paper_anchor: &'static str, results: impl Serialize) -> Self {
        Self {
            paper_anchor,
            results: serde_json::to_value(results).expect("results serialize"),
            table: None,
            inconclusive: false,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn inconclusive(mut self, yes: bool) -> Self {
        self.inconclusive = yes;
        self
    }
}

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Rounds every float in `v` to 12 significant digits. Integers are left alone.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn envelope(command: &str, inputs: impl Serialize, outcome: &Outcome) -> Value {
    let mut v = json!({
        "command": command,
        "paper_anchor": outcome.paper_anchor,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": serde_json::to_value(inputs).expect("inputs serialize"),
        "results": outcome.results,
    });
    round_value(&mut v);
    v
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn write_json(v: &Value, path: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    let shown = path.unwrap_or(Path::new("<stdout>"));
    sink(path)?
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io(shown, e))
}

pub fn write_csv(table: &Table, path: Option<&Path>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| {
            let mut c = c.clone();
            round_value(&mut c);
            match c {
                Value::String(s) => s,
                Value::Null => String::new(),
                other => other.to_string(),
            }
        }))?;
    }
    w.flush()
        .map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-123456.78901234567), -123456.789012);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::INFINITY).is_infinite());
    }

    #[test]
    fn integers_are_untouched() {
        let mut v = json!({"n": 12345678901234567u64, "x": [2.0000000000001]});
        round_value(&mut v);
        assert_eq!(v, json!({"n": 12345678901234567u64, "x": [2.0]}));
    }

    #[test]
    fn empty_results_make_a_valid_envelope() {
        let o = Outcome::new("test", json!({}));
        let v = envelope("space validate", json!({}), &o);
        assert_eq!(v["results"], json!({}));
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    }
}
