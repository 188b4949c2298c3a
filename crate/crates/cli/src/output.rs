use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use cubevar::CertifiedValue;

pub type Map = BTreeMap<String, Value>;

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub command: String,
    pub inputs: Map,
    pub value: f64,
    pub error_bound: Option<f64>,
    pub metadata: Map,
}

impl OutputRecord {
    pub fn new(command: &str, inputs: Map, value: f64, error_bound: Option<f64>) -> Self {
        Self { command: command.into(), inputs, value, error_bound, metadata: Map::new() }
    }

    pub fn certified(command: &str, inputs: Map, c: CertifiedValue) -> Self {
        let mut r = Self::new(command, inputs, c.value, Some(c.error_bound));
        r.meta("cutoff", c.cutoff_used);
        if c.quadrature_estimate > 0.0 {
            r.meta("quadrature_estimate", c.quadrature_estimate);
        }
        r
    }

    pub fn meta(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.metadata.insert(key.into(), v.into());
        self
    }
}

/// Builds an inputs map from `(key, value)` pairs.
#[macro_export]
macro_rules! inputs {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = $crate::output::Map::new();
        $( m.insert($k.to_string(), serde_json::Value::from($v)); )*
        m
    }};
}

/// Writes every float with 17 significant digits.
struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", fmt_f64(value))
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    v.serialize(&mut ser).expect("records serialize");
    String::from_utf8(buf).expect("json is utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn emit(records: &[OutputRecord], format: Format, out: &mut impl Write) -> io::Result<()> {
    match format {
        Format::Json => {
            for r in records {
                writeln!(out, "{}", to_json(r))?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["command", "inputs", "value", "error_bound", "metadata"])?;
            for r in records {
                let bound = r.error_bound.map(fmt_f64).unwrap_or_default();
                w.write_record([
                    r.command.clone(),
                    to_json(&r.inputs),
                    fmt_f64(r.value),
                    bound,
                    to_json(&r.metadata),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
