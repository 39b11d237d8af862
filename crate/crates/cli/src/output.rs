//! Artifact writing.
//!
//! Every number written to a CSV or JSON artifact is rounded to 12
//! significant digits so that reruns produce byte-identical files. The
//! manifest is the one artifact that records wall time and is therefore not
//! reproducible byte for byte.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Fixed scientific notation with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("artifact serializes to JSON");
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("JSON value prints");
    text.push('\n');
    text
}

/// A CSV table built in memory; floats use [`fmt_num`].
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: impl IntoIterator<Item = S>) -> Self {
        let mut csv = Self { text: String::new() };
        csv.push_fields(header.into_iter().map(|s| s.as_ref().to_string()));
        csv
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = Field>) {
        self.push_fields(fields.into_iter().map(|f| f.render()));
    }

    fn push_fields(&mut self, fields: impl Iterator<Item = String>) {
        let line: Vec<String> = fields.collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Field {
    fn render(self) -> String {
        match self {
            Field::Num(x) => fmt_num(x),
            Field::Int(n) => n.to_string(),
            Field::Text(s) => s,
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<usize> for Field {
    fn from(n: usize) -> Self {
        Field::Int(n as u64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<String> for Field {
    fn from(s: String) -> Self {
        Field::Text(s)
    }
}

/// Output directory plus the list of artifacts written so far.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl Artifacts {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        self.write(name, &to_json(value))
    }

    pub fn csv(&mut self, name: &str, table: Csv) -> io::Result<()> {
        self.write(name, &table.into_string())
    }

    /// Writes `manifest.json`. Called on every exit path that has an output
    /// directory, including verifier failures and input errors.
    pub fn finish<C: Serialize>(mut self, config: &C, exit_code: i32, error: Option<&str>) -> io::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            tool: &'static str,
            version: &'static str,
            config: &'a C,
            exit_code: i32,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<&'a str>,
            threads: usize,
            wall_time_seconds: f64,
            artifacts: Vec<String>,
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
            exit_code,
            error,
            threads: rayon::current_num_threads(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: self.written.clone(),
        };
        let text = to_json(&manifest);
        self.write("manifest.json", &text)
    }
}
