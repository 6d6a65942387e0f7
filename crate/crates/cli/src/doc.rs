//! Job documents and reports, both JSON lines with a schema tag on line 1.

use serde_json::{json, Map, Value};
use thiserror::Error;

pub const JOB_SCHEMA: &str = "cstar-desk/job";
pub const REPORT_SCHEMA: &str = "cstar-desk/report";
pub const SCHEMA_VERSION: u64 = 1;

pub const VERBS: &[&str] = &[
    "nc eval",
    "nc xicode",
    "nc gns",
    "uhf iso",
    "uhf embed",
    "uhf k0",
    "af biembed",
    "simplex convert",
    "simplex stage",
    "simplex factor",
    "simplex ppu",
    "ai sigma",
    "ai approx",
    "ai build",
    "ai k0",
    "ai cert",
    "ai tracecheck",
    "intertwine run",
    "intertwine limit",
];

/// Why a job did not finish with status `ok`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Failure {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Exhausted(String),
}

pub fn parse_err(msg: impl Into<String>) -> Failure {
    Failure::Parse(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
    ParseError,
    Exhausted,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation => 1,
            Status::ParseError => 2,
            Status::Exhausted => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation => "violation",
            Status::ParseError => "parse_error",
            Status::Exhausted => "exhausted",
        }
    }
}

/// Numeric options. Command-line flags take precedence over the document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Options {
    pub grid: Option<usize>,
    pub stages: Option<usize>,
    pub tol: Option<String>,
    pub bounds: Option<String>,
    pub seed: Option<u64>,
}

impl Options {
    pub fn or(self, fallback: Options) -> Options {
        Options {
            grid: self.grid.or(fallback.grid),
            stages: self.stages.or(fallback.stages),
            tol: self.tol.or(fallback.tol),
            bounds: self.bounds.or(fallback.bounds),
            seed: self.seed.or(fallback.seed),
        }
    }

    fn from_json(v: Option<&Value>) -> Result<Options, Failure> {
        let Some(v) = v else { return Ok(Options::default()) };
        let obj = v.as_object().ok_or_else(|| parse_err("options must be an object"))?;
        let uint = |k: &str| -> Result<Option<u64>, Failure> {
            obj.get(k)
                .map(|x| x.as_u64().ok_or_else(|| parse_err(format!("option {k} must be a nonnegative integer"))))
                .transpose()
        };
        let text = |k: &str| -> Result<Option<String>, Failure> {
            obj.get(k)
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(parse_err(format!("option {k} must be a string or number"))),
                })
                .transpose()
        };
        if let Some(k) = obj.keys().find(|k| !["grid", "stages", "tol", "bounds", "seed"].contains(&k.as_str())) {
            return Err(parse_err(format!("unknown option {k}")));
        }
        Ok(Options {
            grid: uint("grid")?.map(|g| g as usize),
            stages: uint("stages")?.map(|s| s as usize),
            tol: text("tol")?,
            bounds: text("bounds")?,
            seed: uint("seed")?,
        })
    }

    /// Range checks shared by every verb.
    pub fn validate(&self) -> Result<(), Failure> {
        if let Some(g) = self.grid {
            if !(2..=65_537).contains(&g) {
                return Err(parse_err(format!("grid {g} outside 2..=65537")));
            }
        }
        if let Some(s) = self.stages {
            if !(1..=64).contains(&s) {
                return Err(parse_err(format!("stages {s} outside 1..=64")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobDocument {
    pub verb: Option<String>,
    pub payload: Value,
    pub options: Options,
}

impl JobDocument {
    pub fn parse(text: &str) -> Result<JobDocument, Failure> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Value = lines
            .next()
            .ok_or_else(|| parse_err("empty document"))
            .and_then(|l| serde_json::from_str(l).map_err(|e| parse_err(format!("line 1: {e}"))))?;
        if header.get("schema").and_then(Value::as_str) != Some(JOB_SCHEMA) {
            return Err(parse_err(format!("line 1 must carry schema \"{JOB_SCHEMA}\"")));
        }
        match header.get("version").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            other => return Err(parse_err(format!("unsupported schema version {other:?}"))),
        }
        let body: Value = lines
            .next()
            .ok_or_else(|| parse_err("missing job line"))
            .and_then(|l| serde_json::from_str(l).map_err(|e| parse_err(format!("line 2: {e}"))))?;
        if lines.next().is_some() {
            return Err(parse_err("a job document has exactly two lines"));
        }
        let verb = match body.get("verb") {
            None => None,
            Some(Value::String(v)) if VERBS.contains(&v.as_str()) => Some(v.clone()),
            Some(v) => return Err(parse_err(format!("unknown verb {v}"))),
        };
        Ok(JobDocument {
            verb,
            payload: body.get("payload").cloned().unwrap_or(Value::Null),
            options: Options::from_json(body.get("options"))?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut body = Map::new();
        if let Some(v) = &self.verb {
            body.insert("verb".into(), json!(v));
        }
        body.insert("payload".into(), self.payload.clone());
        format!("{}\n{}\n", json!({"schema": JOB_SCHEMA, "version": SCHEMA_VERSION}), Value::Object(body))
    }
}

/// A finished job: summary on line 2, one line per row after that.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub verb: String,
    pub status: Status,
    pub message: Option<String>,
    pub result: Value,
    pub rows: Vec<Value>,
    /// CSV written next to the report when an output path is declared.
    pub csv: Option<String>,
}

impl Report {
    pub fn failed(verb: &str, status: Status, message: String) -> Report {
        Report { verb: verb.into(), status, message: Some(message), result: Value::Null, rows: Vec::new(), csv: None }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    /// The report as JSON lines. With `inline_csv`, any CSV is embedded in the summary.
    pub fn to_text(&self, inline_csv: bool) -> String {
        let mut summary = Map::new();
        summary.insert("verb".into(), json!(self.verb));
        summary.insert("status".into(), json!(self.status.name()));
        summary.insert("exit".into(), json!(self.exit_code()));
        if let Some(m) = &self.message {
            summary.insert("message".into(), json!(m));
        }
        summary.insert("result".into(), self.result.clone());
        summary.insert("rows".into(), json!(self.rows.len()));
        if let (true, Some(csv)) = (inline_csv, &self.csv) {
            summary.insert("csv".into(), json!(csv));
        }
        let mut out = format!("{}\n{}\n", json!({"schema": REPORT_SCHEMA, "version": SCHEMA_VERSION}), Value::Object(summary));
        for row in &self.rows {
            out.push_str(&row.to_string());
            out.push('\n');
        }
        out
    }
}
