//! Experiment reports and their CSV/JSON encodings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] =
    ["experiment", "d", "window", "p", "r", "replication", "statistic", "value", "ci_lo", "ci_hi", "verdict", "seed"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub d: usize,
    pub window: String,
    pub p: Option<f64>,
    pub r: Option<f64>,
    pub replication: Option<usize>,
    pub statistic: String,
    pub value: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub verdict: Option<Verdict>,
    pub seed: u64,
}

impl Record {
    pub fn new(experiment: &str, d: usize, statistic: impl Into<String>, value: f64, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            d,
            window: String::new(),
            p: None,
            r: None,
            replication: None,
            statistic: statistic.into(),
            value,
            ci_lo: None,
            ci_hi: None,
            verdict: None,
            seed,
        }
    }

    pub fn window(mut self, w: impl ToString) -> Self {
        self.window = w.to_string();
        self
    }

    pub fn pr(mut self, p: Option<f64>, r: Option<f64>) -> Self {
        self.p = p;
        self.r = r;
        self
    }

    pub fn replication(mut self, rep: usize) -> Self {
        self.replication = Some(rep);
        self
    }

    pub fn ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci_lo = Some(lo);
        self.ci_hi = Some(hi);
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.verdict = Some(Verdict::from_bool(pass));
        self
    }

    fn csv_fields(&self) -> [String; 12] {
        let num = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        [
            self.experiment.clone(),
            self.d.to_string(),
            self.window.clone(),
            num(self.p),
            num(self.r),
            self.replication.map(|r| r.to_string()).unwrap_or_default(),
            self.statistic.clone(),
            format_float(self.value),
            num(self.ci_lo),
            num(self.ci_hi),
            self.verdict.map(|v| v.as_str().to_string()).unwrap_or_default(),
            self.seed.to_string(),
        ]
    }
}

/// Shortest representation that round-trips.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// A named pass/fail decision over some of the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub version: String,
    pub seed: u64,
    /// Not part of the reproducible numerics.
    pub wall_clock_seconds: f64,
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.records {
            w.write_record(r.csv_fields()).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(format!("report: {e}")))
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
