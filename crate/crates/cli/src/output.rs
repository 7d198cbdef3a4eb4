//! Result files: JSON lines, a CSV summary, two-column `.dat` series, the
//! config echo and a plotting script.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

pub const CSV_HEADER: &str = "command,beta,n,theta,h,estimate,stderr,replicas,seed";

/// One JSON-lines record.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub command: String,
    pub params: Value,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub replicas: u64,
    pub seed: u64,
    /// Seconds spent on this record; `null` when timestamps are disabled.
    pub wall_time: Option<f64>,
    /// Command-specific payload (certificate, audit report, ...).
    pub detail: Value,
    /// The full configuration, so every line reruns on its own.
    pub config: Value,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub struct Output {
    dir: PathBuf,
    timestamp: bool,
    echo: String,
    config: Value,
    records: Vec<Record>,
    series: BTreeMap<String, (String, Vec<(f64, f64)>)>,
}

impl Output {
    pub fn new(dir: &Path, timestamp: bool, echo: String, config: Value) -> Self {
        Self { dir: dir.into(), timestamp, echo, config, records: Vec::new(), series: BTreeMap::new() }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        command: &str,
        params: Value,
        estimate: Option<f64>,
        stderr: Option<f64>,
        replicas: u64,
        seed: u64,
        seconds: f64,
        detail: Value,
    ) {
        self.records.push(Record {
            command: command.into(),
            params,
            estimate: estimate.and_then(finite),
            stderr: stderr.and_then(finite),
            replicas,
            seed,
            wall_time: self.timestamp.then_some(seconds),
            detail,
            config: self.config.clone(),
        });
    }

    /// Appends `(x, y)` to the named two-column series.
    pub fn point(&mut self, name: &str, columns: &str, x: f64, y: f64) {
        self.series.entry(name.into()).or_insert_with(|| (columns.into(), Vec::new())).1.push((x, y));
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    fn commented_echo(&self) -> String {
        self.echo.lines().map(|l| format!("# {l}\n")).collect()
    }

    pub fn write(&self) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut jsonl = String::new();
        for r in &self.records {
            jsonl.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
            jsonl.push('\n');
        }
        fs::write(self.dir.join("results.jsonl"), jsonl)?;

        let mut csv = self.commented_echo();
        csv.push_str(CSV_HEADER);
        csv.push('\n');
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let p = |k: &str| r.params.get(k).map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.command,
                p("beta"),
                p("n"),
                p("theta"),
                p("h"),
                num(r.estimate),
                num(r.stderr),
                r.replicas,
                r.seed
            );
        }
        fs::write(self.dir.join("summary.csv"), csv)?;

        let mut echo = String::new();
        if self.timestamp {
            let secs =
                std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let _ = writeln!(echo, "# written at unix time {secs}");
        }
        echo.push_str(&self.echo);
        fs::write(self.dir.join("config.toml"), echo)?;

        for (name, (columns, pts)) in &self.series {
            let mut s = self.commented_echo();
            let _ = writeln!(s, "# {columns}");
            for (x, y) in pts {
                let _ = writeln!(s, "{x:e} {y:e}");
            }
            fs::write(self.dir.join(format!("{name}.dat")), s)?;
        }
        if !self.series.is_empty() {
            fs::write(self.dir.join("plot.py"), PLOT_SCRIPT)?;
        }
        Ok(())
    }
}

const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plots every two-column .dat file in this directory to a PNG next to it."""
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent)
for dat in sorted(here.glob("*.dat")):
    xs, ys, labels = [], [], ["x", "y"]
    for line in dat.read_text().splitlines():
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2:
                labels = parts
            continue
        x, y = map(float, line.split())
        xs.append(x)
        ys.append(y)
    fig, ax = plt.subplots()
    ax.plot(xs, ys, "o-")
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(dat.stem)
    fig.savefig(dat.with_suffix(".png"), dpi=120)
    plt.close(fig)
"##;
