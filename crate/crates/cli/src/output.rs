use std::fs;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "KINKLAB_OUTPUT";

/// One output directory and the files written into it.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = Cell>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.into_iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `config.json` (re-runnable with `kinklab run --config`) and
    /// `manifest.json`.
    pub fn finish(mut self, config: &Value, wall: Duration, status: &str) -> Result<PathBuf> {
        self.json("config.json", config)?;
        let started = SystemTime::now().checked_sub(wall).unwrap_or(UNIX_EPOCH);
        let manifest = json!({
            "config": config,
            "versions": {
                "kinklab": env!("CARGO_PKG_VERSION"),
                "target_os": std::env::consts::OS,
                "target_arch": std::env::consts::ARCH,
            },
            "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            "wall_time_s": wall.as_secs_f64(),
            "status": status,
            "outputs": self.files,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(self.dir)
    }
}

/// A CSV field; missing values are written as empty fields.
pub enum Cell {
    F(f64),
    U(usize),
    Missing,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => write!(f, "{v:e}"),
            Cell::U(v) => write!(f, "{v}"),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::F)
    }
}

/// A matplotlib script that plots `y` columns of a CSV against `x`.
pub fn plot_script(csv: &str, x: &str, ys: &[&str], title: &str) -> String {
    let ys = ys.iter().map(|y| format!("\"{y}\"")).collect::<Vec<_>>().join(", ");
    format!(
        r#"#!/usr/bin/env python3
# Generated by kinklab. Run from this directory: python3 plot.py
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("{csv}") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["{x}"]) for r in rows]
fig, ax = plt.subplots()
for col in [{ys}]:
    ax.plot(x, [float(r[col]) if r[col] else float("nan") for r in rows], label=col)
ax.set_xlabel("{x}")
ax.set_title("{title}")
ax.legend()
fig.savefig("{stem}.png", dpi=150)
"#,
        stem = csv.trim_end_matches(".csv"),
    )
}
