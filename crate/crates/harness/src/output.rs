//! CSV and manifest emission.
//!
//! Every CSV starts with `# key=value` comment lines (schema, then the fully
//! resolved configuration), followed by a header row. Floats use 17
//! significant digits. Wall-clock data never enters these files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// `{:.16e}`: 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Configuration echoed into CSV headers. The output directory is left out
/// so that identical runs written to different places stay byte-identical.
pub fn config_echo(config: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    Ok(config.flatten()?.into_iter().filter(|(k, _)| k != "experiment.output_dir").collect())
}

pub struct OutputDir {
    root: PathBuf,
    echo: Vec<(String, String)>,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), echo: config_echo(config)?, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `rows` under `columns`, preceded by the schema tag, `extra`
    /// header pairs and the configuration echo.
    pub fn write_csv(
        &mut self,
        name: &str,
        table: &str,
        extra: &[(String, String)],
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "# schema=adjmc.{table}/{SCHEMA_VERSION}")?;
        for (k, v) in extra.iter().chain(&self.echo) {
            writeln!(w, "# {k}={v}")?;
        }
        {
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(columns)?;
            for row in rows {
                csv.write_record(row)?;
            }
            csv.flush()?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Registers a file produced by some other writer.
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn write_manifest(&mut self, config: &ExperimentConfig, summary: &[(String, String)]) -> Result<PathBuf> {
        let path = self.path("manifest.txt");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "adjmc run manifest")?;
        writeln!(w, "version={}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "schema={SCHEMA_VERSION}")?;
        writeln!(w)?;
        writeln!(w, "[config]")?;
        for (k, v) in config.flatten()? {
            writeln!(w, "{k}={v}")?;
        }
        writeln!(w)?;
        writeln!(w, "[summary]")?;
        for (k, v) in summary {
            writeln!(w, "{k}={v}")?;
        }
        writeln!(w)?;
        writeln!(w, "[files]")?;
        for f in &self.written {
            let shown = f.strip_prefix(&self.root).unwrap_or(f);
            writeln!(w, "{}", shown.display())?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Reads the data rows of a CSV written by [`OutputDir::write_csv`].
pub fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| Ok(rec?.iter().map(str::to_string).collect())).collect::<Result<_>>()?;
    Ok((header, rows))
}
