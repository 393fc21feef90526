use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST_SCHEMA: u32 = 1;

/// One subcommand's output directory. Files are written in call order and
/// listed in the manifest.
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: &Path, name: &str) -> Result<Self> {
        let path = root.join(name);
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.path.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn copy(&mut self, from: &Path, name: &str) -> Result<()> {
        fs::copy(from, self.path.join(name)).with_context(|| format!("copying {}", from.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write the manifest and return the directory.
    pub fn finish<C: Serialize, T: Serialize>(self, info: ManifestInfo<'_, C, T>) -> Result<PathBuf> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            library_version: morseflow::VERSION,
            command: info.command,
            scenario_path: info.scenario_path.map(|p| p.display().to_string()),
            scenario: info.scenario,
            tolerances: info.tolerances,
            seed: info.seed,
            outputs: &self.files,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.path.join("manifest.json"), text)?;
        Ok(self.path)
    }
}

pub struct ManifestInfo<'a, C, T> {
    pub command: &'a C,
    pub scenario_path: Option<&'a Path>,
    pub scenario: Option<&'a morseflow::scenario::ScenarioFile>,
    pub tolerances: &'a T,
    pub seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a, C, T> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: &'a C,
    scenario_path: Option<String>,
    scenario: Option<&'a morseflow::scenario::ScenarioFile>,
    tolerances: &'a T,
    seed: u64,
    outputs: &'a [String],
    wall_time_seconds: f64,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn nums(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|&x| num(x))
}

pub fn coordinate_header(prefix: &[&str], n: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}
