use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ratchet_core::dynamics::IntegratorConfig;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Cycle,
    Current,
    Expansion,
    Ensemble,
    Sweep,
    Reproduce,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Cycle => "cycle",
            CommandKind::Current => "current",
            CommandKind::Expansion => "expansion",
            CommandKind::Ensemble => "ensemble",
            CommandKind::Sweep => "sweep",
            CommandKind::Reproduce => "reproduce",
        }
    }
}

/// Numerical tolerances in force during a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    pub cycle_tol: f64,
    pub cycle_grid_size: usize,
    pub velocity_floor: f64,
    pub regime_margin: f64,
    pub integrator: IntegratorConfig,
}

impl Tolerances {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            cycle_tol: cfg.cycle.numerics.tol,
            cycle_grid_size: cfg.cycle.numerics.grid_size,
            velocity_floor: cfg.cycle.numerics.v_floor,
            regime_margin: cfg.adiabatic.margin,
            integrator: cfg.integrator,
        }
    }
}

/// Written next to every run's outputs; `ratchet rerun` replays it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub version: String,
    pub config: RunConfig,
    pub threads: usize,
    pub started_unix: u64,
    pub duration_seconds: f64,
    pub tolerances: Tolerances,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::config::ConfigError(format!("{}: {e}", path.display())).into())
    }
}

/// Collects the files of one run in its output directory.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv<S: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = S>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// For writers that produce their own CSV.
    pub fn raw(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.open(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn finish(self) -> Vec<String> {
        self.written
    }
}
