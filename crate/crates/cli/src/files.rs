//! Loading inputs and writing artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;
use stochmargin::case::{bundled_case, parse_case, NetworkCase};
use stochmargin::models::RampMode;
use stochmargin::scenario::{bundled_scenario, parse_scenario, scenario_case_ref, Scenario};

use crate::args::{ExperimentArgs, RampModeArg};

/// Case text from a bundled name or a file path.
pub fn read_case(spec: &str, relative_to: Option<&Path>) -> Result<(NetworkCase, String)> {
    let text = match bundled_case(spec) {
        Some(t) => t.to_string(),
        None => {
            let mut path = PathBuf::from(spec);
            if path.is_relative() {
                if let Some(dir) = relative_to {
                    if !path.exists() {
                        path = dir.join(path);
                    }
                }
            }
            std::fs::read_to_string(&path).with_context(|| format!("reading case {}", path.display()))?
        }
    };
    let case = parse_case(&text).with_context(|| format!("case {spec}"))?;
    Ok((case, spec.to_string()))
}

/// Resolve the experiment: scenario file, case, then flag overrides.
pub fn load_scenario(exp: &ExperimentArgs) -> Result<Scenario> {
    let bundled_default = matches!(exp.case.as_deref(), None | Some("ieee14"));
    let (text, dir) = match &exp.scenario {
        None if bundled_default => (bundled_scenario("default").map(str::to_string), None),
        None => (None, None),
        Some(s) => match bundled_scenario(s) {
            Some(t) => (Some(t.to_string()), None),
            None => {
                let path = PathBuf::from(s);
                let text =
                    std::fs::read_to_string(&path).with_context(|| format!("reading scenario {}", path.display()))?;
                (Some(text), path.parent().map(Path::to_path_buf))
            }
        },
    };
    let file_case = match &text {
        Some(t) => scenario_case_ref(t).context("scenario")?,
        None => None,
    };
    let case_spec = exp
        .case
        .clone()
        .or(file_case)
        .unwrap_or_else(|| "ieee14".to_string());
    let (case, label) = read_case(&case_spec, dir.as_deref())?;
    let case = Arc::new(case);

    let mut sc = match &text {
        Some(t) => parse_scenario(t, case).with_context(|| format!("scenario {}", exp.scenario.as_deref().unwrap_or("")))?,
        None => Scenario::new(case),
    };
    sc.case_ref = Some(label);
    if let Some(v) = exp.sigma {
        sc.sigma = v;
    }
    if let Some(v) = exp.interval {
        sc.ramp
            .as_mut()
            .ok_or_else(|| anyhow::anyhow!("--interval needs a scenario with a [ramp] table"))?
            .interval = v;
    }
    if let Some(m) = exp.ramp_mode {
        sc.ramp
            .as_mut()
            .ok_or_else(|| anyhow::anyhow!("--ramp-mode needs a scenario with a [ramp] table"))?
            .mode = match m {
            RampModeArg::Discrete => RampMode::Discrete,
            RampModeArg::Continuous => RampMode::Continuous,
        };
    }
    if let Some(v) = exp.runs {
        sc.n_runs = v;
    }
    if let Some(v) = exp.seed {
        sc.master_seed = v;
    }
    if let Some(v) = exp.dt {
        sc.dt = v;
    }
    if let Some(v) = exp.horizon {
        sc.horizon = v;
    }
    sc.validate().context("resolved scenario")?;
    Ok(sc)
}

pub struct OutDir {
    pub path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(OutDir {
            path: path.to_path_buf(),
        })
    }

    pub fn subdir(&self, name: &str) -> Result<Self> {
        OutDir::create(&self.path.join(name))
    }

    /// Write `name` through a temporary file renamed into place.
    pub fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let target = self.path.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.path)
            .with_context(|| format!("creating temporary file in {}", self.path.display()))?;
        tmp.write_all(contents)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub case: Option<&'a str>,
    pub fingerprint: Option<String>,
    pub master_seed: Option<u64>,
    pub n_runs: Option<usize>,
    pub workers: Option<usize>,
    /// Fully resolved scenario text.
    pub scenario: Option<String>,
    /// Master seed of each sweep point, in axis order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub point_seeds: Vec<u64>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            case: None,
            fingerprint: None,
            master_seed: None,
            n_runs: None,
            workers: None,
            scenario: None,
            point_seeds: Vec::new(),
        }
    }

    pub fn with_scenario(mut self, sc: &'a Scenario) -> Self {
        self.case = sc.case_ref.as_deref();
        self.fingerprint = Some(sc.fingerprint());
        self.master_seed = Some(sc.master_seed);
        self.n_runs = Some(sc.n_runs);
        self.scenario = Some(stochmargin::scenario::emit_scenario(sc));
        self
    }

    pub fn write(&self, out: &OutDir) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        out.write("manifest.json", text.as_bytes())?;
        Ok(())
    }
}
