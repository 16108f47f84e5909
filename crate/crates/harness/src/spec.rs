//! Experiment descriptions: which grid to sweep, how many trials, and the
//! solver settings. Built from per-kind defaults, an optional TOML file and
//! command-line overrides, in that order.

use anyhow::{bail, Context, Result};
use pgd_vhl::{SolverConfig, SubspaceKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseSr,
    PhaseNs,
    PhaseNr,
    Convergence,
    Noise,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseSr => "phase-sr",
            ExperimentKind::PhaseNs => "phase-ns",
            ExperimentKind::PhaseNr => "phase-nr",
            ExperimentKind::Convergence => "converge",
            ExperimentKind::Noise => "noise",
        }
    }
}

/// Minimum wrap-around distance imposed on sampled locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Separation {
    #[serde(rename = "none")]
    None,
    #[default]
    #[serde(rename = "1overn")]
    OneOverN,
}

impl Separation {
    pub fn min_sep(self, n: usize) -> Option<f64> {
        match self {
            Separation::None => None,
            Separation::OneOverN => Some(1.0 / n as f64),
        }
    }
}

impl std::str::FromStr for Separation {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Separation::None),
            "1overn" => Ok(Separation::OneOverN),
            other => bail!("unknown separation mode '{other}' (expected none or 1overn)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n: Vec<usize>,
    pub s: Vec<usize>,
    pub r: Vec<usize>,
    pub sigma: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// A trial succeeds when `||X_hat - X||_F / ||X||_F` is at most this.
    pub threshold: f64,
    pub separation: Separation,
    pub subspace: SubspaceKind,
    pub solver: SolverConfig,
}

/// Log-spaced noise levels from `1e-3` to `1`, preceded by the noiseless point.
pub fn default_noise_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..7).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)));
    grid
}

impl ExperimentSpec {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentSpec {
            kind,
            n: vec![64],
            s: (1..=12).collect(),
            r: (1..=12).collect(),
            sigma: vec![0.0],
            trials: 20,
            seed: 0,
            threshold: 1e-3,
            separation: Separation::OneOverN,
            subspace: SubspaceKind::DftRows,
            solver: SolverConfig::default(),
        };
        match kind {
            ExperimentKind::PhaseSr => base,
            ExperimentKind::PhaseNs => ExperimentSpec {
                n: (2..=16).map(|k| 8 * k).collect(),
                s: (1..=12).collect(),
                r: vec![4],
                ..base
            },
            ExperimentKind::PhaseNr => ExperimentSpec {
                n: (2..=16).map(|k| 8 * k).collect(),
                s: vec![4],
                r: (1..=12).collect(),
                ..base
            },
            ExperimentKind::Convergence => ExperimentSpec {
                n: vec![256, 512, 1024],
                s: vec![4],
                r: vec![4],
                trials: 1,
                ..base
            },
            ExperimentKind::Noise => ExperimentSpec {
                n: vec![64, 128],
                s: vec![4],
                r: vec![4],
                sigma: default_noise_grid(),
                trials: 10,
                solver: SolverConfig::noisy(),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.s.is_empty() || self.r.is_empty() || self.sigma.is_empty() {
            bail!("every grid must be non-empty");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if let Some(bad) = self.sigma.iter().find(|v| !(**v >= 0.0)) {
            bail!("noise levels must be non-negative, got {bad}");
        }
        if !(self.threshold > 0.0) {
            bail!("success threshold must be positive");
        }
        self.solver.validate().context("solver configuration")?;
        Ok(())
    }
}

/// Optional overrides read from a TOML file. Absent keys keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<Vec<usize>>,
    pub s: Option<Vec<usize>>,
    pub r: Option<Vec<usize>>,
    pub sigma: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub separation: Option<Separation>,
    pub subspace: Option<SubspaceKind>,
    pub threads: Option<usize>,
    pub solver: Option<toml::Table>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing configuration file")
    }

    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    spec.$field = v.clone();
                }
            };
        }
        take!(n);
        take!(s);
        take!(r);
        take!(sigma);
        take!(trials);
        take!(seed);
        take!(threshold);
        take!(separation);
        take!(subspace);
        if let Some(table) = &self.solver {
            // merge onto the current solver settings key by key
            let mut current =
                toml::Table::try_from(&spec.solver).context("serialising solver settings")?;
            for (k, v) in table {
                current.insert(k.clone(), v.clone());
            }
            spec.solver = current
                .try_into()
                .context("solver section of configuration file")?;
        }
        Ok(())
    }
}

/// Parses `64`, `1,2,4` or an inclusive range `1..12` (also `1-12`).
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: usize = a
                    .trim()
                    .parse()
                    .with_context(|| format!("bad range start in '{part}'"))?;
                let b: usize = b
                    .trim()
                    .trim_start_matches('=')
                    .parse()
                    .with_context(|| format!("bad range end in '{part}'"))?;
                if a > b {
                    bail!("empty range '{part}'");
                }
                out.extend(a..=b);
            }
            None => out.push(
                part.parse()
                    .with_context(|| format!("bad integer '{part}'"))?,
            ),
        }
    }
    if out.is_empty() {
        bail!("empty list '{text}'");
    }
    Ok(out)
}
