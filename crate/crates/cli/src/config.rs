//! Experiment configuration: one TOML file, every field optional.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use potlab::kernel::DEFAULT_WMP_MAX_SIZE;
use potlab::suite::{Family, SuiteConfig};
use potlab::{FiniteSpace, KernelMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub suite: SuiteSection,
    /// An explicit kernel; when present it replaces the random suite.
    pub instance: Option<InstanceSection>,
    pub verify: VerifySection,
    pub capacity: CapacitySection,
    pub solve: SolveSection,
    pub counterexample: CounterexampleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: SuiteConfig::default().seed,
            jobs: 0,
            suite: SuiteSection::default(),
            instance: None,
            verify: VerifySection::default(),
            capacity: CapacitySection::default(),
            solve: SolveSection::default(),
            counterexample: CounterexampleSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub per_family: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub families: Vec<Family>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            per_family: s.per_family,
            min_atoms: s.min_atoms,
            max_atoms: s.max_atoms,
            families: Family::THEOREM.to_vec(),
        }
    }
}

/// A kernel given by its rows (`inf` allowed), with the weights of sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub rows: Vec<Vec<f64>>,
    /// Defaults to unit weights.
    pub weights: Option<Vec<f64>>,
    /// Target set for `capacity`; defaults to every atom.
    pub k: Option<Vec<usize>>,
}

impl InstanceSection {
    pub fn kernel(&self) -> Result<KernelMatrix> {
        KernelMatrix::from_rows(&self.rows).context("instance.rows")
    }

    pub fn sigma(&self) -> Result<FiniteSpace> {
        let w = self.weights.clone().unwrap_or_else(|| vec![1.0; self.rows.len()]);
        FiniteSpace::from_weights(w).context("instance.weights")
    }

    pub fn target(&self) -> Vec<usize> {
        self.k.clone().unwrap_or_else(|| (0..self.rows.len()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// `(p, r)` pairs for the embedding bounds.
    pub embedding_pairs: Vec<[f64; 2]>,
    /// `(q, r)` pairs for the sublinear equation.
    pub solver_pairs: Vec<[f64; 2]>,
    pub restarts: usize,
    /// Gagliardo parameter `lambda`.
    pub lambda: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            embedding_pairs: vec![[2.0, 1.0], [3.0, 2.0], [2.0, 0.5], [1.5, 1.0]],
            solver_pairs: vec![[0.5, 1.0], [0.5, 1.5], [0.3, 0.5], [0.7, 1.0]],
            restarts: potlab::embedding::DEFAULT_RESTARTS,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub families: Vec<Family>,
    pub tol: f64,
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self { families: Family::CAPACITY.to_vec(), tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub q: f64,
    pub r: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self { q: 0.5, r: 1.0, tol: 1e-10, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub n: usize,
    pub alpha: f64,
    pub q: f64,
    pub delta: f64,
    pub truncations: Vec<usize>,
    /// Largest relative change over the last two truncations still called bounded.
    pub stable_change: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        let c = potlab::CounterexampleConfig::default();
        Self {
            n: c.n,
            alpha: c.alpha,
            q: c.q,
            delta: c.delta,
            truncations: vec![100, 1000, 10_000],
            stable_change: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            seed: self.seed,
            per_family: self.suite.per_family,
            min_atoms: self.suite.min_atoms,
            max_atoms: self.suite.max_atoms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.suite_config().validate().context("suite")?;
        ensure!(!self.suite.families.is_empty(), "suite.families is empty");
        if let Some(inst) = &self.instance {
            ensure!(!inst.rows.is_empty(), "instance.rows is empty");
            ensure!(inst.rows.len() <= DEFAULT_WMP_MAX_SIZE, "instance has more than {DEFAULT_WMP_MAX_SIZE} atoms");
            if let Some(k) = &inst.k {
                ensure!(k.iter().all(|&i| i < inst.rows.len()), "instance.k indexes past the last atom");
            }
        }
        for &[p, r] in &self.verify.embedding_pairs {
            ensure!(r > 0.0 && r < p && p > 1.0, "embedding pair (p, r) = ({p}, {r}) needs 0 < r < p and p > 1");
        }
        for &[q, r] in &self.verify.solver_pairs {
            ensure!(q > 0.0 && q < 1.0 && r > 0.0, "solver pair (q, r) = ({q}, {r}) needs 0 < q < 1 and r > 0");
        }
        ensure!(self.verify.lambda > 0.0, "verify.lambda must be positive");
        ensure!(self.capacity.tol > 0.0 && self.solve.tol > 0.0, "tolerances must be positive");
        let s = &self.solve;
        ensure!(s.q > 0.0 && s.q < 1.0, "solve.q = {} is outside (0, 1)", s.q);
        ensure!(s.r > 0.0, "solve.r must be positive");
        let c = &self.counterexample;
        if c.truncations.len() < 2 {
            bail!("counterexample.truncations needs at least two values");
        }
        self.counterexample_config().validate().context("counterexample")?;
        Ok(())
    }

    pub fn counterexample_config(&self) -> potlab::CounterexampleConfig {
        let c = &self.counterexample;
        potlab::riesz::CounterexampleConfig {
            n: c.n,
            alpha: c.alpha,
            q: c.q,
            delta: c.delta,
            pieces: c.truncations.iter().copied().max().unwrap_or(0),
        }
    }

    /// Applies `--tol` to every check tolerance.
    pub fn override_tol(&mut self, tol: f64) {
        self.capacity.tol = tol;
        self.solve.tol = tol;
    }
}
