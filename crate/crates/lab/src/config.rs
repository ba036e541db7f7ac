//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochdec_core::{seed, FactorGraph};

use crate::{alist, LabError, Result};

/// Where the parity-check matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CodeSpec {
    Gallager {
        n: usize,
        dv: usize,
        dc: usize,
        seed: u64,
    },
    Alist(PathBuf),
    /// Random tree code, every check of degree `2..=max_chk_degree`.
    Tree {
        n_vars: usize,
        max_chk_degree: usize,
        seed: u64,
    },
}

impl CodeSpec {
    pub fn build(&self) -> Result<FactorGraph> {
        match *self {
            CodeSpec::Gallager { n, dv, dc, seed } => Ok(FactorGraph::gallager(n, dv, dc, seed)?),
            CodeSpec::Alist(ref path) => alist::read(path),
            CodeSpec::Tree { n_vars, max_chk_degree, seed } => {
                if n_vars == 0 || max_chk_degree < 2 {
                    return Err(LabError::Config("tree needs n_vars >= 1 and max_chk_degree >= 2".into()));
                }
                Ok(FactorGraph::random_tree(n_vars, max_chk_degree, &mut seed::stream(seed)))
            }
        }
    }

    /// Relative paths are taken relative to `base`.
    fn rebase(&mut self, base: &Path) {
        if let CodeSpec::Alist(p) = self {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn default_sp_iters() -> usize {
    60
}

fn default_tol() -> f64 {
    1e-12
}

fn default_em() -> usize {
    25
}

fn default_cycles() -> usize {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderSpec {
    Sp {
        #[serde(default = "default_sp_iters")]
        max_iters: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Mbsd {
        k: Vec<usize>,
        #[serde(default = "default_sp_iters")]
        max_iters: usize,
        #[serde(default)]
        nds: bool,
    },
    Sd {
        #[serde(default = "default_cycles")]
        cycles: usize,
        #[serde(default = "default_em")]
        em_length: usize,
        #[serde(default)]
        nds: bool,
        /// Defaults to half the cycles.
        #[serde(default)]
        output_window: Option<usize>,
    },
}

fn default_max_frame_errors() -> Option<u64> {
    Some(100)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSpec,
    pub decoders: Vec<DecoderSpec>,
    pub ebno_db: Vec<f64>,
    pub frames: u64,
    /// Stop a cell once this many frames failed; `null` or `0` disables.
    #[serde(default = "default_max_frame_errors")]
    pub max_frame_errors: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Stop decoding a frame once the syndrome is satisfied.
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.code.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(LabError::Config(m.into()));
        if self.frames == 0 {
            return err("frames must be at least 1");
        }
        if self.ebno_db.is_empty() {
            return err("ebno_db grid is empty");
        }
        if self.ebno_db.iter().any(|x| !x.is_finite()) {
            return err("ebno_db values must be finite");
        }
        if self.decoders.is_empty() {
            return err("decoder list is empty");
        }
        for d in &self.decoders {
            match d {
                DecoderSpec::Sp { max_iters, .. } if *max_iters == 0 => return err("SP max_iters must be at least 1"),
                DecoderSpec::Mbsd { k, max_iters, .. } => {
                    if k.is_empty() {
                        return err("MbSD K list is empty");
                    }
                    if k.contains(&0) {
                        return err("every K must be at least 1");
                    }
                    if *max_iters == 0 {
                        return err("MbSD max_iters must be at least 1");
                    }
                }
                DecoderSpec::Sd { cycles, em_length, output_window, .. } => {
                    if *cycles == 0 || *em_length == 0 {
                        return err("SD cycles and em_length must be at least 1");
                    }
                    if let Some(w) = output_window {
                        if *w == 0 || w > cycles {
                            return err("SD output_window must lie in 1..=cycles");
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn max_frame_errors(&self) -> Option<u64> {
        self.max_frame_errors.filter(|&m| m > 0)
    }
}

fn default_runs() -> usize {
    2000
}

/// Frozen-noise fixture for the moment study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub code: CodeSpec,
    pub ebno_db: f64,
    /// Seed of the single received word.
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub nds: bool,
    pub k: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// MbSD iterations; defaults to the tree diameter.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Accuracy used when reporting the required dimension.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_eps() -> f64 {
    1e-2
}

impl MomentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.code.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(LabError::Config("K grid must be non-empty with every K >= 1".into()));
        }
        if self.runs < 2 {
            return Err(LabError::Config("runs must be at least 2".into()));
        }
        if self.iterations == Some(0) {
            return Err(LabError::Config("iterations must be at least 1".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(LabError::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "code": {"gallager": {"n": 200, "dv": 3, "dc": 6, "seed": 1}},
                "decoders": [
                    {"kind": "sp"},
                    {"kind": "mbsd", "k": [64, 1024], "nds": true},
                    {"kind": "sd", "cycles": 3000}
                ],
                "ebno_db": [2.5, 3.5],
                "frames": 100,
                "seed": 7
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.max_frame_errors(), Some(100));
        assert!(cfg.early_stop);
        assert_eq!(cfg.decoders[0], DecoderSpec::Sp { max_iters: 60, tol: 1e-12 });
        assert_eq!(cfg.decoders[2], DecoderSpec::Sd { cycles: 3000, em_length: 25, nds: false, output_window: None });
    }

    #[test]
    fn rejects_bad_values() {
        let base = r#"{"code": {"gallager": {"n": 12, "dv": 3, "dc": 6, "seed": 1}}, "decoders": [DEC], "ebno_db": [1.0], "frames": F}"#;
        let mk = |dec: &str, f: &str| ExperimentConfig::from_json(&base.replace("DEC", dec).replace("F", f));
        assert!(mk(r#"{"kind": "sp"}"#, "1").is_ok());
        assert!(matches!(mk(r#"{"kind": "sp"}"#, "0"), Err(LabError::Config(_))));
        assert!(matches!(mk(r#"{"kind": "mbsd", "k": [0]}"#, "1"), Err(LabError::Config(_))));
        assert!(matches!(mk(r#"{"kind": "mbsd", "k": []}"#, "1"), Err(LabError::Config(_))));
        assert!(matches!(mk(r#"{"kind": "nope"}"#, "1"), Err(LabError::Config(_))));
        assert!(matches!(mk(r#"{"kind": "sd", "cycles": 10, "output_window": 11}"#, "1"), Err(LabError::Config(_))));
    }
}
