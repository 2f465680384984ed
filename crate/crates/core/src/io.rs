//! CSV and JSON persistence plus the run-configuration schema.

use crate::experiments::SyntheticSpec;
use crate::model::ModelParams;
use crate::solver::SolverOptions;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}:{line}:{col}: cannot parse {token:?} as a number")]
    Parse { path: String, line: usize, col: usize, token: String },
    #[error("{path}:{line}: row has {got} fields, expected {expected}")]
    RaggedRow { path: String, line: usize, expected: usize, got: usize },
    #[error("{path}: no data rows after the header")]
    Empty { path: String },
    #[error("config {path}: {msg}")]
    Schema { path: String, msg: String },
}

/// Reads a rectangular numeric CSV with one header row.
pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: p.clone(), source })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (li, line) in text.lines().enumerate() {
        if li == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut col0 = 1;
        for tok in line.split(',') {
            let t = tok.trim();
            match t.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    return Err(IoError::Parse {
                        path: p,
                        line: li + 1,
                        col: col0,
                        token: t.to_string(),
                    })
                }
            }
            col0 += 1;
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(IoError::RaggedRow {
                    path: p,
                    line: li + 1,
                    expected: w,
                    got: row.len(),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let ncols = width.ok_or(IoError::Empty { path: p.clone() })?;
    let nrows = rows.len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Loads a single-column (or single-row) CSV as a vector.
pub fn load_vector_csv(path: &Path) -> Result<DVector<f64>, IoError> {
    let m = load_matrix_csv(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).clone_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(IoError::Schema {
            path: path.display().to_string(),
            msg: format!("expected a vector, found {}x{}", m.nrows(), m.ncols()),
        })
    }
}

/// Writes values with `{}` formatting, which round-trips f64 exactly.
pub fn save_matrix_csv(
    path: &Path,
    header: &[String],
    m: &DMatrix<f64>,
) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|source| IoError::Write { path: path.display().to_string(), source })
}

pub fn save_vector_csv(path: &Path, name: &str, v: &DVector<f64>) -> Result<(), IoError> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    save_matrix_csv(path, &[name.to_string()], &m)
}

pub fn default_header(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn default_gamma() -> f64 {
    1.0
}
fn default_mu() -> f64 {
    1.9
}
fn default_eps() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_eps")]
    pub eps_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: default_gamma(),
            mu: default_mu(),
            eps_tol: default_eps(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            gamma: self.gamma,
            mu: self.mu,
            eps_tol: self.eps_tol,
            max_iter: self.max_iter,
            record_history: false,
        }
    }
}

/// Model parameters as they appear in config files. Group indices are
/// 1-based here and converted on the way in.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamConfig {
    pub alpha: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub eps: Option<f64>,
    pub sigma_min: Option<f64>,
    pub groups: Option<Vec<Vec<usize>>>,
    pub weights: Option<Vec<f64>>,
}

impl ParamConfig {
    pub fn to_model_params(&self) -> Result<ModelParams, String> {
        let groups = match &self.groups {
            None => None,
            Some(gs) => {
                let mut out = Vec::with_capacity(gs.len());
                for g in gs {
                    let mut zg = Vec::with_capacity(g.len());
                    for &i in g {
                        if i == 0 {
                            return Err("group indices are 1-based; found 0".into());
                        }
                        zg.push(i - 1);
                    }
                    out.push(zg);
                }
                Some(out)
            }
        };
        Ok(ModelParams {
            alpha: self.alpha,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            rho1: self.rho1,
            rho2: self.rho2,
            q: self.q,
            r: self.r,
            delta: self.delta,
            delta1: self.delta1,
            delta2: self.delta2,
            eps: self.eps,
            sigma_min: self.sigma_min,
            groups,
            weights: self.weights.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub num: usize,
    #[serde(default = "default_log")]
    pub log: bool,
}

fn default_log() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    #[serde(default)]
    pub params: ParamConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<GridConfig>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, IoError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: p.clone(), source })?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| IoError::Schema { path: p.clone(), msg: e.to_string() })?;
    validate_config(&cfg).map_err(|msg| IoError::Schema { path: p, msg })?;
    Ok(cfg)
}

pub fn validate_config(cfg: &RunConfig) -> Result<(), String> {
    match (&cfg.data, &cfg.synthetic) {
        (Some(_), Some(_)) => return Err("specify either data paths or a synthetic spec, not both".into()),
        (None, None) => return Err("specify data paths or a synthetic spec".into()),
        _ => {}
    }
    if !(cfg.solver.mu > 0.0 && cfg.solver.mu < 2.0) {
        return Err(format!("solver.mu = {} outside ]0,2[", cfg.solver.mu));
    }
    if !(cfg.solver.gamma > 0.0) {
        return Err(format!("solver.gamma = {} must be positive", cfg.solver.gamma));
    }
    if !(cfg.solver.eps_tol > 0.0) {
        return Err(format!("solver.eps_tol = {} must be positive", cfg.solver.eps_tol));
    }
    if cfg.solver.max_iter == 0 {
        return Err("solver.max_iter must be positive".into());
    }
    if let Some(g) = &cfg.alpha_grid {
        if !(g.min > 0.0 && g.max >= g.min) || g.num == 0 {
            return Err("alpha_grid requires 0 < min <= max and num >= 1".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn csv_small_example() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("m.csv");
        std::fs::write(&f, "a,b\n1,2\n3,4\n").unwrap();
        let m = load_matrix_csv(&f).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn csv_ragged_row() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("m.csv");
        std::fs::write(&f, "a,b\n1,2\n3,4,5\n").unwrap();
        match load_matrix_csv(&f) {
            Err(IoError::RaggedRow { line, expected, got, .. }) => {
                assert_eq!((line, expected, got), (3, 2, 3));
            }
            other => panic!("expected RaggedRow, got {other:?}"),
        }
    }

    #[test]
    fn csv_parse_error_location() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("m.csv");
        std::fs::write(&f, "a,b\n1,2\n3,oops\n").unwrap();
        match load_matrix_csv(&f) {
            Err(IoError::Parse { line, col, token, .. }) => {
                assert_eq!((line, col), (3, 2));
                assert_eq!(token, "oops");
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_exact() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("m.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DMatrix::from_fn(7, 4, |_, _| rng.gen::<f64>() * 1e3 - 500.0);
        save_matrix_csv(&f, &default_header("c", 4), &m).unwrap();
        let back = load_matrix_csv(&f).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("v.csv");
        let v = DVector::from_vec(vec![1.5, -2.25, 1.0 / 3.0]);
        save_vector_csv(&f, "v", &v).unwrap();
        assert_eq!(load_vector_csv(&f).unwrap(), v);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(
            &f,
            r#"{"model":"lasso","params":{"alpha1":1.0},"data":{"x":"X.csv","y":"y.csv"}}"#,
        )
        .unwrap();
        let cfg = parse_config(&f).unwrap();
        assert_eq!(cfg.solver.gamma, 1.0);
        assert_eq!(cfg.solver.mu, 1.9);
        assert_eq!(cfg.solver.eps_tol, 1e-4);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(
            &f,
            r#"{"model":"lasso","params":{"alpha_one":1.0},"data":{"x":"X.csv","y":"y.csv"}}"#,
        )
        .unwrap();
        match parse_config(&f) {
            Err(IoError::Schema { msg, .. }) => assert!(msg.contains("alpha_one"), "{msg}"),
            other => panic!("expected Schema, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_both_sources_and_bad_mu() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(
            &f,
            r#"{"model":"lasso","params":{"alpha1":1.0},
                "data":{"x":"X.csv","y":"y.csv"},
                "synthetic":{"n":2,"p":1,"design":"iid_normal",
                             "scale_groups":[[[1,2],1.0]],"b_true":[0.0],"seed":1}}"#,
        )
        .unwrap();
        assert!(matches!(parse_config(&f), Err(IoError::Schema { .. })));

        let g = dir.path().join("d.json");
        std::fs::write(
            &g,
            r#"{"model":"lasso","params":{"alpha1":1.0},"solver":{"mu":2.5},
                "data":{"x":"X.csv","y":"y.csv"}}"#,
        )
        .unwrap();
        match parse_config(&g) {
            Err(IoError::Schema { msg, .. }) => assert!(msg.contains("mu"), "{msg}"),
            other => panic!("expected Schema, got {other:?}"),
        }
    }

    #[test]
    fn one_based_groups_convert() {
        let pc = ParamConfig {
            groups: Some(vec![vec![1, 2], vec![3]]),
            ..Default::default()
        };
        let mp = pc.to_model_params().unwrap();
        assert_eq!(mp.groups, Some(vec![vec![0, 1], vec![2]]));
        let bad = ParamConfig { groups: Some(vec![vec![0]]), ..Default::default() };
        assert!(bad.to_model_params().is_err());
    }
}
