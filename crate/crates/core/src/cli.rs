//! Command-line entry points.

use crate::experiments::{gen_synthetic, log_grid, run_path};
use crate::io::{
    default_header, load_matrix_csv, load_vector_csv, parse_config, save_matrix_csv,
    save_vector_csv, GridConfig, RunConfig,
};
use crate::model::{assemble_stacked, build_model};
use crate::persp::{AtomKind, PerspectiveAtom};
use crate::solver::solve;
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pmest", about = "Perspective M-estimation solver", version)]
struct Cli {
    /// Worker cap for path runs (falls back to PM_THREADS; currently
    /// informational, execution is sequential for determinism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output file or directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the synthetic data seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data CSVs from the config's synthetic spec
    Gen(ConfigArgs),
    /// Run a single solve and write the solution as JSON
    Solve {
        #[command(flatten)]
        common: ConfigArgs,
        /// Override the model's alpha1
        #[arg(long)]
        alpha1: Option<f64>,
    },
    /// Solve along an alpha1 grid and write per-alpha results
    Path {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        alpha1_min: Option<f64>,
        #[arg(long)]
        alpha1_max: Option<f64>,
        /// Number of grid points
        #[arg(long)]
        num: Option<usize>,
        /// Space the grid log-linearly
        #[arg(long, default_value_t = true)]
        log_grid: bool,
    },
    /// Compare closed-form proximity operators against the generic
    /// projection-based evaluation on random inputs
    ProxSelftest {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap uses exit code 2 for usage errors, 0 for --help/--version
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _threads = cli
        .threads
        .or_else(|| std::env::var("PM_THREADS").ok().and_then(|v| v.parse().ok()));
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Solve { common, alpha1 } => cmd_solve(&common, alpha1),
        Command::Path { common, alpha1_min, alpha1_max, num, log_grid } => {
            cmd_path(&common, alpha1_min, alpha1_max, num, log_grid)
        }
        Command::ProxSelftest { trials, tol, seed } => cmd_selftest(trials, tol, seed),
    };
    match result {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, String> {
    let mut cfg = parse_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        if let Some(s) = &mut cfg.synthetic {
            s.seed = seed;
        }
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

/// Returns the design, response, and the MAE reference (X b_true for
/// synthetic data, y for file data).
fn load_data(cfg: &RunConfig) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>), String> {
    if let Some(paths) = &cfg.data {
        let x = load_matrix_csv(Path::new(&paths.x)).map_err(|e| e.to_string())?;
        let y = load_vector_csv(Path::new(&paths.y)).map_err(|e| e.to_string())?;
        if y.len() != x.nrows() {
            return Err(format!("y has {} entries, X has {} rows", y.len(), x.nrows()));
        }
        let target = y.clone();
        Ok((x, y, target))
    } else {
        let spec = cfg.synthetic.as_ref().expect("validated config");
        let data = gen_synthetic(spec).map_err(|e| e.to_string())?;
        let target = &data.x * &data.b_true;
        Ok((data.x, data.y, target))
    }
}

fn cmd_gen(args: &ConfigArgs) -> Result<(), String> {
    let cfg = load_config(args)?;
    let spec = cfg
        .synthetic
        .as_ref()
        .ok_or("gen requires a synthetic spec in the config")?;
    let out = cfg.output.as_deref().ok_or("gen requires an output directory")?;
    let dir = Path::new(out);
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {out}: {e}"))?;
    let data = gen_synthetic(spec).map_err(|e| e.to_string())?;
    save_matrix_csv(&dir.join("X.csv"), &default_header("x", data.x.ncols()), &data.x)
        .map_err(|e| e.to_string())?;
    save_vector_csv(&dir.join("y.csv"), "y", &data.y).map_err(|e| e.to_string())?;
    save_vector_csv(&dir.join("b_true.csv"), "b_true", &data.b_true).map_err(|e| e.to_string())?;
    save_vector_csv(&dir.join("o_true.csv"), "o_true", &data.o_true).map_err(|e| e.to_string())?;
    save_vector_csv(&dir.join("s_true.csv"), "s_true", &data.s_true).map_err(|e| e.to_string())?;
    let summary = json!({ "config": cfg, "files": ["X.csv", "y.csv", "b_true.csv", "o_true.csv", "s_true.csv"] });
    std::fs::write(dir.join("gen.json"), serde_json::to_string_pretty(&summary).unwrap())
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_solve(args: &ConfigArgs, alpha1: Option<f64>) -> Result<(), String> {
    let mut cfg = load_config(args)?;
    if let Some(a) = alpha1 {
        cfg.params.alpha1 = Some(a);
    }
    let (x, y, _) = load_data(&cfg)?;
    let params = cfg.params.to_model_params()?;
    let spec = build_model(&cfg.model, &params, &x, &y).map_err(|e| e.to_string())?;
    let stacked = assemble_stacked(&spec).map_err(|e| e.to_string())?;
    let opts = cfg.solver.to_options();
    let (sol, _) = solve(&spec, &stacked, &opts, None).map_err(|e| e.to_string())?;
    let out = json!({
        "config": cfg,
        "solution": {
            "b": sol.b.as_slice(),
            "s": sol.s.as_slice(),
            "t": sol.t.as_slice(),
            "objective": sol.objective,
            "iterations": sol.iterations,
            "converged": sol.converged,
        }
    });
    let text = serde_json::to_string_pretty(&out).unwrap();
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {path}: {e}"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_path(
    args: &ConfigArgs,
    alpha1_min: Option<f64>,
    alpha1_max: Option<f64>,
    num: Option<usize>,
    log_flag: bool,
) -> Result<(), String> {
    let mut cfg = load_config(args)?;
    if let (Some(lo), Some(hi), Some(k)) = (alpha1_min, alpha1_max, num) {
        cfg.alpha_grid = Some(GridConfig { min: lo, max: hi, num: k, log: log_flag });
    }
    let grid_cfg = cfg.alpha_grid.clone().ok_or("path requires an alpha grid (config or flags)")?;
    if !(grid_cfg.min > 0.0 && grid_cfg.max >= grid_cfg.min && grid_cfg.num >= 1) {
        return Err("alpha grid requires 0 < min <= max and num >= 1".into());
    }
    let alphas = if grid_cfg.log {
        log_grid(grid_cfg.min, grid_cfg.max, grid_cfg.num)
    } else {
        let k = grid_cfg.num;
        (0..k)
            .map(|i| {
                if k == 1 {
                    grid_cfg.min
                } else {
                    grid_cfg.min + (grid_cfg.max - grid_cfg.min) * i as f64 / (k - 1) as f64
                }
            })
            .collect()
    };
    let (x, y, target) = load_data(&cfg)?;
    let params = cfg.params.to_model_params()?;
    let model = cfg.model.clone();
    let opts = cfg.solver.to_options();
    let res = run_path(
        |a| {
            let mut p = params.clone();
            p.alpha1 = Some(a);
            build_model(&model, &p, &x, &y)
        },
        &alphas,
        &opts,
        &x,
        &target,
    )
    .map_err(|e| e.to_string())?;

    let out_base = cfg.output.clone().unwrap_or_else(|| "path".into());
    let csv_path = format!("{out_base}.csv");
    let json_path = format!("{out_base}.json");

    let mut csv = String::from("alpha");
    let (p, big_n) = (x.ncols(), res.solutions.iter().find_map(|s| s.as_ref().ok().map(|s| s.s.len())).unwrap_or(0));
    for j in 1..=p {
        let _ = write!(csv, ",b{j}");
    }
    for j in 1..=big_n {
        let _ = write!(csv, ",s{j}");
    }
    csv.push_str(",t_mean,objective,mae,converged\n");
    for (i, sol) in res.solutions.iter().enumerate() {
        let _ = write!(csv, "{}", res.alphas[i]);
        match sol {
            Ok(s) => {
                for v in s.b.iter() {
                    let _ = write!(csv, ",{v}");
                }
                for v in s.s.iter() {
                    let _ = write!(csv, ",{v}");
                }
                let t_mean = if s.t.is_empty() { 0.0 } else { s.t.mean() };
                let _ = write!(csv, ",{t_mean},{},{},{}", s.objective, res.maes[i].unwrap(), s.converged);
            }
            Err(e) => {
                for _ in 0..p + big_n {
                    csv.push(',');
                }
                let _ = write!(csv, ",,,failed: {e}");
            }
        }
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv).map_err(|e| format!("cannot write {csv_path}: {e}"))?;

    let summary = json!({
        "config": cfg,
        "alphas": res.alphas,
        "maes": res.maes,
        "argmin": res.argmin,
        "best_alpha": res.argmin.map(|i| res.alphas[i]),
        "best_mae": res.argmin.and_then(|i| res.maes[i]),
        "csv": csv_path,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(|e| format!("cannot write {json_path}: {e}"))?;
    Ok(())
}

/// Atom configurations exercised by the self-test.
fn selftest_atoms() -> Vec<PerspectiveAtom> {
    let mut atoms = Vec::new();
    for &q in &[1.5, 2.0, 3.0] {
        atoms.push(PerspectiveAtom::new(AtomKind::ScaledLasso { alpha: 1.0, kappa: 2.0, q }, 3).unwrap());
        atoms.push(PerspectiveAtom::new(AtomKind::Huber { alpha: 0.5, rho: 1.345, q }, 3).unwrap());
        atoms.push(PerspectiveAtom::new(AtomKind::Berhu { alpha: 0.5, rho: 1.0, kappa: 1.5, q }, 3).unwrap());
    }
    atoms.push(PerspectiveAtom::new(AtomKind::BerhuStd { alpha: 1.0, rho: 2.0 }, 3).unwrap());
    atoms.push(PerspectiveAtom::new(AtomKind::Vapnik { alpha: 1.0, eps: 0.5 }, 3).unwrap());
    atoms.push(PerspectiveAtom::new(AtomKind::PlainSqL2 { weight: 1.0 }, 3).unwrap());
    atoms
}

fn cmd_selftest(trials: usize, tol: f64, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let gammas = [0.5, 1.0, 2.0];
    let mut failures = 0usize;
    let mut checked = 0usize;
    for atom in selftest_atoms() {
        if !atom.is_radial() {
            continue;
        }
        let mut worst: f64 = 0.0;
        for trial in 0..trials {
            let gamma = gammas[trial % gammas.len()];
            let sigma = rng.gen_range(-2.0..3.0);
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let fast = atom.prox(gamma, sigma, &x).map_err(|e| e.to_string())?;
            let slow = atom.prox_radial_generic(gamma, sigma, &x).map_err(|e| e.to_string())?;
            let d = (fast.sigma - slow.sigma).abs().max((&fast.x - &slow.x).abs().max());
            worst = worst.max(d);
            checked += 1;
        }
        let ok = worst <= tol;
        if !ok {
            failures += 1;
        }
        println!(
            "{} {:?}: max deviation {worst:.3e} over {trials} trials (tol {tol:.1e})",
            if ok { "ok  " } else { "FAIL" },
            atom.kind,
        );
    }
    println!("{checked} comparisons, {failures} failing atom(s)");
    if failures > 0 {
        Err(format!("{failures} atom(s) exceeded the tolerance"))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        assert!(cmd_selftest(60, 1e-6, 7).is_ok());
    }
}
