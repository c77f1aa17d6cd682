//! Subcommand implementations. Each writes its artifacts under the output
//! directory and prints their paths.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bilateral_core::harness::{fit_exponent, EpisodeReport, ExponentFit, Iid};
use bilateral_core::instances::{bd_linear_instance, bd_linear_shifted};
use bilateral_core::learners::sb_configure;
use bilateral_core::{
    run_adversarial_episode, run_episode, sweep as run_sweep, AdversaryReport, BanditChoice,
    ExactPrice, InstanceSpec, LearnerSpec, MixtureDistribution, Price, PricePoint,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let (path, mut out) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// Derived Scouting Bandits parameters at one horizon.
#[derive(Serialize)]
struct SbSummary {
    density_bound: f64,
    epsilon: f64,
    ell: f64,
    delta: f64,
    arms: usize,
    scouting_rounds: usize,
    clamped: bool,
    bandit: BanditChoice,
}

fn sb_summary(
    spec: &LearnerSpec,
    law: &MixtureDistribution,
    horizon: usize,
) -> Result<Option<SbSummary>, CliError> {
    let LearnerSpec::Sb {
        epsilon, bandit, ..
    } = spec
    else {
        return Ok(None);
    };
    let m = spec
        .resolved_density_bound(law.marginal_density_bound())
        .unwrap_or(1.0);
    let s = sb_configure(m, horizon, *epsilon, *bandit)?;
    Ok(Some(SbSummary {
        density_bound: s.density_bound,
        epsilon: s.epsilon,
        ell: s.ell,
        delta: s.delta,
        arms: s.arms,
        scouting_rounds: s.scouting_rounds,
        clamped: s.clamped,
        bandit: *bandit,
    }))
}

#[derive(Serialize)]
struct RunReport<'a> {
    instance_spec: &'a InstanceSpec,
    learner_spec: &'a LearnerSpec,
    #[serde(flatten)]
    episode: EpisodeReport,
    best_fixed_price: f64,
    best_expected_gft: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sb: Option<SbSummary>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let instance = cfg.require_instance()?;
    let spec = cfg.require_learner()?;
    let horizon = cfg.require_horizon()?;
    let law = instance.build()?;
    let sb = sb_summary(spec, &law, horizon)?;
    let mut learner = spec.build(law.marginal_density_bound())?;
    let mut env = Iid::new(&law, instance.label());
    let traj = run_episode(&mut learner, &mut env, horizon, cfg.seed)?;
    let episode = EpisodeReport::new(&traj, Some(&law))?;
    let (best_p, best_v) = law.best_fixed_price();

    let dir = cfg.out_dir();
    let (csv_path, mut csv) = create(&dir, "run_trajectory.csv")?;
    traj.write_csv(&mut csv)?;
    csv.flush()?;
    let report = RunReport {
        instance_spec: instance,
        learner_spec: spec,
        episode,
        best_fixed_price: best_p.get(),
        best_expected_gft: best_v,
        sb,
    };
    let json_path = write_json(&dir, "run_report.json", &report)?;
    announce(&[csv_path, json_path]);
    Ok(())
}

/// Regret table of the self-test fixture `R(T) = T^0.5`.
fn sqrt_fixture(horizons: &[usize]) -> Vec<(f64, f64)> {
    horizons
        .iter()
        .map(|&h| (h as f64, (h as f64).sqrt()))
        .collect()
}

const SELFTEST_HORIZONS: [usize; 4] = [1_000, 10_000, 100_000, 1_000_000];

#[derive(Serialize)]
struct FixtureReport {
    fixture: &'static str,
    horizons: Vec<usize>,
    fitted_exponent: Option<ExponentFit>,
}

pub fn sweep(cfg: &ExperimentConfig, selftest: bool) -> Result<(), CliError> {
    let dir = cfg.out_dir();
    if selftest {
        let horizons = if cfg.horizons.is_empty() {
            SELFTEST_HORIZONS.to_vec()
        } else {
            cfg.horizons.clone()
        };
        let points = sqrt_fixture(&horizons);
        let fit = fit_exponent(&points);
        let (csv_path, mut csv) = create(&dir, "sweep_table.csv")?;
        writeln!(csv, "T,regret")?;
        for (t, r) in &points {
            writeln!(csv, "{t},{r:.16e}")?;
        }
        csv.flush()?;
        let json_path = write_json(
            &dir,
            "sweep_report.json",
            &FixtureReport {
                fixture: "T^0.5",
                horizons,
                fitted_exponent: fit,
            },
        )?;
        announce(&[csv_path, json_path]);
        if let Some(f) = fit {
            println!("beta = {:.6}", f.beta);
        }
        return Ok(());
    }

    let instance = cfg.require_instance()?;
    let spec = cfg.require_learner()?;
    if cfg.horizons.is_empty() {
        return Err(CliError::Config("missing key `horizons`".into()));
    }
    let law = instance.build()?;
    let report = run_sweep(
        spec,
        &law,
        &instance.label(),
        &cfg.horizons,
        cfg.replications,
        cfg.seed,
    )?;
    let (csv_path, mut csv) = create(&dir, "sweep_table.csv")?;
    report.write_table_csv(&mut csv)?;
    csv.flush()?;
    let json_path = write_json(&dir, "sweep_report.json", &report)?;
    announce(&[csv_path, json_path]);
    if let Some(f) = report.fitted_exponent {
        println!("beta = {:.6}", f.beta);
    }
    Ok(())
}

/// Prices of the oracle table: the uniform grid, the breakpoints, and the
/// best fixed price, each tagged, sorted by price.
fn oracle_rows(law: &MixtureDistribution, grid: usize) -> Result<Vec<(f64, f64, &'static str)>, CliError> {
    if grid < 2 {
        return Err(CliError::Config("`oracle.grid` must be at least 2".into()));
    }
    let mut rows: Vec<(f64, &'static str)> = (0..grid)
        .map(|i| (i as f64 / (grid - 1) as f64, "grid"))
        .collect();
    rows.extend(law.breakpoints().iter().map(|&b| (b, "breakpoint")));
    let (best, _) = law.best_fixed_price();
    rows.push((best.get(), "best"));
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.iter()
        .map(|&(p, kind)| Ok((p, law.expected_gft(Price::new(p)?), kind)))
        .collect()
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let instance = cfg.require_instance()?;
    let law = instance.build()?;
    let rows = oracle_rows(&law, cfg.oracle.grid)?;
    let (path, mut out) = create(&cfg.out_dir(), "oracle.csv")?;
    writeln!(out, "p,expected_gft,kind")?;
    for (p, v, kind) in rows {
        writeln!(out, "{p:.16e},{v:.16e},{kind}")?;
    }
    out.flush()?;
    announce(&[path]);
    Ok(())
}

#[derive(Serialize)]
struct IndistReport {
    grid: usize,
    perturbed: bool,
    max_deviation: f64,
    /// Price attaining the deviation.
    argmax_price: f64,
    tolerance: f64,
    verdict: &'static str,
    best_price_f: f64,
    best_price_g: f64,
}

const INDIST_TOLERANCE: f64 = 1e-12;

/// Largest absolute difference between the four feedback probabilities of
/// `a` and `b` over `grid` evenly spaced prices in `[0, 1]`.
fn feedback_gap(a: &MixtureDistribution, b: &MixtureDistribution, grid: usize) -> Result<(f64, f64), CliError> {
    let mut worst = (0.0, 0.0);
    for i in 0..grid {
        let p = Price::new(i as f64 / (grid - 1) as f64)?;
        let (la, lb) = (a.feedback_law(p), b.feedback_law(p));
        let d = la.iter().zip(&lb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if d > worst.0 {
            worst = (d, p.get());
        }
    }
    Ok(worst)
}

pub fn indist(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let grid = cfg.indist.grid;
    if grid < 2 {
        return Err(CliError::Config("`indist.grid` must be at least 2".into()));
    }
    let f = if cfg.indist.perturb {
        bd_linear_shifted(0, 1.0 / 16.0)?
    } else {
        bd_linear_instance(0.0)?
    };
    let g = bd_linear_instance(1.0)?;
    let (dev, at) = feedback_gap(&f, &g, grid)?;
    let report = IndistReport {
        grid,
        perturbed: cfg.indist.perturb,
        max_deviation: dev,
        argmax_price: at,
        tolerance: INDIST_TOLERANCE,
        verdict: if dev <= INDIST_TOLERANCE {
            "indistinguishable"
        } else {
            "distinguishable"
        },
        best_price_f: f.best_fixed_price().0.get(),
        best_price_g: g.best_fixed_price().0.get(),
    };
    let path = write_json(&cfg.out_dir(), "indist_report.json", &report)?;
    announce(&[path]);
    println!("{} (max deviation {:.3e})", report.verdict, dev);
    Ok(())
}

#[derive(Serialize)]
struct AdversaryOutput<'a> {
    learner_spec: &'a LearnerSpec,
    seed: u64,
    #[serde(flatten)]
    report: AdversaryReport,
    meets_bound: bool,
}

pub fn adversary(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.require_learner()?;
    let horizon = cfg.require_horizon()?;
    let factory = || spec.build_generic::<ExactPrice>();
    let (traj, report) = run_adversarial_episode(
        factory,
        horizon,
        cfg.adversary.epsilon,
        cfg.adversary.replicas,
        cfg.seed,
    )?;
    let dir = cfg.out_dir();
    let (csv_path, mut csv) = create(&dir, "adversary_trajectory.csv")?;
    traj.write_csv(&mut csv)?;
    csv.flush()?;
    let meets_bound = report.regret >= report.bound;
    let json_path = write_json(
        &dir,
        "adversary_report.json",
        &AdversaryOutput {
            learner_spec: spec,
            seed: cfg.seed,
            report,
            meets_bound,
        },
    )?;
    announce(&[csv_path, json_path]);
    Ok(())
}

type Check = (&'static str, fn() -> Result<String, String>);

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn check_oracle() -> Result<String, String> {
    let law = MixtureDistribution::uniform();
    let rows = oracle_rows(&law, 5).map_err(|e| e.to_string())?;
    for (p, v, kind) in rows {
        if kind == "grid" && !close(v, p * (1.0 - p) / 2.0, 1e-15) {
            return Err(format!("uniform gft at {p} is {v}"));
        }
    }
    let (p, v) = bd_linear_instance(0.0).map_err(|e| e.to_string())?.best_fixed_price();
    if !(close(p.get(), 0.375, 1e-12) && close(v, 1.0 / 3.0, 1e-12)) {
        return Err(format!("bd_linear(0) optimum ({p:?}, {v})"));
    }
    Ok("uniform curve p(1-p)/2 on 5 prices; bd_linear(0) optimum 1/3 at 3/8".into())
}

fn check_indist() -> Result<String, String> {
    let g = bd_linear_instance(1.0).map_err(|e| e.to_string())?;
    let f = bd_linear_instance(0.0).map_err(|e| e.to_string())?;
    let h = bd_linear_shifted(0, 1.0 / 16.0).map_err(|e| e.to_string())?;
    let (same, _) = feedback_gap(&f, &g, 1001).map_err(|e| e.to_string())?;
    let (diff, _) = feedback_gap(&h, &g, 1001).map_err(|e| e.to_string())?;
    if same > INDIST_TOLERANCE || diff <= 0.01 {
        return Err(format!("deviation {same:.3e}, control {diff:.3e}"));
    }
    Ok(format!("deviation {same:.1e}, perturbed control {diff:.4}"))
}

fn check_fit() -> Result<String, String> {
    let fit = fit_exponent(&sqrt_fixture(&SELFTEST_HORIZONS)).ok_or("no fit")?;
    if !close(fit.beta, 0.5, 1e-12) {
        return Err(format!("beta {}", fit.beta));
    }
    Ok(format!("beta {:.12}", fit.beta))
}

fn check_sb_configure() -> Result<String, String> {
    let a = sb_configure(1.0, 1_000_000, Some(0.1), BanditChoice::default()).map_err(|e| e.to_string())?;
    let b = sb_configure(8.0, 1_000_000, Some(0.5), BanditChoice::default()).map_err(|e| e.to_string())?;
    if (a.arms, a.scouting_rounds, b.arms, b.scouting_rounds) != (10, 300, 8, 7) {
        return Err(format!(
            "K, T0 = ({}, {}) and ({}, {})",
            a.arms, a.scouting_rounds, b.arms, b.scouting_rounds
        ));
    }
    Ok("K, T0 = (10, 300) and (8, 7)".into())
}

fn check_adversary() -> Result<String, String> {
    let spec = LearnerSpec::Fixed { price: 0.9 };
    let (_, r) = run_adversarial_episode(|| spec.build_generic::<ExactPrice>(), 200, 0.03, None, 0)
        .map_err(|e| e.to_string())?;
    if r.learner_gft != 0.0 || r.regret < r.bound {
        return Err(format!("gft {} regret {} bound {}", r.learner_gft, r.regret, r.bound));
    }
    let spec = LearnerSpec::Fbp { initial_price: 0.0 };
    let (_, r) = run_adversarial_episode(|| spec.build_generic::<ExactPrice>(), 200, 0.03, None, 0)
        .map_err(|e| e.to_string())?;
    if r.regret < r.bound {
        return Err(format!("fbp regret {} below bound {}", r.regret, r.bound));
    }
    Ok(format!("fbp regret {:.2} >= bound {:.2} at T = 200", r.regret, r.bound))
}

fn check_exact_price() -> Result<String, String> {
    let p = ExactPrice::from_f64(0.25);
    let q = ExactPrice::from_f64(0.75);
    if !(p.le(&q) && !q.le(&p)) {
        return Err("float prices misordered".into());
    }
    Ok("float prices ordered".into())
}

const CHECKS: [Check; 6] = [
    ("oracle", check_oracle),
    ("indistinguishability", check_indist),
    ("exponent fit", check_fit),
    ("sb configuration", check_sb_configure),
    ("adversary", check_adversary),
    ("exact prices", check_exact_price),
];

pub fn selftest(_cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (name, check) in CHECKS {
        match check() {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_checks_pass() {
        for (name, check) in CHECKS {
            assert!(check().is_ok(), "{name}: {:?}", check());
        }
    }

    #[test]
    fn oracle_rows_are_sorted_and_tagged() {
        let law = bd_linear_instance(0.0).unwrap();
        let rows = oracle_rows(&law, 5).unwrap();
        assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0));
        assert_eq!(rows.iter().filter(|r| r.2 == "grid").count(), 5);
        assert_eq!(rows.iter().filter(|r| r.2 == "best").count(), 1);
        assert!(oracle_rows(&law, 1).is_err());
    }
}
