use std::path::PathBuf;
use std::str::FromStr;

use crate::divisibility::necessary_conditions_report;
use crate::linalg::{projector, PureState};
use crate::master::{exact_solve, ExactSolution, MasterEquationModel};
use crate::models::{kappa_scan, theta_grid, KappaScanConfig};
use crate::unravel::{deterministic_path, run_ensemble, EnsembleResult, Method, UnravelError};

use super::config::{ModelConfig, RunConfig};
use super::output::{
    fmt_f64, fmt_opt, sha256_hex, write_outputs, Manifest, Table, DOMAIN_HEADER, EXACT_HEADER, PSI_DET_HEADER,
    REALIZATIONS_HEADER, SCAN_HEADER, STATS_HEADER, SWEEP_HEADER, VIOLATION_HEADER,
};
use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Exact,
    Unravel,
    Scan,
    Domain,
    LambdaSweep,
}

impl Subcommand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Exact => "exact",
            Subcommand::Unravel => "unravel",
            Subcommand::Scan => "scan",
            Subcommand::Domain => "domain",
            Subcommand::LambdaSweep => "lambda-sweep",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Subcommand::Exact),
            "unravel" => Ok(Subcommand::Unravel),
            "scan" => Ok(Subcommand::Scan),
            "domain" => Ok(Subcommand::Domain),
            "lambda-sweep" => Ok(Subcommand::LambdaSweep),
            other => Err(format!("unknown subcommand `{other}`")),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub method: Option<Method>,
}

impl Overrides {
    pub fn apply(&self, config: &RunConfig) -> Result<RunConfig, HarnessError> {
        let mut c = config.clone();
        if let Some(out) = &self.out {
            c.outputs = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            c.ensemble.base_seed = seed;
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(HarnessError::config("workers", "must be at least 1"));
            }
            c.ensemble.workers = w;
        }
        if let Some(m) = self.method {
            c.method = m;
        }
        Ok(c)
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// One-line human-readable outcome.
    pub summary: String,
}

/// Tables produced by a run, or the diagnostic table and the error when a
/// negative jump rate stopped it.
enum Computed {
    Done { tables: Vec<Table>, summary: String },
    Violation { table: Table, error: HarnessError },
}

/// Runs `cmd` and writes its CSVs and manifest. A positivity violation is
/// written as violation.csv before the error is returned.
pub fn execute(
    cmd: Subcommand,
    config: &RunConfig,
    config_bytes: &[u8],
    overrides: &Overrides,
) -> Result<RunReport, HarnessError> {
    let config = overrides.apply(config)?;
    let dir = config.outputs.clone().ok_or_else(|| HarnessError::missing(".", "outputs"))?;
    let manifest = Manifest {
        config_sha256: sha256_hex(config_bytes),
        seed: config.ensemble.base_seed,
        workers: config.ensemble.workers,
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cmd.as_str().to_string(),
        files: Vec::new(),
    };
    match compute_with_diagnostics(cmd, &config)? {
        Computed::Done { tables, summary } => {
            let files = write_outputs(&dir, &tables, manifest)?;
            Ok(RunReport { dir, files, summary })
        }
        Computed::Violation { table, error } => {
            write_outputs(&dir, &[table], manifest)?;
            Err(error)
        }
    }
}

/// Runs `cmd` in memory.
pub fn compute(cmd: Subcommand, config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    match compute_with_diagnostics(cmd, config)? {
        Computed::Done { tables, summary } => Ok((tables, summary)),
        Computed::Violation { error, .. } => Err(error),
    }
}

fn compute_with_diagnostics(cmd: Subcommand, config: &RunConfig) -> Result<Computed, HarnessError> {
    let result = match cmd {
        Subcommand::Exact => exact_tables(config),
        Subcommand::Unravel => unravel_tables(config),
        Subcommand::Scan => scan_tables(config),
        Subcommand::Domain => domain_tables(config),
        Subcommand::LambdaSweep => sweep_tables(config),
    };
    match result {
        Ok((tables, summary)) => Ok(Computed::Done { tables, summary }),
        Err(HarnessError::Unravel(e @ UnravelError::PositivityViolation { .. })) => {
            let UnravelError::PositivityViolation { t, bloch, min_eigenvalue, .. } = &e else { unreachable!() };
            let mut table = Table::new("violation.csv", &VIOLATION_HEADER);
            let (x, y, z) = bloch.map(|b| (Some(b.x), Some(b.y), Some(b.z))).unwrap_or((None, None, None));
            table.push(vec![fmt_f64(*t), fmt_opt(x), fmt_opt(y), fmt_opt(z), fmt_f64(*min_eigenvalue)]);
            Ok(Computed::Violation { table, error: HarnessError::Unravel(e) })
        }
        Err(e) => Err(e),
    }
}

fn setup(config: &RunConfig) -> Result<(MasterEquationModel, PureState), HarnessError> {
    let model = config.model.build()?;
    let psi0 = config.initial_state(model.dim())?;
    Ok((model, psi0))
}

fn exact_for(model: &MasterEquationModel, psi0: &PureState, config: &RunConfig) -> Result<ExactSolution, HarnessError> {
    let rho0 = projector(psi0)?;
    Ok(exact_solve(model, &rho0, &config.grid)?)
}

fn require_qubit(model: &MasterEquationModel) -> Result<(), HarnessError> {
    if model.dim() != 2 {
        return Err(HarnessError::config("model", "CSV output is defined for qubit models"));
    }
    Ok(())
}

fn exact_tables(config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    let (model, psi0) = setup(config)?;
    require_qubit(&model)?;
    let exact = exact_for(&model, &psi0, config)?;
    let mut table = Table::new("exact.csv", &EXACT_HEADER);
    for (t, rho) in exact.times.iter().zip(&exact.states) {
        let b = rho.to_bloch()?;
        table.push(vec![fmt_f64(*t), fmt_f64(b.x), fmt_f64(b.y), fmt_f64(b.z)]);
    }
    let summary = format!("exact solution at {} output times", exact.times.len());
    Ok((vec![table], summary))
}

fn ensemble_for(
    model: &MasterEquationModel,
    psi0: &PureState,
    config: &RunConfig,
    mixing_lambda: Option<f64>,
) -> Result<EnsembleResult, HarnessError> {
    let policy = config.policy.build()?;
    let mut ctx = config.policy.context(psi0);
    if let Some(l) = mixing_lambda {
        ctx.mixing_lambda = l;
    }
    let options = config.ensemble.options(config.numeric);
    Ok(run_ensemble(model, config.method, &policy, &ctx, psi0, &config.grid, &options)?)
}

fn unravel_tables(config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    let (model, psi0) = setup(config)?;
    require_qubit(&model)?;
    let exact = exact_for(&model, &psi0, config)?;
    let result = ensemble_for(&model, &psi0, config, None)?;
    let mut stats = Table::new("stats.csv", &STATS_HEADER);
    for (k, t) in result.times.iter().enumerate() {
        let ex = exact.states[k].to_bloch()?;
        let est = result.bloch_estimate[k];
        let err = result.stderr[k];
        let occ = result.occupations.as_ref().map(|o| &o[k]);
        let occ_at = |i: usize| occ.and_then(|o| if i + 1 < o.len() { Some(o[i]) } else { None });
        let p_det = occ.map(|o| o[o.len() - 1]);
        stats.push(vec![
            fmt_f64(*t),
            fmt_f64(ex.x),
            fmt_f64(ex.y),
            fmt_f64(ex.z),
            fmt_f64(est.x),
            fmt_f64(est.y),
            fmt_f64(est.z),
            fmt_f64(err[0]),
            fmt_f64(err[1]),
            fmt_f64(err[2]),
            fmt_opt(occ_at(0)),
            fmt_opt(occ_at(1)),
            fmt_opt(p_det),
            fmt_opt(result.entropy.as_ref().map(|e| e[k])),
            result.cumulative_jumps[k].to_string(),
        ]);
    }
    let mut tables = vec![stats];
    if !result.realizations.is_empty() {
        let mut table = Table::new("realizations.csv", &REALIZATIONS_HEADER);
        for (i, samples) in result.realizations.iter().enumerate() {
            for s in samples {
                table.push(vec![
                    fmt_f64(s.t),
                    i.to_string(),
                    fmt_f64(s.bloch.x),
                    fmt_f64(s.bloch.y),
                    fmt_f64(s.bloch.z),
                    s.label.clone().unwrap_or_else(|| "det".into()),
                ]);
            }
        }
        tables.push(table);
    }
    let policy = config.policy.build()?;
    let det = deterministic_path(&model, config.method, &policy, &config.policy.context(&psi0), &psi0, &config.grid)?;
    let mut table = Table::new("psi_det.csv", &PSI_DET_HEADER);
    for (t, s) in det.times.iter().zip(&det.states) {
        let b = s.bloch()?;
        table.push(vec![fmt_f64(*t), fmt_f64(b.x), fmt_f64(b.y), fmt_f64(b.z)]);
    }
    tables.push(table);
    let summary = format!(
        "{} trajectories, {} jumps, {:.3} s",
        result.n_traj, result.jump_count_total, result.wall_time
    );
    Ok((tables, summary))
}

fn scan_tables(config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    let section = config.scan.as_ref().ok_or_else(|| HarnessError::missing(".", "scan"))?;
    if !matches!(config.model, ModelConfig::OscillatingDephasing { .. }) {
        return Err(HarnessError::config("model.name", "the kappa scan runs on `oscillating_dephasing`"));
    }
    if config.policy.name != "theta_switch" {
        return Err(HarnessError::config("policy.name", "the kappa scan uses the `theta_switch` policy"));
    }
    if config.method != Method::PsiRoqj {
        return Err(HarnessError::config("method", "the kappa scan uses `psi_roqj`"));
    }
    let thetas = section.thetas.clone().unwrap_or_else(|| theta_grid(section.n_theta.max(1)));
    let scan = KappaScanConfig {
        theta_bar: config.policy.parameters.theta_bar,
        epsilon: config.policy.parameters.epsilon,
        kappas: section.kappas.clone(),
        thetas,
        n_traj: section.n_traj,
        grid: config.grid,
        base_seed: config.ensemble.base_seed,
        workers: config.ensemble.workers,
    };
    let result = kappa_scan(&scan)?;
    let mut table = Table::new("scan.csv", &SCAN_HEADER);
    for (i, kappa) in result.kappa_grid.iter().enumerate() {
        for (j, theta) in result.theta_grid.iter().enumerate() {
            table.push(vec![fmt_f64(*kappa), fmt_f64(*theta), result.positive[i][j].to_string()]);
        }
    }
    let summary = format!(
        "kappa_max_estimate = {}, first failure = {}, monotone = {}",
        result.kappa_max_estimate.map_or("none".into(), |k| k.to_string()),
        result.kappa_first_failure.map_or("none".into(), |k| k.to_string()),
        result.monotone
    );
    Ok((vec![table], summary))
}

fn domain_tables(config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    let (model, psi0) = setup(config)?;
    require_qubit(&model)?;
    let exact = exact_for(&model, &psi0, config)?;
    let rows = necessary_conditions_report(&model, &exact, config.domain.samples)?;
    let mut table = Table::new("domain.csv", &DOMAIN_HEADER);
    let mut failing = 0;
    for r in &rows {
        if !r.basis_ok {
            failing += 1;
        }
        table.push(vec![
            fmt_f64(r.t),
            fmt_f64(r.domain_fraction),
            r.basis_ok.to_string(),
            r.decomposable.as_str().to_string(),
        ]);
    }
    let summary = format!("{} times, {} without an orthogonal pair in the domain", rows.len(), failing);
    Ok((vec![table], summary))
}

fn sweep_tables(config: &RunConfig) -> Result<(Vec<Table>, String), HarnessError> {
    let section = config.sweep.as_ref().ok_or_else(|| HarnessError::missing(".", "sweep"))?;
    if section.lambdas.is_empty() {
        return Err(HarnessError::config("sweep.lambdas", "needs at least one value"));
    }
    if let Some(l) = section.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(HarnessError::config("sweep.lambdas", &format!("{l} is outside [0, 1]")));
    }
    let (model, psi0) = setup(config)?;
    let mut table = Table::new("sweep.csv", &SWEEP_HEADER);
    for &lambda in &section.lambdas {
        let result = ensemble_for(&model, &psi0, config, Some(lambda))?;
        let entropy = result.entropy.as_ref().ok_or_else(|| {
            HarnessError::config("policy.name", "the lambda sweep needs a policy with an effective ensemble")
        })?;
        let mean = entropy.iter().sum::<f64>() / entropy.len() as f64;
        table.push(vec![
            fmt_f64(lambda),
            fmt_f64(mean),
            result.jump_count_total.to_string(),
            fmt_f64(result.wall_time),
        ]);
    }
    let summary = format!("{} mixing values", section.lambdas.len());
    Ok((vec![table], summary))
}
