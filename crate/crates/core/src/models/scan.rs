//! Positivity map of the angle-switching policy over (kappa, initial angle).

use rayon::prelude::*;

use crate::linalg::PureState;
use crate::master::TimeGrid;
use crate::unravel::{
    probe_positivity, run_ensemble, EnsembleOptions, Method, PhiPolicy, PolicyContext, Sampling, UnravelError,
};

use super::phase_covariant::{phase_covariant_model, PhaseCovariantRates, ThetaSwitchPolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct KappaScanConfig {
    pub theta_bar: f64,
    pub epsilon: f64,
    pub kappas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Trajectories simulated per cell on top of the exhaustive probe.
    pub n_traj: usize,
    pub grid: TimeGrid,
    pub base_seed: u64,
    pub workers: usize,
}

impl KappaScanConfig {
    /// kappa from 1 to 1.5 in steps of 0.05, theta over [0, pi/2] in steps of pi/60.
    pub fn default_grid(theta_bar: f64) -> Self {
        Self {
            theta_bar,
            epsilon: 0.0,
            kappas: (0..=10).map(|k| 1.0 + 0.05 * k as f64).collect(),
            thetas: theta_grid(30),
            n_traj: 8,
            grid: TimeGrid { t_max: 10.0, dt: 1e-3, output_stride: 1000 },
            base_seed: 0,
            workers: 1,
        }
    }
}

/// `n + 1` angles evenly covering [0, pi/2].
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KappaScanResult {
    pub kappa_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// positive[i][j] for kappa_grid[i], theta_grid[j].
    pub positive: Vec<Vec<bool>>,
    /// Largest kappa such that it and every smaller scanned kappa are
    /// positive for all angles.
    pub kappa_max_estimate: Option<f64>,
    /// Next scanned kappa above the estimate, if any.
    pub kappa_first_failure: Option<f64>,
    /// Whether positivity never reappears once lost, for every angle.
    pub monotone: bool,
}

impl KappaScanResult {
    pub fn all_positive(&self, kappa_index: usize) -> bool {
        self.positive[kappa_index].iter().all(|&p| p)
    }
}

/// Decides positivity of one cell: the exhaustive probe of the no-jump
/// branch and the labels, plus `n_traj` sampled trajectories.
pub fn scan_cell(config: &KappaScanConfig, kappa: f64, theta: f64, seed: u64) -> Result<bool, UnravelError> {
    let model = phase_covariant_model(PhaseCovariantRates::oscillating_dephasing(kappa), None);
    let policy = PhiPolicy::builtin(ThetaSwitchPolicy::default());
    let ctx = PolicyContext {
        initial_theta: theta,
        theta_bar: config.theta_bar,
        epsilon_shrink: config.epsilon,
        ..Default::default()
    };
    let psi0 = PureState::from_angles(theta, 0.0);
    match probe_positivity(&model, &policy, &ctx, &psi0, &config.grid) {
        Ok(_) => {}
        Err(UnravelError::PositivityViolation { .. }) => return Ok(false),
        Err(e) => return Err(e),
    }
    if config.n_traj == 0 {
        return Ok(true);
    }
    let options = EnsembleOptions {
        n_traj: config.n_traj,
        base_seed: seed,
        workers: 1,
        sampling: Sampling::Bernoulli,
        ..Default::default()
    };
    match run_ensemble(&model, Method::PsiRoqj, &policy, &ctx, &psi0, &config.grid, &options) {
        Ok(_) => Ok(true),
        Err(UnravelError::PositivityViolation { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

pub fn kappa_scan(config: &KappaScanConfig) -> Result<KappaScanResult, UnravelError> {
    config.grid.validate()?;
    let n_theta = config.thetas.len();
    let cells: Vec<(usize, usize)> =
        (0..config.kappas.len()).flat_map(|i| (0..n_theta).map(move |j| (i, j))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| UnravelError::PolicyError(format!("cannot start worker pool: {e}")))?;
    let flags: Vec<Result<bool, UnravelError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let seed = config.base_seed ^ (((i * n_theta + j) as u64) << 32);
                scan_cell(config, config.kappas[i], config.thetas[j], seed)
            })
            .collect()
    });
    let mut positive = vec![vec![false; n_theta]; config.kappas.len()];
    for (&(i, j), flag) in cells.iter().zip(flags) {
        positive[i][j] = flag?;
    }
    let mut order: Vec<usize> = (0..config.kappas.len()).collect();
    order.sort_by(|&a, &b| config.kappas[a].total_cmp(&config.kappas[b]));
    let mut kappa_max_estimate = None;
    let mut kappa_first_failure = None;
    for &i in &order {
        if positive[i].iter().all(|&p| p) {
            kappa_max_estimate = Some(config.kappas[i]);
        } else {
            kappa_first_failure = Some(config.kappas[i]);
            break;
        }
    }
    let monotone = (0..n_theta).all(|j| {
        order.windows(2).all(|w| positive[w[0]][j] || !positive[w[1]][j])
    });
    Ok(KappaScanResult {
        kappa_grid: config.kappas.clone(),
        theta_grid: config.thetas.clone(),
        positive,
        kappa_max_estimate,
        kappa_first_failure,
        monotone,
    })
}
