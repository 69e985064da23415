use std::time::Instant;

use rayon::prelude::*;

use crate::linalg::{BlochVector, DensityMatrix, Matrix, PureState};
use crate::master::{MasterEquationModel, TimeGrid};
use crate::numeric::NumericPolicy;

use super::policy::{PhiPolicy, PolicyContext};
use super::step::Stepper;
use super::trajectory::{snapshot_table, trajectory_rng, Engine};
use super::{Method, Sampling, UnravelError};

/// Trajectories per work unit. Fixed so that the floating-point summation
/// order does not depend on the number of workers.
const BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub n_traj: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub sampling: Sampling,
    /// Number of leading trajectories whose sampled states are returned.
    pub record_realizations: usize,
    pub tolerances: NumericPolicy,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            base_seed: 0,
            workers: 1,
            sampling: Sampling::Bernoulli,
            record_realizations: 0,
            tolerances: NumericPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizationSample {
    pub t: f64,
    pub bloch: BlochVector,
    pub label: Option<String>,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub rho_estimate: Vec<DensityMatrix>,
    /// Qubit models only; empty otherwise.
    pub bloch_estimate: Vec<BlochVector>,
    /// Standard error of each Bloch component; qubit models only.
    pub stderr: Vec<[f64; 3]>,
    /// Effective-ensemble labels followed by "det"; empty when the policy
    /// declares no labels.
    pub label_names: Vec<String>,
    /// Per time, the fraction of trajectories on each entry of `label_names`.
    pub occupations: Option<Vec<Vec<f64>>>,
    /// Shannon entropy (bits) of the occupations.
    pub entropy: Option<Vec<f64>>,
    /// Jumps summed over trajectories up to each output time.
    pub cumulative_jumps: Vec<u64>,
    pub jump_count_total: u64,
    pub wall_time: f64,
    pub realizations: Vec<Vec<RealizationSample>>,
}

struct Partial {
    rho: Vec<Matrix>,
    first: Vec<[f64; 3]>,
    second: Vec<[f64; 3]>,
    occupancy: Vec<Vec<u64>>,
    jumps_at: Vec<u64>,
    jumps: u64,
    realizations: Vec<Vec<RealizationSample>>,
}

impl Partial {
    fn new(dim: usize, n_out: usize, n_slots: usize) -> Self {
        Self {
            rho: vec![Matrix::zeros(dim); n_out],
            first: vec![[0.0; 3]; n_out],
            second: vec![[0.0; 3]; n_out],
            occupancy: vec![vec![0; n_slots]; n_out],
            jumps_at: vec![0; n_out],
            jumps: 0,
            realizations: Vec::new(),
        }
    }

    fn merge(&mut self, other: Partial) {
        for (a, b) in self.rho.iter_mut().zip(&other.rho) {
            *a += b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.jumps_at.iter_mut().zip(&other.jumps_at) {
            *a += b;
        }
        self.jumps += other.jumps;
        self.realizations.extend(other.realizations);
    }
}

/// Runs `n_traj` independent trajectories and averages them on the output
/// grid. Trajectory i uses the RNG stream seeded with `base_seed ^ i`; the
/// result is bit-identical for any worker count.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    model: &MasterEquationModel,
    method: Method,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    psi0: &PureState,
    grid: &TimeGrid,
    options: &EnsembleOptions,
) -> Result<EnsembleResult, UnravelError> {
    if options.n_traj == 0 {
        return Err(UnravelError::PolicyError("an ensemble needs at least one trajectory".into()));
    }
    grid.validate()?;
    ctx.validate()?;
    let start = Instant::now();
    let stepper = Stepper::new(model, method, policy, grid.dt)?.with_tolerances(options.tolerances);
    let snaps = snapshot_table(model, grid);
    let outputs = grid.output_steps();
    let times: Vec<f64> = outputs.iter().map(|&k| grid.time(k)).collect();
    let engine = Engine { stepper, snaps: &snaps, grid: *grid, outputs: &outputs, sampling: options.sampling };
    let labels = engine.stepper.labels;
    let n_slots = labels.len() + 1;
    let dim = model.dim();
    let qubit = dim == 2;
    let n_out = outputs.len();

    let run_batch = |b: usize| -> Result<Partial, UnravelError> {
        let mut part = Partial::new(dim, n_out, n_slots);
        let lo = b * BATCH;
        let hi = ((b + 1) * BATCH).min(options.n_traj);
        for i in lo..hi {
            let mut rng = trajectory_rng(options.base_seed, i as u64);
            let record = i < options.record_realizations;
            let mut samples = Vec::new();
            let jumps = engine.run(
                psi0,
                ctx,
                &mut rng,
                |s| {
                    let amps = s.state.amplitudes();
                    part.rho[s.out_index] += &Matrix::outer(amps, amps);
                    if qubit {
                        let r = s.state.bloch().expect("qubit state").components();
                        for k in 0..3 {
                            part.first[s.out_index][k] += r[k];
                            part.second[s.out_index][k] += r[k] * r[k];
                        }
                        if record {
                            samples.push(RealizationSample {
                                t: times[s.out_index],
                                bloch: s.state.bloch().expect("qubit state"),
                                label: s.label.map(|j| labels[j].name.clone()),
                            });
                        }
                    }
                    part.occupancy[s.out_index][s.label.unwrap_or(n_slots - 1)] += 1;
                    part.jumps_at[s.out_index] += s.jumps;
                },
                |_| {},
            )?;
            part.jumps += jumps;
            if record {
                part.realizations.push(samples);
            }
        }
        Ok(part)
    };

    let n_batches = options.n_traj.div_ceil(BATCH);
    let workers = options.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| UnravelError::PolicyError(format!("cannot start worker pool: {e}")))?;
    let wave = (workers * 4).max(1);
    let mut total = Partial::new(dim, n_out, n_slots);
    let mut b0 = 0;
    while b0 < n_batches {
        let b1 = (b0 + wave).min(n_batches);
        let parts: Vec<Result<Partial, UnravelError>> =
            pool.install(|| (b0..b1).into_par_iter().map(run_batch).collect());
        for part in parts {
            total.merge(part?);
        }
        b0 = b1;
    }
    let wall_time = start.elapsed().as_secs_f64();

    let n = options.n_traj as f64;
    let rho_estimate = total
        .rho
        .iter()
        .map(|m| DensityMatrix::from_matrix_unchecked(m.scale_real(1.0 / n)))
        .collect();
    let (bloch_estimate, stderr) = if qubit {
        let means: Vec<BlochVector> =
            total.first.iter().map(|s| BlochVector::new(s[0] / n, s[1] / n, s[2] / n)).collect();
        let errs = total
            .first
            .iter()
            .zip(&total.second)
            .map(|(s1, s2)| {
                let mut e = [0.0; 3];
                if options.n_traj > 1 {
                    for k in 0..3 {
                        let var = ((s2[k] - s1[k] * s1[k] / n) / (n - 1.0)).max(0.0);
                        e[k] = (var / n).sqrt();
                    }
                }
                e
            })
            .collect();
        (means, errs)
    } else {
        (Vec::new(), Vec::new())
    };
    let (label_names, occupations, entropy) = if labels.is_empty() {
        (Vec::new(), None, None)
    } else {
        let mut names: Vec<String> = labels.iter().map(|l| l.name.clone()).collect();
        names.push("det".into());
        let occ: Vec<Vec<f64>> =
            total.occupancy.iter().map(|c| c.iter().map(|&x| x as f64 / n).collect()).collect();
        let ent = occ.iter().map(|p| shannon_entropy(p)).collect();
        (names, Some(occ), Some(ent))
    };
    Ok(EnsembleResult {
        times,
        n_traj: options.n_traj,
        rho_estimate,
        bloch_estimate,
        stderr,
        label_names,
        occupations,
        entropy,
        cumulative_jumps: total.jumps_at,
        jump_count_total: total.jumps,
        wall_time,
        realizations: total.realizations,
    })
}

/// -sum p log2 p, ignoring empty entries.
pub(crate) fn shannon_entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
    h.max(0.0)
}
