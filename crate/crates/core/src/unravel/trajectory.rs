use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{vec_norm_sqr, PureState};
use crate::master::{MasterEquationModel, Snapshot, TimeGrid};
use crate::numeric::NumericPolicy;

use super::policy::{PhiPolicy, PolicyContext};
use super::rate_operator::check_state;
use super::step::{pick_channel, Plan, Slot, Stepper};
use super::{Method, Sampling, UnravelError};

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// Jump through channel `channel`; `label` names the landing state when
    /// it belongs to the effective ensemble.
    Jump { channel: usize, label: Option<String> },
    /// The no-jump evolution reached a label state.
    LabelSnap { label: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEvent {
    /// Grid time at which the post-event state holds.
    pub t: f64,
    pub kind: EventKind,
    pub post_state: PureState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub events: Vec<TrajectoryEvent>,
    pub times: Vec<f64>,
    pub sampled_states: Vec<PureState>,
    /// Label of each sampled state, `None` on the deterministic branch.
    pub sampled_labels: Vec<Option<String>>,
}

impl TrajectoryRecord {
    pub fn jump_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Jump { .. })).count()
    }
}

pub(crate) fn snapshot_table(model: &MasterEquationModel, grid: &TimeGrid) -> Vec<Snapshot> {
    (0..=grid.n_steps() + 1).map(|k| model.snapshot(grid.time(k))).collect()
}

/// Deterministic RNG stream of one trajectory.
pub(crate) fn trajectory_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed ^ index)
}

pub(crate) struct Engine<'a> {
    pub stepper: Stepper<'a>,
    pub snaps: &'a [Snapshot],
    pub grid: TimeGrid,
    pub outputs: &'a [usize],
    pub sampling: Sampling,
}

pub(crate) struct Sample<'s> {
    pub out_index: usize,
    pub state: &'s PureState,
    pub label: Option<usize>,
    pub jumps: u64,
}

impl<'a> Engine<'a> {
    pub fn initial_slot(&self, psi0: &PureState) -> Slot {
        let psi = psi0.clone().gauge_fixed();
        match self.stepper.matching_label(&psi) {
            Some(j) => Slot::Label(j),
            None => Slot::Det(psi),
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        psi0: &PureState,
        ctx: &PolicyContext,
        rng: &mut R,
        mut on_sample: impl FnMut(Sample<'_>),
        mut on_event: impl FnMut(TrajectoryEvent),
    ) -> Result<u64, UnravelError> {
        check_state(self.stepper.model, psi0)?;
        let mut ctx = ctx.clone();
        let mut slot = self.initial_slot(psi0);
        let n = self.grid.n_steps();
        let dt = self.grid.dt;
        let mut next_out = 0;
        let mut jumps = 0u64;
        let mut log_survival = 0.0f64;
        let mut log_threshold = match self.sampling {
            Sampling::WaitingTime => (1.0 - rng.random::<f64>()).ln(),
            Sampling::Bernoulli => 0.0,
        };
        for step in 0..=n {
            if next_out < self.outputs.len() && self.outputs[next_out] == step {
                let label = match slot {
                    Slot::Label(j) => Some(j),
                    Slot::Det(_) => None,
                };
                on_sample(Sample { out_index: next_out, state: self.stepper.state(&slot), label, jumps });
                next_out += 1;
            }
            if step == n {
                break;
            }
            let snap = &self.snaps[step];
            let plan = self.stepper.plan(snap, &self.snaps[step + 1], &slot, &ctx)?;
            let choice = match self.sampling {
                Sampling::Bernoulli => self.stepper.bernoulli(&plan, snap.t, rng.random())?,
                Sampling::WaitingTime => {
                    let total = plan.total_rate();
                    if total * dt > 1.0 {
                        return Err(UnravelError::ProbabilityOverflow { t: snap.t, total: total * dt });
                    }
                    let survival = match &plan.drift {
                        Some(d) => vec_norm_sqr(d),
                        None => 1.0 - total * dt,
                    };
                    log_survival += survival.max(f64::MIN_POSITIVE).ln();
                    if log_survival <= log_threshold && total > 0.0 {
                        log_survival = 0.0;
                        log_threshold = (1.0 - rng.random::<f64>()).ln();
                        Some(pick_channel(&plan.rates, rng.random::<f64>() * total))
                    } else {
                        None
                    }
                }
            };
            let t_next = self.grid.time(step + 1);
            slot = match choice {
                Some(j) => {
                    jumps += 1;
                    ctx.has_jumped = true;
                    let landed = self.stepper.land(&plan.targets[j]);
                    on_event(TrajectoryEvent {
                        t: t_next,
                        kind: EventKind::Jump { channel: j, label: self.label_name(&landed) },
                        post_state: self.stepper.state(&landed).clone(),
                    });
                    landed
                }
                None => self.drift(plan, slot, t_next, &mut on_event)?,
            };
        }
        Ok(jumps)
    }

    fn drift(
        &self,
        plan: Plan,
        slot: Slot,
        t_next: f64,
        on_event: &mut impl FnMut(TrajectoryEvent),
    ) -> Result<Slot, UnravelError> {
        let Some(d) = plan.drift else { return Ok(slot) };
        let next = self.stepper.advance(&d)?;
        if let Slot::Label(j) = next {
            on_event(TrajectoryEvent {
                t: t_next,
                kind: EventKind::LabelSnap { label: self.stepper.labels[j].name.clone() },
                post_state: self.stepper.labels[j].state.clone(),
            });
        }
        Ok(next)
    }

    fn label_name(&self, slot: &Slot) -> Option<String> {
        match slot {
            Slot::Label(j) => Some(self.stepper.labels[*j].name.clone()),
            Slot::Det(_) => None,
        }
    }

    /// Follows the no-jump branch, optionally checking the label rates at
    /// every step as well.
    pub fn follow_deterministic(
        &self,
        psi0: &PureState,
        ctx: &PolicyContext,
        check_labels: bool,
    ) -> Result<DeterministicPath, UnravelError> {
        check_state(self.stepper.model, psi0)?;
        let n = self.grid.n_steps();
        let mut slot = self.initial_slot(psi0);
        let mut path = DeterministicPath { times: Vec::new(), states: Vec::new(), reached_label: None };
        let mut next_out = 0;
        if let Slot::Label(j) = slot {
            path.reached_label = Some((0.0, self.stepper.labels[j].name.clone()));
        }
        for step in 0..=n {
            if path.reached_label.is_none() && next_out < self.outputs.len() && self.outputs[next_out] == step {
                path.times.push(self.grid.time(step));
                path.states.push(self.stepper.state(&slot).clone());
                next_out += 1;
            }
            if step == n {
                break;
            }
            let snap = &self.snaps[step];
            let next_snap = &self.snaps[step + 1];
            if check_labels {
                for j in 0..self.stepper.labels.len() {
                    self.stepper.plan(snap, next_snap, &Slot::Label(j), ctx)?;
                }
            }
            if path.reached_label.is_some() {
                if check_labels {
                    continue;
                }
                break;
            }
            let plan = self.stepper.plan(snap, next_snap, &slot, ctx)?;
            if let Some(d) = plan.drift {
                slot = self.stepper.advance(&d)?;
                if let Slot::Label(j) = slot {
                    path.reached_label = Some((self.grid.time(step + 1), self.stepper.labels[j].name.clone()));
                }
            }
        }
        Ok(path)
    }
}

/// The no-jump branch on the output grid, cut where it merges into a label.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicPath {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    pub reached_label: Option<(f64, String)>,
}

fn with_engine<T>(
    model: &MasterEquationModel,
    method: Method,
    policy: &PhiPolicy,
    grid: &TimeGrid,
    sampling: Sampling,
    tol: NumericPolicy,
    f: impl FnOnce(&Engine<'_>) -> Result<T, UnravelError>,
) -> Result<T, UnravelError> {
    grid.validate()?;
    let stepper = Stepper::new(model, method, policy, grid.dt)?.with_tolerances(tol);
    let snaps = snapshot_table(model, grid);
    let outputs = grid.output_steps();
    let engine = Engine { stepper, snaps: &snaps, grid: *grid, outputs: &outputs, sampling };
    f(&engine)
}

/// Runs one trajectory; a deterministic function of its arguments.
pub fn run_trajectory(
    model: &MasterEquationModel,
    method: Method,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    psi0: &PureState,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord, UnravelError> {
    with_engine(model, method, policy, grid, Sampling::Bernoulli, NumericPolicy::default(), |engine| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut record = TrajectoryRecord {
            seed,
            events: Vec::new(),
            times: grid.output_times(),
            sampled_states: Vec::new(),
            sampled_labels: Vec::new(),
        };
        let labels = engine.stepper.labels;
        let mut events = Vec::new();
        engine.run(
            psi0,
            ctx,
            &mut rng,
            |s| {
                record.sampled_states.push(s.state.clone());
                record.sampled_labels.push(s.label.map(|j| labels[j].name.clone()));
            },
            |e| events.push(e),
        )?;
        record.events = events;
        Ok(record)
    })
}

/// No-jump evolution of psi0 under the method and policy.
pub fn deterministic_path(
    model: &MasterEquationModel,
    method: Method,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    psi0: &PureState,
    grid: &TimeGrid,
) -> Result<DeterministicPath, UnravelError> {
    with_engine(model, method, policy, grid, Sampling::Bernoulli, NumericPolicy::default(), |engine| {
        engine.follow_deterministic(psi0, ctx, false)
    })
}

/// Checks every state a trajectory from psi0 can visit: the no-jump branch
/// and, at each step, every declared label. For policies with a closed
/// effective ensemble this decides positivity of the whole unraveling.
pub fn probe_positivity(
    model: &MasterEquationModel,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    psi0: &PureState,
    grid: &TimeGrid,
) -> Result<DeterministicPath, UnravelError> {
    with_engine(model, Method::PsiRoqj, policy, grid, Sampling::Bernoulli, NumericPolicy::default(), |engine| {
        engine.follow_deterministic(psi0, ctx, true)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaitingTimeJump {
    pub t: f64,
    pub channel: usize,
    pub target: PureState,
}

/// Samples the next jump after t0 by the norm-decay method: the
/// unnormalized no-jump state is propagated until its squared norm drops
/// below a uniform draw. Returns `None` if no jump occurs before `horizon`.
#[allow(clippy::too_many_arguments)]
pub fn waiting_time_jump_sampler<R: Rng + ?Sized>(
    model: &MasterEquationModel,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    psi: &PureState,
    t0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Option<WaitingTimeJump>, UnravelError> {
    check_state(model, psi)?;
    let stepper = Stepper::new(model, Method::PsiRoqj, policy, dt)?;
    let threshold = 1.0 - rng.random::<f64>();
    let mut slot = match stepper.matching_label(psi) {
        Some(j) if ctx.has_jumped => Slot::Label(j),
        _ => Slot::Det(psi.clone().gauge_fixed()),
    };
    let mut norm2 = 1.0f64;
    let n = ((horizon - t0) / dt).round().max(0.0) as usize;
    let mut snap = model.snapshot(t0);
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let next = model.snapshot(t + dt);
        let plan = stepper.plan(&snap, &next, &slot, ctx)?;
        let total = plan.total_rate();
        let decay = match &plan.drift {
            Some(d) => vec_norm_sqr(d),
            None => 1.0 - total * dt,
        };
        norm2 *= decay;
        if norm2 <= threshold && total > 0.0 {
            let j = pick_channel(&plan.rates, rng.random::<f64>() * total);
            let landed = stepper.land(&plan.targets[j]);
            return Ok(Some(WaitingTimeJump { t: t + dt, channel: j, target: stepper.state(&landed).clone() }));
        }
        if let Some(d) = plan.drift {
            slot = stepper.advance(&d)?;
        }
        snap = next;
    }
    Ok(None)
}
