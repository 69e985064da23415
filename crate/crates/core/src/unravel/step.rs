use rand::Rng;
use smallvec::SmallVec;

use crate::linalg::{
    orthogonal_complement, restricted_eigen, vec_norm_sqr, Amplitudes, Matrix, PureState, C64, I,
};
use crate::master::{MasterEquationModel, Snapshot};
use crate::numeric::NumericPolicy;

use super::policy::{jump_expectation, jump_of_projector, EffectiveLabel, PhiPolicy, PolicyContext};
use super::rate_operator::{check_state, rate_matrix};
use super::{Method, UnravelError};

/// Where a jump lands.
#[derive(Clone, Debug)]
pub(crate) enum Target {
    State(PureState),
    Label(usize),
}

/// Current position of a trajectory: a free state or a member of the
/// declared effective ensemble.
#[derive(Clone, Debug)]
pub(crate) enum Slot {
    Det(PureState),
    Label(usize),
}

/// Jump channels for one step plus the unnormalized no-jump state.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub rates: SmallVec<[f64; 4]>,
    pub targets: SmallVec<[Target; 4]>,
    /// `None` for labelled states, which do not drift.
    pub drift: Option<Amplitudes>,
}

impl Plan {
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepEvent {
    Jump { channel: usize, rate: f64 },
    Deterministic,
}

pub(crate) struct Stepper<'a> {
    pub model: &'a MasterEquationModel,
    pub method: Method,
    pub policy: &'a PhiPolicy,
    pub labels: &'a [EffectiveLabel],
    pub tol: NumericPolicy,
    pub dt: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        model: &'a MasterEquationModel,
        method: Method,
        policy: &'a PhiPolicy,
        dt: f64,
    ) -> Result<Self, UnravelError> {
        let labels = match method {
            Method::PsiRoqj | Method::RRoqj => policy.labels(),
            _ => &[],
        };
        if method == Method::RRoqj && !matches!(policy, PhiPolicy::Zero | PhiPolicy::COperator(_)) {
            return Err(UnravelError::PolicyError(format!(
                "the r_roqj method takes a state-independent C operator, got policy `{}`",
                policy.name()
            )));
        }
        if matches!(method, Method::PsiRoqj | Method::RRoqj) {
            policy.check_model(model)?;
        }
        Ok(Self { model, method, policy, labels, tol: NumericPolicy::default(), dt })
    }

    pub fn with_tolerances(mut self, tol: NumericPolicy) -> Self {
        self.tol = tol;
        self
    }

    pub fn state<'s>(&'s self, slot: &'s Slot) -> &'s PureState {
        match slot {
            Slot::Det(psi) => psi,
            Slot::Label(j) => &self.labels[*j].state,
        }
    }

    /// Index of the label the state coincides with, if any.
    pub fn matching_label(&self, psi: &PureState) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| 1.0 - l.state.fidelity(psi) < self.tol.label_infidelity)
    }

    pub fn plan(&self, snap: &Snapshot, next: &Snapshot, slot: &Slot, ctx: &PolicyContext) -> Result<Plan, UnravelError> {
        let psi = self.state(slot);
        match self.method {
            Method::Mcwf => self.plan_mcwf(snap, next, psi),
            Method::WRoqj => self.plan_w(snap, psi),
            Method::PsiRoqj | Method::RRoqj => {
                let labelled = matches!(slot, Slot::Label(_));
                let phi = if labelled {
                    PhiPolicy::post_jump_phi(self.model, snap, psi)
                } else {
                    self.policy.evaluate(self.model, snap, psi, ctx)?
                };
                self.plan_psi(snap, psi, &phi, !labelled)
            }
        }
    }

    fn plan_mcwf(&self, snap: &Snapshot, next: &Snapshot, psi: &PureState) -> Result<Plan, UnravelError> {
        for s in [snap, next] {
            if let Some((term, &rate)) = s.rates.iter().enumerate().find(|(_, &r)| r < -1e-12) {
                return Err(UnravelError::NegativeRateError { t: s.t, term, rate });
            }
        }
        let mut rates = SmallVec::new();
        let mut targets = SmallVec::new();
        for (term, &gamma) in self.model.terms().iter().zip(&snap.rates) {
            let lpsi = psi.apply(&term.operator);
            let n2 = vec_norm_sqr(&lpsi);
            if n2 > 0.0 && gamma > 0.0 {
                rates.push(gamma * n2);
                targets.push(Target::State(PureState::normalized(&lpsi)?.gauge_fixed()));
            } else {
                rates.push(0.0);
                targets.push(Target::State(psi.clone()));
            }
        }
        let drift = self.linear_drift(snap, psi, None);
        Ok(Plan { rates, targets, drift: Some(drift) })
    }

    fn plan_w(&self, snap: &Snapshot, psi: &PureState) -> Result<Plan, UnravelError> {
        let jp = jump_of_projector(self.model, snap, psi);
        let complement = orthogonal_complement(psi);
        let pairs = restricted_eigen(&jp, &complement);
        let mut rates: SmallVec<[f64; 4]> = pairs.iter().map(|p| p.value).collect();
        self.check_positive(snap.t, psi, &mut rates)?;
        let targets = pairs.into_iter().map(|p| Target::State(p.vector)).collect();
        // psi - i K psi dt + dt J[P] psi - (dt/2) <J> psi
        let jpsi = psi.apply(&jp);
        let mean = jump_expectation(self.model, snap, psi);
        let extra: Amplitudes = jpsi
            .iter()
            .zip(psi.amplitudes())
            .map(|(j, p)| j * self.dt - p * (0.5 * self.dt * mean))
            .collect();
        let drift = self.linear_drift(snap, psi, Some(&extra));
        Ok(Plan { rates, targets, drift: Some(drift) })
    }

    fn plan_psi(&self, snap: &Snapshot, psi: &PureState, phi: &[C64], drifts: bool) -> Result<Plan, UnravelError> {
        let r = rate_matrix(self.model, snap, psi, phi);
        let (mut rates, targets): (SmallVec<[f64; 4]>, SmallVec<[Target; 4]>) = if self.labels.is_empty() {
            let pairs = crate::linalg::eigh_unchecked(&r);
            (pairs.iter().map(|p| p.value).collect(), pairs.into_iter().map(|p| Target::State(p.vector)).collect())
        } else {
            self.label_diagonal(snap.t, &r)?
        };
        self.check_positive(snap.t, psi, &mut rates)?;
        let drift = drifts.then(|| {
            let extra: Amplitudes = phi.iter().map(|x| x * (-0.5 * self.dt)).collect();
            self.linear_drift(snap, psi, Some(&extra))
        });
        Ok(Plan { rates, targets, drift })
    }

    /// Diagonal of R in the label basis; fails if R is not diagonal there.
    fn label_diagonal(&self, t: f64, r: &Matrix) -> Result<(SmallVec<[f64; 4]>, SmallVec<[Target; 4]>), UnravelError> {
        let scale = r.frobenius_norm().max(1.0);
        let mut rates = SmallVec::new();
        for (i, a) in self.labels.iter().enumerate() {
            for b in self.labels.iter().skip(i + 1) {
                let off = r.sandwich(a.state.amplitudes(), b.state.amplitudes()).norm();
                if off > 1e-8 * scale {
                    return Err(UnravelError::PolicyError(format!(
                        "rate operator at t = {t} is not diagonal in the declared labels \
                         (<{}|R|{}> = {off:.3e})",
                        a.name, b.name
                    )));
                }
            }
            rates.push(r.sandwich(a.state.amplitudes(), a.state.amplitudes()).re);
        }
        let targets = (0..self.labels.len()).map(Target::Label).collect();
        Ok((rates, targets))
    }

    fn check_positive(&self, t: f64, psi: &PureState, rates: &mut [f64]) -> Result<(), UnravelError> {
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -self.tol.positivity_clip {
            return Err(UnravelError::violation(t, psi, min));
        }
        for r in rates.iter_mut() {
            if *r < 0.0 {
                *r = 0.0;
            }
        }
        Ok(())
    }

    /// (1 - i K dt) psi + extra.
    fn linear_drift(&self, snap: &Snapshot, psi: &PureState, extra: Option<&Amplitudes>) -> Amplitudes {
        let kpsi = psi.apply(&snap.k);
        let mut out: Amplitudes = psi.amplitudes().iter().zip(&kpsi).map(|(p, k)| p - I * k * self.dt).collect();
        if let Some(extra) = extra {
            for (o, e) in out.iter_mut().zip(extra) {
                *o += e;
            }
        }
        out
    }

    /// Chooses a channel for a step with total probability `total * dt`
    /// given a uniform draw `u`.
    pub fn bernoulli(&self, plan: &Plan, t: f64, u: f64) -> Result<Option<usize>, UnravelError> {
        let total = plan.total_rate() * self.dt;
        if total > 1.0 {
            return Err(UnravelError::ProbabilityOverflow { t, total });
        }
        if u >= total {
            return Ok(None);
        }
        Ok(Some(pick_channel(&plan.rates, u / self.dt)))
    }

    pub fn land(&self, target: &Target) -> Slot {
        match target {
            Target::State(s) => match self.matching_label(s) {
                Some(j) => Slot::Label(j),
                None => Slot::Det(s.clone()),
            },
            Target::Label(j) => Slot::Label(*j),
        }
    }

    /// Normalizes the no-jump state and identifies it with a label if it
    /// has reached one.
    pub fn advance(&self, drift: &Amplitudes) -> Result<Slot, UnravelError> {
        let psi = PureState::normalized(drift)?.gauge_fixed();
        Ok(match self.matching_label(&psi) {
            Some(j) => Slot::Label(j),
            None => Slot::Det(psi),
        })
    }
}

/// Index j with sum_{i<j} rates_i <= x < sum_{i<=j} rates_i, skipping
/// zero-rate channels; falls back to the last positive channel.
pub(crate) fn pick_channel(rates: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &r) in rates.iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        last = j;
        acc += r;
        if x < acc {
            return j;
        }
    }
    last
}

fn single_step<R: Rng + ?Sized>(
    stepper: &Stepper<'_>,
    t: f64,
    slot: Slot,
    ctx: &PolicyContext,
    rng: &mut R,
) -> Result<(Slot, StepEvent), UnravelError> {
    let model = stepper.model;
    check_state(model, stepper.state(&slot))?;
    let snap = model.snapshot(t);
    let next = model.snapshot(t + stepper.dt);
    let plan = stepper.plan(&snap, &next, &slot, ctx)?;
    let u: f64 = rng.random();
    match stepper.bernoulli(&plan, t, u)? {
        Some(j) => Ok((stepper.land(&plan.targets[j]), StepEvent::Jump { channel: j, rate: plan.rates[j] })),
        None => {
            let slot = match &plan.drift {
                Some(d) => stepper.advance(d)?,
                None => slot,
            };
            Ok((slot, StepEvent::Deterministic))
        }
    }
}

fn into_state(stepper: &Stepper<'_>, slot: Slot) -> PureState {
    match slot {
        Slot::Det(psi) => psi,
        Slot::Label(j) => stepper.labels[j].state.clone(),
    }
}

/// One Monte Carlo wave function step: jump along L_a with probability
/// gamma_a ||L_a psi||^2 dt, else evolve with K and renormalize.
pub fn mcwf_step<R: Rng + ?Sized>(
    model: &MasterEquationModel,
    t: f64,
    psi: &PureState,
    dt: f64,
    rng: &mut R,
) -> Result<(PureState, StepEvent), UnravelError> {
    let policy = PhiPolicy::Zero;
    let stepper = Stepper::new(model, Method::Mcwf, &policy, dt)?;
    let (slot, ev) = single_step(&stepper, t, Slot::Det(psi.clone()), &PolicyContext::default(), rng)?;
    Ok((into_state(&stepper, slot), ev))
}

/// One step with orthogonal jumps to the eigenstates of the projected jump
/// image.
pub fn w_roqj_step<R: Rng + ?Sized>(
    model: &MasterEquationModel,
    t: f64,
    psi: &PureState,
    dt: f64,
    rng: &mut R,
) -> Result<(PureState, StepEvent), UnravelError> {
    let policy = PhiPolicy::Zero;
    let stepper = Stepper::new(model, Method::WRoqj, &policy, dt)?;
    let (slot, ev) = single_step(&stepper, t, Slot::Det(psi.clone()), &PolicyContext::default(), rng)?;
    Ok((into_state(&stepper, slot), ev))
}

/// One rate-operator step for an arbitrary policy. Returns the new state,
/// what happened, and the updated context.
#[allow(clippy::too_many_arguments)]
pub fn psi_roqj_step<R: Rng + ?Sized>(
    model: &MasterEquationModel,
    policy: &PhiPolicy,
    ctx: &PolicyContext,
    t: f64,
    psi: &PureState,
    dt: f64,
    rng: &mut R,
) -> Result<(PureState, StepEvent, PolicyContext), UnravelError> {
    let stepper = Stepper::new(model, Method::PsiRoqj, policy, dt)?;
    let slot = match stepper.matching_label(psi) {
        Some(j) if ctx.has_jumped => Slot::Label(j),
        _ => Slot::Det(psi.clone()),
    };
    let (slot, ev) = single_step(&stepper, t, slot, ctx, rng)?;
    let mut ctx = ctx.clone();
    if matches!(ev, StepEvent::Jump { .. }) {
        ctx.has_jumped = true;
    }
    Ok((into_state(&stepper, slot), ev, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_picking() {
        let rates = [0.0, 1.0, 0.0, 2.0];
        assert_eq!(pick_channel(&rates, 0.5), 1);
        assert_eq!(pick_channel(&rates, 1.5), 3);
        assert_eq!(pick_channel(&rates, 10.0), 3);
    }
}
