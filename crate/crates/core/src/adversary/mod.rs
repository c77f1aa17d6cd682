//! Oblivious adversarial sequence forcing linear regret under full
//! feedback.
//!
//! The construction keeps nested intervals `[c_t, d_t]` of width
//! `eps / 3^(t-1)`. Each round it asks how likely the learner's next price
//! is to fall below the middle third's lower edge and emits either
//! `(0, d_{t+1})` or `(c_{t+1}, 1)`, whichever the learner trades on with
//! probability at most one half. Every emitted interval contains the limit
//! of `c_t`, so a fixed price trades every round.

mod exact;

use std::sync::Arc;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exact::{inv_pow3, CantorLedger, CantorPoint, ExactPrice};

use crate::error::{Error, Result};
use crate::harness::{hindsight_best, run_episode, stream_rng, Environment, Trajectory};
use crate::learners::Learner;
use crate::trade::{Feedback, FeedbackKind, FullFeedback, PricePoint, SurplusSum, ValuationPair};

/// Replica count used for randomized learners when none is given.
pub const DEFAULT_RANDOMIZED_REPLICAS: usize = 512;

/// Streams `SHADOW_STREAM_BASE + i` feed the probe's replicas.
pub const SHADOW_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Emit `(0, d_{t+1})`.
    Low,
    /// Emit `(c_{t+1}, 1)`.
    High,
}

/// Nested-interval state after `rounds()` emitted pairs.
#[derive(Debug)]
pub struct CantorState {
    epsilon: f64,
    ledger: Arc<CantorLedger>,
    /// Position of the current upper endpoint.
    d_position: usize,
    history: Vec<ValuationPair<ExactPrice>>,
}

impl CantorState {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0 / 18.0) {
            return Err(Error::param("epsilon", format!("{epsilon} is not in (0, 1/18)")));
        }
        Ok(CantorState {
            epsilon,
            ledger: CantorLedger::new(epsilon),
            d_position: 0,
            history: Vec::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[ValuationPair<ExactPrice>] {
        &self.history
    }

    pub fn ledger(&self) -> &Arc<CantorLedger> {
        &self.ledger
    }

    /// Lower endpoint `c_t` (before round 1: `1/2 - 3 eps / 2`).
    pub fn c(&self) -> ExactPrice {
        let t = self.rounds();
        ExactPrice::Cantor(self.ledger.point(t, self.ledger.digit(t)))
    }

    /// Upper endpoint `d_t` (before round 1: `1/2 + 3 eps / 2`).
    pub fn d(&self) -> ExactPrice {
        ExactPrice::Cantor(self.ledger.point(self.d_position, 1))
    }

    /// `c_t + eps / 3^t` in the construction's indexing: the price whose
    /// lower-tail probability decides the next round.
    pub fn threshold(&self) -> ExactPrice {
        ExactPrice::Cantor(self.ledger.point(self.rounds() + 1, 1))
    }

    /// Close the next round on `branch` and return its valuations.
    pub fn advance(&mut self, branch: Branch) -> ValuationPair<ExactPrice> {
        let r = self.rounds() + 1;
        let pair = match branch {
            Branch::Low => {
                self.ledger.push(0);
                self.d_position = r;
                ValuationPair {
                    s: ExactPrice::Float(0.0),
                    b: ExactPrice::Cantor(self.ledger.point(r, 1)),
                }
            }
            Branch::High => {
                self.ledger.push(2);
                ValuationPair {
                    s: ExactPrice::Cantor(self.ledger.point(r, 2)),
                    b: ExactPrice::Float(1.0),
                }
            }
        };
        self.history.push(pair.clone());
        pair
    }
}

/// Estimate of the law of the learner's next price given the emitted
/// history.
pub trait PriceProbe {
    /// Probability that the price for `round` is at most `x`, and the
    /// standard error of the estimate (0 when exact).
    fn lower_tail(&mut self, round: usize, x: &ExactPrice) -> Result<(f64, f64)>;

    /// Deliver the valuations of `round`.
    fn observe(&mut self, round: usize, pair: &ValuationPair<ExactPrice>) -> Result<()>;

    fn replicas(&self) -> usize;
}

struct Shadow {
    learner: Box<dyn Learner<ExactPrice>>,
    rng: ChaCha8Rng,
    next: Option<ExactPrice>,
}

/// Replicas of the learner, each with its own uniform stream, fed the same
/// history in lockstep. Running a replica forward one round at a time has
/// the same law as re-instantiating it and replaying the history, since the
/// history does not depend on the replica's draws.
pub struct ShadowProbe {
    shadows: Vec<Shadow>,
}

impl ShadowProbe {
    pub fn new<F>(factory: F, replicas: usize, horizon: usize, seed: u64) -> Result<Self>
    where
        F: Fn() -> Result<Box<dyn Learner<ExactPrice>>>,
    {
        if replicas == 0 {
            return Err(Error::param("replicas", "probe needs at least one replica"));
        }
        let shadows = (0..replicas)
            .map(|i| {
                let mut learner = factory()?;
                learner.reset(Some(horizon))?;
                Ok(Shadow {
                    learner,
                    rng: stream_rng(seed, SHADOW_STREAM_BASE + i as u64),
                    next: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShadowProbe { shadows })
    }
}

impl PriceProbe for ShadowProbe {
    fn lower_tail(&mut self, round: usize, x: &ExactPrice) -> Result<(f64, f64)> {
        let below = self
            .shadows
            .par_iter_mut()
            .map(|s| {
                let p = s
                    .next
                    .get_or_insert_with(|| s.learner.act(round, &mut s.rng as &mut dyn RngCore));
                usize::from(p.le(x))
            })
            .sum::<usize>();
        let n = self.shadows.len() as f64;
        let q = below as f64 / n;
        let se = if self.shadows.len() > 1 {
            (q * (1.0 - q) / n).sqrt()
        } else {
            0.0
        };
        Ok((q, se))
    }

    fn observe(&mut self, round: usize, pair: &ValuationPair<ExactPrice>) -> Result<()> {
        let fb = Feedback::Full(FullFeedback {
            valuations: pair.clone(),
        });
        self.shadows.par_iter_mut().try_for_each(|s| {
            let p = s
                .next
                .take()
                .ok_or_else(|| Error::Probe(format!("replica did not act in round {round}")))?;
            s.learner.observe(round, &p, &fb)
        })
    }

    fn replicas(&self) -> usize {
        self.shadows.len()
    }
}

/// Outcome of one construction round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub round: usize,
    pub lower_tail: f64,
    pub stderr: f64,
    pub branch: Branch,
}

/// One round of the construction: probe the learner's law at the
/// threshold, pick the branch, and feed the pair back to the probe.
pub fn cantor_step(
    state: &mut CantorState,
    probe: &mut dyn PriceProbe,
) -> Result<(ValuationPair<ExactPrice>, StepRecord)> {
    let round = state.rounds() + 1;
    let (q, se) = probe.lower_tail(round, &state.threshold())?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Probe(format!("estimate {q} outside [0, 1]")));
    }
    let branch = if q <= 0.5 { Branch::Low } else { Branch::High };
    let pair = state.advance(branch);
    probe.observe(round, &pair)?;
    Ok((
        pair,
        StepRecord {
            round,
            lower_tail: q,
            stderr: se,
            branch,
        },
    ))
}

/// The construction as an episode environment (full feedback only).
pub struct AdversarialEnvironment<P: PriceProbe> {
    pub state: CantorState,
    pub probe: P,
    pub steps: Vec<StepRecord>,
}

impl<P: PriceProbe> Environment<ExactPrice> for AdversarialEnvironment<P> {
    fn supports(&self, kind: FeedbackKind) -> bool {
        kind == FeedbackKind::Full
    }

    fn next_pair(&mut self, _round: usize, _rng: &mut dyn RngCore) -> Result<ValuationPair<ExactPrice>> {
        let (pair, step) = cantor_step(&mut self.state, &mut self.probe)?;
        self.steps.push(step);
        Ok(pair)
    }

    fn describe(&self) -> String {
        format!("cantor(eps={})", self.state.epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub epsilon: f64,
    pub horizon: usize,
    pub replicas: usize,
    pub learner_gft: f64,
    /// Gain of a fixed price inside the final interval: `sum (b_t - s_t)`.
    pub benchmark_gft: f64,
    pub regret: f64,
    /// `(1 - 3 eps) / 4 * T`.
    pub bound: f64,
    /// Standard deviation of the regret induced by probe error: each
    /// round's surplus times the probe's standard error, in quadrature.
    pub probe_std: f64,
    /// True when the probe is a finite-sample estimate.
    pub approximate: bool,
    /// Midpoint of the final interval (nearest double).
    pub p_star: f64,
    pub hindsight_best_total: f64,
    pub low_rounds: usize,
    pub high_rounds: usize,
}

/// Run the construction against a full-feedback learner. `replicas`
/// defaults to 1 for deterministic learners and
/// [`DEFAULT_RANDOMIZED_REPLICAS`] otherwise.
pub fn run_adversarial_episode<F>(
    factory: F,
    horizon: usize,
    epsilon: f64,
    replicas: Option<usize>,
    seed: u64,
) -> Result<(Trajectory<ExactPrice>, AdversaryReport)>
where
    F: Fn() -> Result<Box<dyn Learner<ExactPrice>>>,
{
    let state = CantorState::new(epsilon)?;
    let mut learner = factory()?;
    if learner.required_feedback() != FeedbackKind::Full {
        return Err(Error::Contract {
            required: learner.required_feedback(),
            context: "the adversarial construction reveals full valuations only".into(),
        });
    }
    let replicas = replicas.unwrap_or(if learner.is_deterministic() {
        1
    } else {
        DEFAULT_RANDOMIZED_REPLICAS
    });
    let probe = ShadowProbe::new(&factory, replicas, horizon, seed)?;
    let mut env = AdversarialEnvironment {
        state,
        probe,
        steps: Vec::with_capacity(horizon),
    };
    let trajectory = run_episode(&mut learner, &mut env, horizon, seed)?;

    // Every emitted interval must contain the final one.
    let (c, d) = (env.state.c(), env.state.d());
    for (t, v) in env.state.history().iter().enumerate() {
        if !(v.s.le(&c) && d.le(&v.b)) {
            return Err(Error::Probe(format!(
                "final interval escapes round {}'s valuations",
                t + 1
            )));
        }
    }
    let benchmark: SurplusSum = env
        .state
        .history()
        .iter()
        .map(|v| SurplusSum::of(v.spread()))
        .sum();
    let benchmark_gft = benchmark.to_f64();
    let learner_gft = trajectory.learner_gft();
    let probe_std = env
        .steps
        .iter()
        .zip(env.state.history())
        .map(|(s, v)| (v.spread() * s.stderr).powi(2))
        .sum::<f64>()
        .sqrt();
    let hindsight_best_total = if horizon == 0 {
        0.0
    } else {
        hindsight_best(env.state.history())?.1
    };
    let low_rounds = env.steps.iter().filter(|s| s.branch == Branch::Low).count();
    let report = AdversaryReport {
        epsilon,
        horizon,
        replicas,
        learner_gft,
        benchmark_gft,
        regret: benchmark_gft - learner_gft,
        bound: (1.0 - 3.0 * epsilon) / 4.0 * horizon as f64,
        probe_std,
        approximate: replicas > 1,
        p_star: 0.5 * (c.to_f64() + d.to_f64()),
        hindsight_best_total,
        low_rounds,
        high_rounds: horizon - low_rounds,
    };
    Ok((trajectory, report))
}
