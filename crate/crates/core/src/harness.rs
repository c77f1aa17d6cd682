//! Episodes, regret accounting, horizon sweeps and rate fits.

use std::cmp::Ordering;
use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::MixtureDistribution;
use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerSpec};
use crate::trade::{
    feedback_for, gain_from_trade, realistic_feedback, FeedbackKind, Price, PricePoint,
    RealisticFeedback, SurplusSum, ValuationPair,
};

/// ChaCha stream carrying the environment's draws.
pub const ENV_STREAM: u64 = 0;
/// ChaCha stream carrying the learner's uniforms.
pub const LEARNER_STREAM: u64 = 1;

/// Generator for one stream of an episode seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Source of the valuations of each round.
pub trait Environment<V: PricePoint = Price> {
    fn supports(&self, kind: FeedbackKind) -> bool;

    fn next_pair(&mut self, round: usize, rng: &mut dyn RngCore) -> Result<ValuationPair<V>>;

    /// The iid law, when there is one.
    fn iid_law(&self) -> Option<&MixtureDistribution> {
        None
    }

    fn describe(&self) -> String;
}

/// iid draws from a mixture law.
pub struct Iid<'a> {
    law: &'a MixtureDistribution,
    label: String,
}

impl<'a> Iid<'a> {
    pub fn new(law: &'a MixtureDistribution, label: impl Into<String>) -> Self {
        Iid {
            law,
            label: label.into(),
        }
    }
}

impl Environment<Price> for Iid<'_> {
    fn supports(&self, _kind: FeedbackKind) -> bool {
        true
    }

    fn next_pair(&mut self, _round: usize, rng: &mut dyn RngCore) -> Result<ValuationPair> {
        Ok(self.law.sample_with(rng))
    }

    fn iid_law(&self) -> Option<&MixtureDistribution> {
        Some(self.law)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// A fixed valuation sequence; round `t` plays entry `t - 1`.
pub struct Scripted<V: PricePoint = Price> {
    pairs: Vec<ValuationPair<V>>,
}

impl<V: PricePoint> Scripted<V> {
    pub fn new(pairs: Vec<ValuationPair<V>>) -> Self {
        Scripted { pairs }
    }
}

impl<V: PricePoint> Environment<V> for Scripted<V> {
    fn supports(&self, _kind: FeedbackKind) -> bool {
        true
    }

    fn next_pair(&mut self, round: usize, _rng: &mut dyn RngCore) -> Result<ValuationPair<V>> {
        self.pairs.get(round - 1).cloned().ok_or_else(|| {
            Error::param(
                "horizon",
                format!("scripted sequence has only {} rounds", self.pairs.len()),
            )
        })
    }

    fn describe(&self) -> String {
        format!("scripted({})", self.pairs.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round<V = Price> {
    pub t: usize,
    pub price: V,
    pub pair: ValuationPair<V>,
    pub gft: f64,
    /// Accept bits at the posted price (recorded under either feedback kind).
    pub feedback: RealisticFeedback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<V = Price> {
    pub rounds: Vec<Round<V>>,
    pub seed: u64,
    pub environment: String,
    pub learner: String,
    pub feedback: FeedbackKind,
    pub iid: bool,
}

impl<V: PricePoint> Trajectory<V> {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn learner_gft(&self) -> f64 {
        self.rounds.iter().map(|r| SurplusSum::of(r.gft)).sum::<SurplusSum>().to_f64()
    }

    /// CSV with header `t,price,s,b,gft,seller_accepts,buyer_accepts`.
    /// Reals carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,price,s,b,gft,seller_accepts,buyer_accepts")?;
        for r in &self.rounds {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.t,
                r.price.to_f64(),
                r.pair.s.to_f64(),
                r.pair.b.to_f64(),
                r.gft,
                u8::from(r.feedback.seller_accepts),
                u8::from(r.feedback.buyer_accepts),
            )?;
        }
        Ok(())
    }
}

/// Play `horizon` rounds of `learner` against `env`, fully determined by
/// `seed`.
pub fn run_episode<V, L, E>(learner: &mut L, env: &mut E, horizon: usize, seed: u64) -> Result<Trajectory<V>>
where
    V: PricePoint,
    L: Learner<V> + ?Sized,
    E: Environment<V> + ?Sized,
{
    let kind = learner.required_feedback();
    if !env.supports(kind) {
        return Err(Error::Contract {
            required: kind,
            context: format!("environment {} does not provide it", env.describe()),
        });
    }
    learner.reset(Some(horizon))?;
    let mut env_rng = stream_rng(seed, ENV_STREAM);
    let mut learner_rng = stream_rng(seed, LEARNER_STREAM);
    let mut rounds = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let pair = env.next_pair(t, &mut env_rng)?;
        let price = learner.act(t, &mut learner_rng);
        let gft = gain_from_trade(&price, &pair);
        learner.observe(t, &price, &feedback_for(kind, &price, &pair))?;
        rounds.push(Round {
            t,
            feedback: realistic_feedback(&price, &pair),
            price,
            pair,
            gft,
        });
    }
    Ok(Trajectory {
        rounds,
        seed,
        environment: env.describe(),
        learner: learner.name().to_string(),
        feedback: kind,
        iid: env.iid_law().is_some(),
    })
}

/// Best fixed price in hindsight and its cumulative gain, smallest price on
/// ties. `O(T log T)` sweep over the valuations.
pub fn hindsight_best<V: PricePoint>(pairs: &[ValuationPair<V>]) -> Result<(V, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    // (key, weight, is_buyer); only trading-capable rounds carry weight.
    let mut events: Vec<(&V, SurplusSum, bool)> = Vec::with_capacity(2 * pairs.len());
    for v in pairs {
        let w = if v.s.order(&v.b) == Ordering::Greater {
            SurplusSum::ZERO
        } else {
            SurplusSum::of(v.spread())
        };
        events.push((&v.s, w, false));
        events.push((&v.b, w, true));
    }
    events.sort_by(|a, b| a.0.order(b.0));

    let mut current = SurplusSum::ZERO;
    let mut best: Option<(&V, SurplusSum)> = None;
    let mut i = 0;
    while i < events.len() {
        let key = events[i].0;
        let mut j = i;
        while j < events.len() && events[j].0.order(key) == Ordering::Equal {
            j += 1;
        }
        // sellers at `key` already accept; buyers at `key` still accept
        let mut leaving = SurplusSum::ZERO;
        for &(_, w, is_buyer) in &events[i..j] {
            if is_buyer {
                leaving += w;
            } else {
                current += w;
            }
        }
        if best.is_none_or(|(_, v)| current > v) {
            best = Some((key, current));
        }
        current -= leaving;
        i = j;
    }
    let (p, v) = best.expect("non-empty");
    Ok((p.clone(), v.to_f64()))
}

/// Pseudo-regret against the law's optimal fixed price.
pub fn pseudo_regret(law: &MixtureDistribution, trajectory: &Trajectory<Price>) -> Result<f64> {
    if !trajectory.iid {
        return Err(Error::NotIid);
    }
    let (_, best) = law.best_fixed_price();
    let earned: f64 = trajectory.rounds.iter().map(|r| law.expected_gft(r.price)).sum();
    Ok(trajectory.len() as f64 * best - earned)
}

/// Single-episode summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub horizon: usize,
    pub seed: u64,
    pub learner: String,
    pub environment: String,
    pub learner_gft: f64,
    pub hindsight_best_price: Option<f64>,
    pub hindsight_best_total: Option<f64>,
    pub hindsight_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_regret: Option<f64>,
}

impl EpisodeReport {
    pub fn new(trajectory: &Trajectory<Price>, law: Option<&MixtureDistribution>) -> Result<Self> {
        let learner_gft = trajectory.learner_gft();
        let pairs: Vec<_> = trajectory.rounds.iter().map(|r| r.pair).collect();
        let best = if pairs.is_empty() {
            None
        } else {
            Some(hindsight_best(&pairs)?)
        };
        let pseudo = match law {
            Some(law) if trajectory.iid => Some(pseudo_regret(law, trajectory)?),
            _ => None,
        };
        Ok(EpisodeReport {
            horizon: trajectory.len(),
            seed: trajectory.seed,
            learner: trajectory.learner.clone(),
            environment: trajectory.environment.clone(),
            learner_gft,
            hindsight_best_price: best.map(|b| b.0.get()),
            hindsight_best_total: best.map(|b| b.1),
            hindsight_regret: best.map(|b| b.1 - learner_gft),
            pseudo_regret: pseudo,
        })
    }
}

/// Least-squares slope of `log y` on `log x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub beta: f64,
    pub intercept: f64,
    /// Residual-based standard error of `beta`; absent with two points.
    pub stderr: Option<f64>,
}

/// Fit `y = C x^beta`. `None` with fewer than two points or any
/// non-positive value.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<ExponentFit> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let stderr = (points.len() > 2).then(|| {
        let rss: f64 = logs
            .iter()
            .map(|p| (p.1 - intercept - beta * p.0).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    });
    Some(ExponentFit {
        beta,
        intercept,
        stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean_hindsight_regret: f64,
    pub stderr_hindsight_regret: f64,
    pub mean_pseudo_regret: f64,
    pub stderr_pseudo_regret: f64,
    /// Mean over replications of the hindsight-best price and total.
    pub hindsight_best_price: f64,
    pub hindsight_best_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub learner: LearnerSpec,
    pub instance: String,
    pub replications: usize,
    pub base_seed: u64,
    pub rows: Vec<HorizonRow>,
    /// Fit of mean pseudo-regret against the horizon.
    pub fitted_exponent: Option<ExponentFit>,
    /// Fit of mean hindsight regret, for reference.
    pub hindsight_exponent: Option<ExponentFit>,
}

impl RegretReport {
    /// Table with columns `T,mean_hindsight_regret,mean_pseudo_regret,stderr`
    /// (`stderr` is that of the pseudo-regret mean), plus the hindsight
    /// standard error.
    pub fn write_table_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "T,mean_hindsight_regret,mean_pseudo_regret,stderr,stderr_hindsight")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.horizon,
                r.mean_hindsight_regret,
                r.mean_pseudo_regret,
                r.stderr_pseudo_regret,
                r.stderr_hindsight_regret
            )?;
        }
        Ok(())
    }
}

/// Seed of replication `rep`.
pub fn replication_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed.wrapping_add(rep as u64)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct EpisodeOutcome {
    hindsight_regret: f64,
    pseudo_regret: f64,
    best_price: f64,
    best_total: f64,
}

/// Regret over `replications` episodes at each horizon. Replication `r`
/// uses seed `base_seed + r` at every horizon. Episodes run in parallel;
/// aggregation follows replication order.
pub fn sweep(
    learner: &LearnerSpec,
    law: &MixtureDistribution,
    instance: &str,
    horizons: &[usize],
    replications: usize,
    base_seed: u64,
) -> Result<RegretReport> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("horizons", "must be strictly ascending"));
    }
    if replications == 0 {
        return Err(Error::param("replications", "must be at least 1"));
    }
    let fallback_m = law.marginal_density_bound();
    // surface configuration errors before spawning work
    learner.build(fallback_m)?;

    let jobs: Vec<(usize, usize)> = horizons
        .iter()
        .flat_map(|&h| (0..replications).map(move |r| (h, r)))
        .collect();
    let outcomes: Vec<Result<EpisodeOutcome>> = jobs
        .par_iter()
        .map(|&(horizon, rep)| {
            let mut l = learner.build(fallback_m)?;
            let mut env = Iid::new(law, instance);
            let traj = run_episode(&mut l, &mut env, horizon, replication_seed(base_seed, rep))?;
            let report = EpisodeReport::new(&traj, Some(law))?;
            Ok(EpisodeOutcome {
                hindsight_regret: report.hindsight_regret.unwrap_or(0.0),
                pseudo_regret: report.pseudo_regret.unwrap_or(0.0),
                best_price: report.hindsight_best_price.unwrap_or(0.0),
                best_total: report.hindsight_best_total.unwrap_or(0.0),
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let rows: Vec<HorizonRow> = horizons
        .iter()
        .zip(outcomes.chunks(replications))
        .map(|(&horizon, chunk)| {
            let col = |f: fn(&EpisodeOutcome) -> f64| chunk.iter().map(f).collect::<Vec<_>>();
            let (mh, sh) = mean_stderr(&col(|o| o.hindsight_regret));
            let (mp, sp) = mean_stderr(&col(|o| o.pseudo_regret));
            HorizonRow {
                horizon,
                mean_hindsight_regret: mh,
                stderr_hindsight_regret: sh,
                mean_pseudo_regret: mp,
                stderr_pseudo_regret: sp,
                hindsight_best_price: mean_stderr(&col(|o| o.best_price)).0,
                hindsight_best_total: mean_stderr(&col(|o| o.best_total)).0,
            }
        })
        .collect();
    let fit = |f: fn(&HorizonRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.horizon as f64, f(r))).collect();
        fit_exponent(&pts)
    };
    Ok(RegretReport {
        learner: learner.clone(),
        instance: instance.to_string(),
        replications,
        base_seed,
        fitted_exponent: fit(|r| r.mean_pseudo_regret),
        hindsight_exponent: fit(|r| r.mean_hindsight_regret),
        rows,
    })
}
