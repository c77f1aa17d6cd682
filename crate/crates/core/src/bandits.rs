//! Stochastic K-armed bandits with rewards in `[0, 1]`.

use serde::{Deserialize, Serialize};

/// A bandit algorithm driven by [`crate::learners::ScoutingBandits`].
///
/// `select` is deterministic given `init` and the update history; ties go
/// to the lowest arm index.
pub trait BanditAlgorithm: Send {
    fn init(&mut self, arms: usize, horizon: usize);
    fn select(&mut self) -> usize;
    fn update(&mut self, arm: usize, reward: f64);
    fn arms(&self) -> usize;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub pulls: u64,
    pub mean_reward: f64,
}

impl ArmStats {
    pub fn record(&mut self, reward: f64) {
        self.pulls += 1;
        self.mean_reward += (reward - self.mean_reward) / self.pulls as f64;
    }
}

/// Which bandit Scouting Bandits runs in its second phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditChoice {
    #[default]
    Ucb1,
    #[serde(rename = "action_elim")]
    ActionElimination,
}

impl BanditChoice {
    pub fn build(self) -> Box<dyn BanditAlgorithm> {
        match self {
            BanditChoice::Ucb1 => Box::new(Ucb1::default()),
            BanditChoice::ActionElimination => Box::new(ActionElimination::default()),
        }
    }
}

/// UCB1 index `mean + sqrt(2 ln t / pulls)`; unpulled arms come first in
/// index order. `t` is the round being decided.
pub fn ucb1_select(stats: &[ArmStats], t: u64) -> usize {
    if let Some(i) = stats.iter().position(|s| s.pulls == 0) {
        return i;
    }
    let log_t = (t.max(1) as f64).ln();
    let mut best = 0;
    let mut best_index = f64::NEG_INFINITY;
    for (i, s) in stats.iter().enumerate() {
        let index = s.mean_reward + (2.0 * log_t / s.pulls as f64).sqrt();
        if index > best_index {
            best = i;
            best_index = index;
        }
    }
    best
}

#[derive(Clone, Debug, Default)]
pub struct Ucb1 {
    stats: Vec<ArmStats>,
    round: u64,
}

impl Ucb1 {
    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }
}

impl BanditAlgorithm for Ucb1 {
    fn init(&mut self, arms: usize, _horizon: usize) {
        assert!(arms > 0, "a bandit needs at least one arm");
        self.stats = vec![ArmStats::default(); arms];
        self.round = 0;
    }

    fn select(&mut self) -> usize {
        ucb1_select(&self.stats, self.round + 1)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        self.round += 1;
        self.stats[arm].record(reward);
    }

    fn arms(&self) -> usize {
        self.stats.len()
    }
}

/// Round-robin over the active set; after every full pass, drop arms whose
/// upper confidence bound falls below the best lower bound.
///
/// Radius `sqrt(ln(2 K horizon) / (2 n))`: Hoeffding with a union bound over
/// all arms and rounds.
#[derive(Clone, Debug, Default)]
pub struct ActionElimination {
    stats: Vec<ArmStats>,
    active: Vec<usize>,
    cursor: usize,
    log_term: f64,
}

impl ActionElimination {
    pub fn radius(&self, pulls: u64) -> f64 {
        (self.log_term / (2.0 * pulls as f64)).sqrt()
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    fn eliminate(&mut self) {
        let bound = |s: &ArmStats, sign: f64| s.mean_reward + sign * self.radius(s.pulls);
        let best_lower = self
            .active
            .iter()
            .map(|&i| bound(&self.stats[i], -1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let stats = &self.stats;
        let log_term = self.log_term;
        self.active.retain(|&i| {
            let s = &stats[i];
            s.mean_reward + (log_term / (2.0 * s.pulls as f64)).sqrt() >= best_lower
        });
    }
}

impl BanditAlgorithm for ActionElimination {
    fn init(&mut self, arms: usize, horizon: usize) {
        assert!(arms > 0, "a bandit needs at least one arm");
        self.stats = vec![ArmStats::default(); arms];
        self.active = (0..arms).collect();
        self.cursor = 0;
        self.log_term = (2.0 * arms as f64 * horizon.max(1) as f64).ln();
    }

    fn select(&mut self) -> usize {
        self.active[self.cursor]
    }

    fn update(&mut self, arm: usize, reward: f64) {
        self.stats[arm].record(reward);
        self.cursor += 1;
        if self.cursor == self.active.len() {
            self.cursor = 0;
            self.eliminate();
        }
    }

    fn arms(&self) -> usize {
        self.stats.len()
    }
}
