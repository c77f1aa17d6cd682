//! Scouting Bandits: realistic-feedback learning for independent valuations
//! with bounded densities.
//!
//! The expected gain from trade at `p` splits into local terms
//! `P[S <= p]`, `P[B >= p]` and global integrals
//! `I(p) = int_0^p P[S <= t] dt`, `J(p) = int_p^1 P[B >= t] dt`:
//!
//! ```text
//! E[GFT(p)] = P[S <= p] J(p) + P[B >= p] I(p)
//! ```
//!
//! A scouting phase of uniformly random prices estimates every `I(q_i)`,
//! `J(q_i)` on a grid at once; a stochastic bandit then learns the local
//! terms, rewarded with `1{S <= q} J_hat + 1{q <= B} I_hat`.

use rand::{Rng, RngCore};

use super::{expect_realistic, Learner};
use crate::bandits::{BanditAlgorithm, BanditChoice};
use crate::error::{Error, Result};
use crate::trade::{Feedback, FeedbackKind, Price, PricePoint, RealisticFeedback};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Scouting,
    Bandits,
}

/// Configuration and running estimates of one Scouting Bandits episode.
pub struct SbState {
    pub density_bound: f64,
    pub epsilon: f64,
    /// Grid regularity `M^(2/3)`.
    pub ell: f64,
    /// Failure probability `epsilon M^(1/3)`.
    pub delta: f64,
    pub arms: usize,
    pub horizon: usize,
    /// Scouting length, clamped to the horizon.
    pub scouting_rounds: usize,
    /// `true` when the computed scouting length exceeded the horizon.
    pub clamped: bool,
    pub grid: Vec<f64>,
    /// Per-arm estimates; meaningful once the bandit phase starts.
    pub i_hat: Vec<f64>,
    pub j_hat: Vec<f64>,
    pub phase: Phase,
    /// Seller-accepting scouting rounds bucketed by the first grid index
    /// `i` with `P <= q_i` (index `arms` when above the whole grid).
    seller_buckets: Vec<u64>,
    /// Buyer-accepting scouting rounds bucketed by the last grid index `i`
    /// with `q_i <= P`.
    buyer_buckets: Vec<u64>,
    bandit: Box<dyn BanditAlgorithm>,
    bandit_choice: BanditChoice,
    pending_arm: Option<usize>,
}

impl std::fmt::Debug for SbState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SbState")
            .field("density_bound", &self.density_bound)
            .field("epsilon", &self.epsilon)
            .field("arms", &self.arms)
            .field("scouting_rounds", &self.scouting_rounds)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

/// `ceil`, except that values within floating noise of an integer snap to
/// it (so `ceil(8^(2/3) / 0.5)` is 8, not 9).
fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Derive the grid and scouting length from `(M, T, epsilon)`. `epsilon`
/// defaults to `T^(-1/3)`.
pub fn sb_configure(
    density_bound: f64,
    horizon: usize,
    epsilon: Option<f64>,
    bandit: BanditChoice,
) -> Result<SbState> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    if !(density_bound >= 1.0 && density_bound.is_finite()) {
        return Err(Error::param("density_bound", format!("{density_bound} < 1")));
    }
    let epsilon = epsilon.unwrap_or_else(|| 1.0 / (horizon as f64).cbrt());
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
    }
    let cbrt_m = density_bound.cbrt();
    let ell = cbrt_m * cbrt_m;
    let delta = epsilon * cbrt_m;
    let arms = ceil_snapped(ell / epsilon).max(1.0) as usize;
    let t0 = ceil_snapped((4.0 * arms as f64 / delta).ln() / (2.0 * epsilon * epsilon)).max(1.0);
    let clamped = t0 >= horizon as f64;
    let scouting_rounds = if clamped { horizon } else { t0 as usize };
    let grid = (0..arms).map(|i| i as f64 * (epsilon / ell)).collect();
    Ok(SbState {
        density_bound,
        epsilon,
        ell,
        delta,
        arms,
        horizon,
        scouting_rounds,
        clamped,
        grid,
        i_hat: vec![0.0; arms],
        j_hat: vec![0.0; arms],
        phase: Phase::Scouting,
        seller_buckets: vec![0; arms + 1],
        buyer_buckets: vec![0; arms + 1],
        bandit: bandit.build(),
        bandit_choice: bandit,
        pending_arm: None,
    })
}

impl SbState {
    /// Price posted at `round` given the round's uniform draw `u`.
    pub fn act(&mut self, round: usize, u: f64) -> Price {
        if round <= self.scouting_rounds || self.phase == Phase::Scouting {
            Price::from_f64(u)
        } else {
            let arm = self.bandit.select();
            self.pending_arm = Some(arm);
            Price::from_f64(self.grid[arm])
        }
    }

    pub fn observe(&mut self, round: usize, posted: Price, fb: RealisticFeedback) {
        match self.phase {
            Phase::Scouting => {
                let p = posted.get();
                if fb.seller_accepts {
                    let i = self.grid.partition_point(|&q| q < p);
                    self.seller_buckets[i] += 1;
                }
                if fb.buyer_accepts {
                    let below = self.grid.partition_point(|&q| q <= p);
                    if below > 0 {
                        self.buyer_buckets[below - 1] += 1;
                    }
                }
                if round == self.scouting_rounds && !self.clamped {
                    self.finish_scouting();
                }
            }
            Phase::Bandits => {
                let arm = self
                    .pending_arm
                    .take()
                    .expect("observe follows act in the bandit phase");
                let reward = f64::from(u8::from(fb.seller_accepts)) * self.j_hat[arm]
                    + f64::from(u8::from(fb.buyer_accepts)) * self.i_hat[arm];
                // rewards live in [0, 2]; the bandit expects [0, 1]
                self.bandit.update(arm, reward / 2.0);
            }
        }
    }

    /// Raw scouting counts `(sum_t I_i^t, sum_t J_i^t)` for arm `i`.
    pub fn scouting_counts(&self, i: usize) -> (u64, u64) {
        let i_count = self.seller_buckets[..=i].iter().sum();
        let j_count = self.buyer_buckets[i..].iter().sum();
        (i_count, j_count)
    }

    fn finish_scouting(&mut self) {
        let t0 = self.scouting_rounds as f64;
        let mut acc = 0u64;
        for i in 0..self.arms {
            acc += self.seller_buckets[i];
            self.i_hat[i] = acc as f64 / t0;
        }
        let mut acc = 0u64;
        for i in (0..self.arms).rev() {
            acc += self.buyer_buckets[i];
            self.j_hat[i] = acc as f64 / t0;
        }
        self.bandit.init(self.arms, self.horizon - self.scouting_rounds);
        self.phase = Phase::Bandits;
    }

    pub fn bandit_choice(&self) -> BanditChoice {
        self.bandit_choice
    }
}

/// Scouting Bandits as a [`Learner`]. Needs the horizon at reset.
pub struct ScoutingBandits {
    density_bound: f64,
    epsilon: Option<f64>,
    bandit: BanditChoice,
    state: Option<SbState>,
}

impl ScoutingBandits {
    pub fn new(density_bound: f64, epsilon: Option<f64>, bandit: BanditChoice) -> Result<Self> {
        // validate eagerly with a throwaway horizon
        sb_configure(density_bound, 1, epsilon, bandit)?;
        Ok(ScoutingBandits {
            density_bound,
            epsilon,
            bandit,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&SbState> {
        self.state.as_ref()
    }
}

impl Learner<Price> for ScoutingBandits {
    fn name(&self) -> &'static str {
        "sb"
    }

    fn required_feedback(&self) -> FeedbackKind {
        FeedbackKind::Realistic
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn reset(&mut self, horizon: Option<usize>) -> Result<()> {
        let horizon =
            horizon.ok_or_else(|| Error::param("horizon", "scouting bandits needs the horizon"))?;
        self.state = Some(sb_configure(
            self.density_bound,
            horizon,
            self.epsilon,
            self.bandit,
        )?);
        Ok(())
    }

    fn act(&mut self, round: usize, uniforms: &mut dyn RngCore) -> Price {
        let u = uniforms.random::<f64>();
        self.state
            .as_mut()
            .expect("reset() must precede act()")
            .act(round, u)
    }

    fn observe(&mut self, round: usize, posted: &Price, feedback: &Feedback<Price>) -> Result<()> {
        let fb = expect_realistic(feedback, "sb")?;
        self.state
            .as_mut()
            .expect("reset() must precede observe()")
            .observe(round, *posted, fb);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb(seller_accepts: bool, buyer_accepts: bool) -> RealisticFeedback {
        RealisticFeedback {
            seller_accepts,
            buyer_accepts,
        }
    }

    #[test]
    fn configure_examples() {
        let s = sb_configure(1.0, 10_000, Some(0.1), BanditChoice::Ucb1).unwrap();
        assert_eq!((s.ell, s.delta, s.arms, s.scouting_rounds), (1.0, 0.1, 10, 300));

        let s = sb_configure(1.0, 1000, None, BanditChoice::Ucb1).unwrap();
        assert!((s.epsilon - 0.1).abs() < 1e-15);
        assert_eq!((s.arms, s.scouting_rounds), (10, 300));

        let s = sb_configure(8.0, 100, Some(0.5), BanditChoice::Ucb1).unwrap();
        assert_eq!((s.ell, s.delta, s.arms, s.scouting_rounds), (4.0, 1.0, 8, 7));

        assert_eq!(s.grid[0], 0.0);
        assert!(*s.grid.last().unwrap() < 1.0);
    }

    #[test]
    fn configure_errors_and_clamping() {
        assert!(sb_configure(1.0, 100, Some(0.0), BanditChoice::Ucb1).is_err());
        assert!(sb_configure(1.0, 100, Some(-1.0), BanditChoice::Ucb1).is_err());
        assert!(sb_configure(0.9, 100, None, BanditChoice::Ucb1).is_err());
        assert!(sb_configure(1.0, 0, None, BanditChoice::Ucb1).is_err());
        let s = sb_configure(1.0, 50, Some(0.1), BanditChoice::Ucb1).unwrap();
        assert!(s.clamped);
        assert_eq!(s.scouting_rounds, 50);
    }

    #[test]
    fn grid_prices() {
        let mut s = sb_configure(1.0, 10_000, Some(0.1), BanditChoice::Ucb1).unwrap();
        assert!((s.grid[7] - 0.7).abs() < 1e-15);
        assert_eq!(s.act(1, 0.42).get(), 0.42);
        for t in 1..=300 {
            let p = s.act(t, 0.5);
            s.observe(t, p, fb(false, false));
        }
        assert_eq!(s.phase, Phase::Bandits);
        // UCB1 starts with arm 0
        assert_eq!(s.act(301, 0.9).get(), 0.0);
    }

    #[test]
    fn scouting_indicator_updates() {
        let mut s = sb_configure(1.0, 10_000, Some(0.1), BanditChoice::Ucb1).unwrap();
        let before = s.scouting_counts(7);
        s.observe(1, Price::new(0.42).unwrap(), fb(true, true));
        let after = s.scouting_counts(7);
        assert_eq!((after.0 - before.0, after.1 - before.1), (1, 0));

        let before = s.scouting_counts(3);
        s.observe(2, Price::new(0.42).unwrap(), fb(false, true));
        let after = s.scouting_counts(3);
        assert_eq!((after.0 - before.0, after.1 - before.1), (0, 1));

        // boundary: P == q_i counts on both sides
        let mut s = sb_configure(1.0, 10_000, Some(0.1), BanditChoice::Ucb1).unwrap();
        let q = Price::new(s.grid[4]).unwrap();
        s.observe(1, q, fb(true, true));
        assert_eq!(s.scouting_counts(4), (1, 1));
        assert_eq!(s.scouting_counts(3), (0, 1));
        assert_eq!(s.scouting_counts(5), (1, 0));
    }

    #[test]
    fn bandit_reward_is_halved() {
        struct Spy(std::sync::Arc<std::sync::Mutex<Vec<(usize, f64)>>>);
        impl BanditAlgorithm for Spy {
            fn init(&mut self, _arms: usize, _horizon: usize) {}
            fn select(&mut self) -> usize {
                2
            }
            fn update(&mut self, arm: usize, reward: f64) {
                self.0.lock().unwrap().push((arm, reward));
            }
            fn arms(&self) -> usize {
                10
            }
        }
        let log = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let mut s = sb_configure(1.0, 10_000, Some(0.1), BanditChoice::Ucb1).unwrap();
        s.bandit = Box::new(Spy(log.clone()));
        s.i_hat[2] = 0.2;
        s.j_hat[2] = 0.4;
        s.phase = Phase::Bandits;
        let p = s.act(301, 0.0);
        s.observe(301, p, fb(true, false));
        assert_eq!(log.lock().unwrap().as_slice(), &[(2, 0.2)]);
    }

    #[test]
    fn clamped_run_never_leaves_scouting() {
        let mut s = sb_configure(1.0, 20, Some(0.1), BanditChoice::Ucb1).unwrap();
        for t in 1..=20 {
            let p = s.act(t, (t as f64) / 21.0);
            assert_eq!(p.get(), (t as f64) / 21.0);
            s.observe(t, p, fb(true, true));
        }
        assert_eq!(s.phase, Phase::Scouting);
    }

    #[test]
    fn bandit_phase_finds_a_wide_gap() {
        use crate::dist::MixtureDistribution;
        use crate::harness::{run_episode, Iid};
        // grid {0, 1/2}: arm 0 never trades, arm 1 is optimal
        let law = MixtureDistribution::uniform();
        let mut l = ScoutingBandits::new(1.0, Some(0.5), BanditChoice::Ucb1).unwrap();
        let traj = run_episode(&mut l, &mut Iid::new(&law, "uniform"), 20_000, 3).unwrap();
        let t0 = l.state().unwrap().scouting_rounds;
        assert_eq!(t0, 6);
        let bandit = &traj.rounds[t0..];
        let best = bandit.iter().filter(|r| r.price.get() == 0.5).count();
        assert!(best as f64 > 0.9 * bandit.len() as f64, "{best} of {}", bandit.len());
    }

    #[test]
    fn learner_requires_horizon_and_realistic_feedback() {
        let mut l = ScoutingBandits::new(1.0, None, BanditChoice::Ucb1).unwrap();
        assert!(l.reset(None).is_err());
        l.reset(Some(100)).unwrap();
        let full = Feedback::Full(crate::trade::FullFeedback {
            valuations: crate::trade::ValuationPair::new(0.1, 0.9).unwrap(),
        });
        assert!(l.observe(1, &Price::ZERO, &full).unwrap_err().is_contract());
    }
}
