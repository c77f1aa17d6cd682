//! Invariant checks shared by the property tests and the acceptance run.
//! Each returns a short summary on success.

#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use bilateral_core::adversary::{cantor_step, inv_pow3, CantorState, ExactPrice, ShadowProbe};
use bilateral_core::bandits::BanditChoice;
use bilateral_core::harness::{hindsight_best, pseudo_regret, run_episode, Iid, Scripted};
use bilateral_core::instances::{sqrt_lower_instance, two_third_instance};
use bilateral_core::learners::{sb_configure, FollowBestPrice, Learner, LearnerSpec, Phase};
use bilateral_core::trade::{gain_from_trade, realistic_feedback, Feedback, FullFeedback, SurplusSum};
use bilateral_core::{MixtureDistribution, Price, PricePoint, ValuationPair};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_pair(rng: &mut ChaCha8Rng, lattice: Option<u32>) -> ValuationPair {
    let mut draw = || match lattice {
        Some(n) => f64::from(rng.random_range(0..=n)) / f64::from(n),
        None => rng.random::<f64>(),
    };
    let (s, b) = (draw(), draw());
    ValuationPair::new(s, b).unwrap()
}

fn total(p: &Price, pairs: &[ValuationPair]) -> f64 {
    pairs.iter().map(|v| gain_from_trade(p, v)).sum()
}

fn exact_total(p: &Price, pairs: &[ValuationPair]) -> SurplusSum {
    pairs.iter().map(|v| SurplusSum::of(gain_from_trade(p, v))).sum()
}

/// FBP's price beats every candidate after every round, `t <= 200`.
pub fn fbp_argmax_matches_enumeration() -> Check {
    let mut histories = 0;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lattice = if seed % 2 == 0 { Some(40) } else { None };
        let mut l = FollowBestPrice::<Price>::new();
        let mut pairs = Vec::new();
        for t in 1..=200 {
            let v = random_pair(&mut rng, lattice);
            pairs.push(v);
            let fb = Feedback::Full(FullFeedback { valuations: v });
            l.observe(t, &Price::ZERO, &fb).map_err(|e| e.to_string())?;
            let best = l.best_price();
            let got = exact_total(&best, &pairs);
            for c in pairs.iter().flat_map(|v| [v.s, v.b]) {
                let other = exact_total(&c, &pairs);
                ensure(got >= other, || {
                    format!("seed {seed} t {t}: {} loses to {}", best.get(), c.get())
                })?;
                // ties resolve to the smallest candidate
                ensure(c.get() >= best.get() || other < got, || {
                    format!("seed {seed} t {t}: tie at smaller {}", c.get())
                })?;
            }
        }
        histories += 1;
    }
    Ok(format!("{histories} histories x 200 rounds"))
}

/// Scouting estimates match the closed-form integrals within 4 standard
/// errors over 200 independent phases.
pub fn scouting_is_unbiased() -> Check {
    let law = two_third_instance(0.3).unwrap();
    let m = law.marginal_density_bound().unwrap();
    let phases = 200;
    let cfg = sb_configure(m, 1_000_000, Some(0.25), BanditChoice::Ucb1).map_err(|e| e.to_string())?;
    let k = cfg.arms;
    let mut i_samples = vec![Vec::with_capacity(phases); k];
    let mut j_samples = vec![Vec::with_capacity(phases); k];
    for phase in 0..phases {
        let mut st = sb_configure(m, 1_000_000, Some(0.25), BanditChoice::Ucb1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + phase as u64);
        for t in 1..=st.scouting_rounds {
            let v = law.sample_with(&mut rng);
            let p = st.act(t, rng.random());
            st.observe(t, p, realistic_feedback(&p, &v));
        }
        ensure(st.phase == Phase::Bandits, || "scouting did not end".into())?;
        for i in 0..k {
            i_samples[i].push(st.i_hat[i]);
            j_samples[i].push(st.j_hat[i]);
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let q = cfg.grid[i];
        for (samples, exact, what) in [
            (&i_samples[i], law.integrated_seller_cdf(q), "I"),
            (&j_samples[i], law.integrated_buyer_survival(q), "J"),
        ] {
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let z = if se == 0.0 {
                ensure((mean - exact).abs() < 1e-12, || format!("{what}_{i}: {mean} vs {exact}"))?;
                0.0
            } else {
                (mean - exact).abs() / se
            };
            ensure(z <= 4.0, || format!("{what}_{i}: mean {mean} vs {exact} ({z:.2} se)"))?;
            worst = worst.max(z);
        }
    }
    Ok(format!("{k} arms, T0 = {}, max |z| = {worst:.2}", cfg.scouting_rounds))
}

/// Adversary intervals are nested with width exactly `scale / 3^t`.
pub fn adversary_nesting_is_exact() -> Check {
    let rounds = 80;
    for (label, spec) in [
        ("fbp", LearnerSpec::Fbp { initial_price: 0.0 }),
        ("uniform", LearnerSpec::Uniform),
    ] {
        let factory = || spec.build_generic::<ExactPrice>();
        let mut probe = ShadowProbe::new(factory, 16, rounds, 5).map_err(|e| e.to_string())?;
        let mut state = CantorState::new(0.05).unwrap();
        let scale = BigRational::from_float(state.ledger().scale()).unwrap();
        let mut prev = (state.c().exact_value(), state.d().exact_value());
        for t in 1..=rounds {
            let (pair, _) = cantor_step(&mut state, &mut probe).map_err(|e| e.to_string())?;
            let (c, d) = (state.c().exact_value(), state.d().exact_value());
            ensure(prev.0 <= c && c <= d && d <= prev.1, || format!("{label}: not nested at {t}"))?;
            ensure(&d - &c == &scale * inv_pow3(t), || format!("{label}: width at {t}"))?;
            ensure(
                pair.s.exact_value() <= c && d <= pair.b.exact_value(),
                || format!("{label}: interval escapes round {t}"),
            )?;
            prev = (c, d);
        }
    }
    Ok(format!("fbp and uniform probes, {rounds} rounds, exact rationals"))
}

/// Sweep-line hindsight optimum agrees with a dense grid plus candidates.
pub fn hindsight_matches_grid() -> Check {
    let grid: Vec<Price> = (0..=100_000).map(|i| Price::new(i as f64 / 1e5).unwrap()).collect();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let len = rng.random_range(1..=100);
        let lattice = if seed % 3 == 0 { Some(20) } else { None };
        let pairs: Vec<ValuationPair> = (0..len).map(|_| random_pair(&mut rng, lattice)).collect();
        let (p, best) = hindsight_best(&pairs).map_err(|e| e.to_string())?;
        ensure((total(&p, &pairs) - best).abs() < 1e-9, || format!("seed {seed}: reported total"))?;
        let brute = grid
            .iter()
            .copied()
            .chain(pairs.iter().flat_map(|v| [v.s, v.b]))
            .map(|c| total(&c, &pairs))
            .fold(f64::NEG_INFINITY, f64::max);
        ensure((brute - best).abs() < 1e-9, || format!("seed {seed}: {best} vs brute {brute}"))?;
    }
    Ok("100 trajectories".into())
}

/// Hindsight regret >= 0 exactly and pseudo-regret >= -1e-9.
pub fn regret_is_nonnegative() -> Check {
    let laws: Vec<(&str, MixtureDistribution)> = vec![
        ("uniform", MixtureDistribution::uniform()),
        ("sqrt_lower(0.3)", sqrt_lower_instance(0.3).unwrap()),
        ("two_third(-0.3)", two_third_instance(-0.3).unwrap()),
    ];
    let specs = [
        LearnerSpec::Fbp { initial_price: 0.0 },
        LearnerSpec::Uniform,
        LearnerSpec::Fixed { price: 0.42 },
        LearnerSpec::Sb {
            density_bound: None,
            epsilon: None,
            bandit: BanditChoice::Ucb1,
            doubling: false,
        },
    ];
    let mut episodes = 0;
    for (name, law) in &laws {
        for spec in &specs {
            for seed in 0..5 {
                let mut l = spec.build(law.marginal_density_bound()).unwrap();
                let traj = run_episode(&mut l, &mut Iid::new(law, *name), 2000, seed).unwrap();
                let pairs: Vec<_> = traj.rounds.iter().map(|r| r.pair).collect();
                let (_, best) = hindsight_best(&pairs).unwrap();
                let own: f64 = traj.learner_gft();
                ensure(best >= own, || format!("{name}/{}: hindsight {best} < {own}", spec.label()))?;
                let pr = pseudo_regret(law, &traj).unwrap();
                ensure(pr >= -1e-9, || format!("{name}/{}: pseudo-regret {pr}", spec.label()))?;
                episodes += 1;
            }
        }
    }
    Ok(format!("{episodes} episodes"))
}

fn digest(bytes: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    bytes.hash(&mut h);
    h.finish()
}

/// Same learner, instance, horizon and seed give byte-identical CSV.
pub fn episodes_are_deterministic() -> Check {
    let law = two_third_instance(0.3).unwrap();
    let specs = [
        LearnerSpec::Fbp { initial_price: 0.0 },
        LearnerSpec::Uniform,
        LearnerSpec::Sb {
            density_bound: None,
            epsilon: None,
            bandit: BanditChoice::Ucb1,
            doubling: false,
        },
        LearnerSpec::Sb {
            density_bound: Some(24.0),
            epsilon: Some(0.1),
            bandit: BanditChoice::ActionElimination,
            doubling: true,
        },
    ];
    let mut digests = Vec::new();
    for spec in &specs {
        let csv = || {
            let mut l = spec.build(law.marginal_density_bound()).unwrap();
            let traj = run_episode(&mut l, &mut Iid::new(&law, "two_third(0.3)"), 5000, 77).unwrap();
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).unwrap();
            buf
        };
        let (a, b) = (csv(), csv());
        ensure(a == b, || format!("{} is not reproducible", spec.label()))?;
        digests.push(format!("{}={:016x}", spec.label(), digest(&a)));
    }
    // a scripted run replays identically as well
    let pairs: Vec<ValuationPair> = {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (0..300).map(|_| random_pair(&mut rng, None)).collect()
    };
    let replay = || {
        let mut l = FollowBestPrice::<Price>::new();
        run_episode(&mut l, &mut Scripted::new(pairs.clone()), 300, 0).unwrap()
    };
    ensure(replay() == replay(), || "scripted replay differs".into())?;
    Ok(digests.join(" "))
}

/// The exact-price FBP posts the same prices as the `f64` one on data both
/// can represent.
pub fn exact_and_float_fbp_agree() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut a = FollowBestPrice::<Price>::new();
    let mut b = FollowBestPrice::<ExactPrice>::new();
    for t in 1..=500 {
        let v = random_pair(&mut rng, Some(50));
        let w = ValuationPair {
            s: ExactPrice::Float(v.s.get()),
            b: ExactPrice::Float(v.b.get()),
        };
        a.observe(t, &Price::ZERO, &Feedback::Full(FullFeedback { valuations: v }))
            .unwrap();
        b.observe(t, &ExactPrice::Float(0.0), &Feedback::Full(FullFeedback { valuations: w }))
            .unwrap();
        ensure(a.best_price().get() == b.best_price().to_f64(), || format!("round {t}"))?;
    }
    Ok("500 rounds".into())
}
