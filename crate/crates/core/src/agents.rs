//! Agent behaviour: how much to stake, how long to wait, and what to submit.
//!
//! Good agents forward pool samples, occasionally mislabeling one. Malicious
//! agents corrupt what they submit, either by flipping the label or by
//! replacing the features with random noise.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::contract::{AgentId, Seconds, Units};
use crate::model::LabeledSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    #[default]
    LabelFlip,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: AgentId,
    pub name: String,
    pub honest: bool,
    pub start_balance: Units,
    pub mean_deposit: Units,
    pub stdev_deposit: Units,
    pub mean_update_wait: Seconds,
    pub prob_mistake: f64,
    pub corruption_mode: CorruptionMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSubmission {
    pub at: Seconds,
    pub sample: LabeledSample,
    pub offered_deposit: Units,
}

/// Normal draw around the agent's mean deposit, kept at least one unit
/// above the submission cost so the stake is never empty.
pub fn draw_deposit<R: Rng + ?Sized>(
    profile: &AgentProfile,
    submission_cost: Units,
    rng: &mut R,
) -> Units {
    let normal = Normal::new(profile.mean_deposit as f64, profile.stdev_deposit as f64)
        .expect("stdev is finite and non-negative");
    let draw = normal.sample(rng).round();
    let floor = submission_cost + 1;
    if draw < floor as f64 {
        floor
    } else {
        draw as Units
    }
}

/// Exponential inter-submission wait, rounded up to whole seconds.
pub fn draw_wait<R: Rng + ?Sized>(profile: &AgentProfile, rng: &mut R) -> Seconds {
    let exp = Exp::new(1.0 / profile.mean_update_wait.max(1) as f64).expect("positive rate");
    let w: f64 = exp.sample(rng);
    (w.ceil() as Seconds).max(1)
}

pub fn good_transform<R: Rng + ?Sized>(
    sample: &LabeledSample,
    prob_mistake: f64,
    rng: &mut R,
) -> LabeledSample {
    if rng.random_bool(prob_mistake.clamp(0.0, 1.0)) {
        sample.with_label(sample.label.flipped())
    } else {
        sample.clone()
    }
}

pub fn corrupt<R: Rng + ?Sized>(
    sample: &LabeledSample,
    mode: CorruptionMode,
    num_words: u32,
    rng: &mut R,
) -> LabeledSample {
    match mode {
        CorruptionMode::LabelFlip => sample.with_label(sample.label.flipped()),
        CorruptionMode::Noise => {
            let k = sample.features.len().min(num_words as usize);
            let features = index::sample(rng, num_words as usize, k)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            LabeledSample::new(features, sample.label)
        }
    }
}

/// The deposit an agent actually offers.
///
/// Never less than the contract's current minimum. When paying the usual
/// amount would leave less than the largest deposit the contract could ever
/// demand (`reserve_floor`), the agent stakes its whole free balance instead,
/// so balances run down to exactly zero rather than stranding dust.
pub fn choose_offer(drawn: Units, required: Units, free: Units, reserve_floor: Units) -> Units {
    let desired = drawn.max(required);
    let floor = reserve_floor.max(required);
    if free >= floor && free.saturating_sub(desired) < floor {
        free
    } else {
        desired
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use proptest::prelude::*;

    fn profile(mean_deposit: Units, stdev_deposit: Units, wait: Seconds) -> AgentProfile {
        AgentProfile {
            id: AgentId(0),
            name: "a".into(),
            honest: true,
            start_balance: 1_000_000,
            mean_deposit,
            stdev_deposit,
            mean_update_wait: wait,
            prob_mistake: 0.0,
            corruption_mode: CorruptionMode::LabelFlip,
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn degenerate_deposit() {
        let p = profile(5000, 0, 600);
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(draw_deposit(&p, 500, &mut r), 5000);
        }
    }

    #[test]
    fn deposit_clamped_above_cost() {
        // mean 0.5 token with a huge spread produces negative draws
        let p = profile(50, 100_000, 600);
        let mut r = rng(2);
        let draws: Vec<Units> = (0..200).map(|_| draw_deposit(&p, 500, &mut r)).collect();
        assert!(draws.iter().all(|&d| d >= 501));
        assert!(draws.contains(&501));
    }

    #[test]
    fn deposit_and_wait_deterministic() {
        let p = profile(5000, 1000, 600);
        let (mut a, mut b) = (rng(3), rng(3));
        for _ in 0..50 {
            assert_eq!(draw_deposit(&p, 500, &mut a), draw_deposit(&p, 500, &mut b));
            assert_eq!(draw_wait(&p, &mut a), draw_wait(&p, &mut b));
        }
    }

    #[test]
    fn wait_mean_matches_configured() {
        let p = profile(5000, 0, 600);
        let mut r = rng(4);
        let draws: Vec<Seconds> = (0..10_000).map(|_| draw_wait(&p, &mut r)).collect();
        assert!(draws.iter().all(|&w| w >= 1));
        let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
        // ceil() adds about half a second on average
        assert!((mean - 600.0).abs() <= 30.0, "mean wait {mean}");
    }

    #[test]
    fn good_transform_extremes() {
        let s = LabeledSample::new(vec![1, 4], Label::Positive);
        let mut r = rng(5);
        for _ in 0..100 {
            assert_eq!(good_transform(&s, 0.0, &mut r), s);
            let f = good_transform(&s, 1.0, &mut r);
            assert_eq!(f.label, Label::Negative);
            assert_eq!(f.features, s.features);
        }
    }

    #[test]
    fn rare_mistakes_inside_poisson_band() {
        let s = LabeledSample::new(vec![1], Label::Positive);
        let mut r = rng(6);
        let n = 100_000;
        let p = 0.0001;
        let flips = (0..n)
            .filter(|_| good_transform(&s, p, &mut r).label != s.label)
            .count() as f64;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(flips <= mean + 3.0 * sd, "flips {flips}");
        assert!(flips >= (mean - 3.0 * sd).max(0.0), "flips {flips}");
    }

    #[test]
    fn corrupt_modes() {
        let s = LabeledSample::new(vec![2, 7, 9], Label::Positive);
        let mut r = rng(7);
        let f = corrupt(&s, CorruptionMode::LabelFlip, 10, &mut r);
        assert_eq!(f, LabeledSample::new(vec![2, 7, 9], Label::Negative));
        assert_eq!(corrupt(&f, CorruptionMode::LabelFlip, 10, &mut r), s);
        let n = corrupt(&s, CorruptionMode::Noise, 10, &mut r);
        assert_eq!(n.features.len(), 3);
        assert_eq!(n.label, Label::Positive);
        assert!(n.features.iter().all(|&i| i < 10));
    }

    #[test]
    fn offer_goes_all_in_near_the_floor() {
        assert_eq!(choose_offer(5000, 1000, 1_000_000, 2000), 5000);
        assert_eq!(choose_offer(500, 1000, 1_000_000, 2000), 1000);
        // paying 5000 would strand 1500 < floor 2000
        assert_eq!(choose_offer(5000, 1000, 6500, 2000), 6500);
        assert_eq!(choose_offer(5000, 1000, 3000, 2000), 3000);
        // cannot even reach the floor: offer normally and let the contract refuse
        assert_eq!(choose_offer(5000, 1000, 1500, 2000), 5000);
    }

    proptest! {
        #[test]
        fn policies_never_touch_the_wrong_part(seed in 0u64..1000, feats in prop::collection::btree_set(0u32..20, 0..10), pos in any::<bool>()) {
            let label = if pos { Label::Positive } else { Label::Negative };
            let s = LabeledSample::new(feats.into_iter().collect(), label);
            let mut r = rng(seed);
            prop_assert_eq!(&good_transform(&s, 0.5, &mut r).features, &s.features);
            prop_assert_eq!(&corrupt(&s, CorruptionMode::LabelFlip, 20, &mut r).features, &s.features);
            prop_assert_eq!(corrupt(&s, CorruptionMode::Noise, 20, &mut r).label, s.label);
        }

        #[test]
        fn deposit_floor_holds(seed in 0u64..1000, mean in 0u64..20_000, sd in 0u64..20_000, cost in 0u64..3000) {
            let p = profile(mean, sd, 60);
            prop_assert!(draw_deposit(&p, cost, &mut rng(seed)) > cost);
        }

        #[test]
        fn offer_never_below_required_and_never_strands_dust(drawn in 1u64..10_000, required in 0u64..3000, free in 0u64..50_000, floor in 0u64..3000) {
            let offer = choose_offer(drawn, required, free, floor);
            prop_assert!(offer >= required);
            let floor = floor.max(required);
            if offer <= free && free >= floor {
                let left = free - offer;
                prop_assert!(left == 0 || left >= floor);
            }
        }
    }
}
