//! Near/far labeling and NOMA user pairing.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Label, UserLink};
use crate::error::{Error, Result};
use crate::svm::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Classifier-driven: one classified-near with one classified-far user.
    Proposed,
    Random,
}

/// How near and far users are matched once classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    #[default]
    Uniform,
    /// Strongest estimated near user with weakest estimated far user, and so on.
    Sorted,
}

/// Which member of a random pair receives the SIC role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleAssignment {
    /// Higher true gain is near (correct decoding order).
    ScenarioA,
    /// Lower true gain is near (incorrect decoding order).
    ScenarioB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPair {
    pub near: UserLink,
    pub far: UserLink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingOutcome {
    pub pairs: Vec<UserPair>,
    pub leftover: Vec<usize>,
    pub strategy: Strategy,
}

impl PairingOutcome {
    /// Paired ids followed by leftover ids.
    pub fn user_ids(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .flat_map(|p| [p.near.id, p.far.id])
            .chain(self.leftover.iter().copied())
            .collect()
    }
}

/// Median split on true gain: near iff strictly above the median.
///
/// Users exactly at the median are far, so an all-equal cohort is all far.
pub fn label_users(users: &mut [UserLink]) -> Result<()> {
    if users.len() < 2 {
        return Err(Error::domain(format!(
            "labeling needs at least 2 users, got {}",
            users.len()
        )));
    }
    let median = median(users.iter().map(UserLink::gain_true).collect());
    for u in users.iter_mut() {
        u.label = Some(if u.gain_true() > median {
            Label::Near
        } else {
            Label::Far
        });
    }
    Ok(())
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Observable link budget `(θ, |ĥ|²)`.
pub fn features(user: &UserLink) -> [f64; 2] {
    [user.theta_deg, user.gain_est()]
}

/// Training samples from labeled users; unlabeled users are skipped.
pub fn samples(users: &[UserLink]) -> Vec<Sample> {
    users
        .iter()
        .filter_map(|u| u.label.map(|label| Sample::new(features(u), label)))
        .collect()
}

/// Matches classified-near with classified-far users until one side runs out.
pub fn propose_pairs<R: Rng + ?Sized>(
    mut near: Vec<UserLink>,
    mut far: Vec<UserLink>,
    matching: Matching,
    rng: &mut R,
) -> PairingOutcome {
    match matching {
        Matching::Uniform => {
            near.shuffle(rng);
            far.shuffle(rng);
        }
        Matching::Sorted => {
            near.sort_by(|a, b| b.gain_est().total_cmp(&a.gain_est()).then(a.id.cmp(&b.id)));
            far.sort_by(|a, b| a.gain_est().total_cmp(&b.gain_est()).then(a.id.cmp(&b.id)));
        }
    }
    let count = near.len().min(far.len());
    let leftover = near[count..]
        .iter()
        .chain(&far[count..])
        .map(|u| u.id)
        .collect();
    let pairs = near
        .into_iter()
        .zip(far)
        .map(|(near, far)| UserPair { near, far })
        .collect();
    PairingOutcome {
        pairs,
        leftover,
        strategy: Strategy::Proposed,
    }
}

/// Uniformly random disjoint pairs ignoring labels.
pub fn random_pairs<R: Rng + ?Sized>(
    users: &[UserLink],
    roles: RoleAssignment,
    rng: &mut R,
) -> Result<PairingOutcome> {
    if users.len() < 2 {
        return Err(Error::domain(format!(
            "random pairing needs at least 2 users, got {}",
            users.len()
        )));
    }
    let mut order: Vec<&UserLink> = users.iter().collect();
    order.shuffle(rng);
    let pairs = order
        .chunks_exact(2)
        .map(|chunk| {
            let (a, b) = (chunk[0].clone(), chunk[1].clone());
            let a_stronger = a.gain_true() >= b.gain_true();
            let (near, far) = match (roles, a_stronger) {
                (RoleAssignment::ScenarioA, true) | (RoleAssignment::ScenarioB, false) => (a, b),
                _ => (b, a),
            };
            UserPair { near, far }
        })
        .collect();
    let leftover = order
        .chunks_exact(2)
        .remainder()
        .iter()
        .map(|u| u.id)
        .collect();
    Ok(PairingOutcome {
        pairs,
        leftover,
        strategy: Strategy::Random,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    use crate::channel::{place_users, Deployment};
    use crate::rng::RngStream;

    fn user(id: usize, gain: f64) -> UserLink {
        let h = Complex64::new(gain.sqrt(), 0.0);
        UserLink {
            id,
            theta_deg: 30.0 + id as f64,
            position: [0.0, 0.0],
            h_true: h,
            h_est: h,
            label: None,
        }
    }

    fn rng(id: u64) -> crate::rng::StreamRng {
        RngStream::new(3, id).generator()
    }

    #[test]
    fn median_split_labels() {
        let mut users: Vec<UserLink> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| user(i, g))
            .collect();
        label_users(&mut users).unwrap();
        let labels: Vec<Label> = users.iter().map(|u| u.label.unwrap()).collect();
        assert_eq!(labels, [Label::Far, Label::Far, Label::Near, Label::Near]);

        let mut flat: Vec<UserLink> = (0..5).map(|i| user(i, 0.7)).collect();
        label_users(&mut flat).unwrap();
        assert!(flat.iter().all(|u| u.label == Some(Label::Far)));

        assert!(label_users(&mut [user(0, 1.0)]).is_err());
    }

    #[test]
    fn cohort_split_is_balanced() {
        for seed in 0..5 {
            let mut users =
                place_users(50, &Deployment::default(), &RngStream::new(seed, 0)).unwrap();
            label_users(&mut users).unwrap();
            let near = users
                .iter()
                .filter(|u| u.label == Some(Label::Near))
                .count();
            assert_eq!(near, 25);
        }
    }

    #[test]
    fn features_use_estimated_gain() {
        let mut u = user(0, 1.0);
        u.theta_deg = 50.0;
        u.h_est = Complex64::new(1.3f64.sqrt(), 0.0);
        let f = features(&u);
        assert_eq!(f[0], 50.0);
        assert!((f[1] - 1.3).abs() < 1e-12);
        let before = features(&u);
        u.h_est += Complex64::new(0.1, 0.0);
        assert_ne!(features(&u), before);
        assert_eq!(features(&user(4, 0.5)), features(&user(4, 0.5)));
    }

    #[test]
    fn proposed_pair_counts() {
        let near = |n: usize| (0..n).map(|i| user(i, 2.0)).collect::<Vec<_>>();
        let far = |n: usize| (0..n).map(|i| user(100 + i, 0.2)).collect::<Vec<_>>();
        let mut g = rng(1);
        let out = propose_pairs(near(2), far(2), Matching::Uniform, &mut g);
        assert_eq!((out.pairs.len(), out.leftover.len()), (2, 0));
        let out = propose_pairs(near(3), far(1), Matching::Uniform, &mut g);
        assert_eq!((out.pairs.len(), out.leftover.len()), (1, 2));
        let out = propose_pairs(near(0), far(4), Matching::Uniform, &mut g);
        assert_eq!((out.pairs.len(), out.leftover.len()), (0, 4));
        for p in &propose_pairs(near(3), far(3), Matching::Uniform, &mut g).pairs {
            assert!(p.near.id < 100 && p.far.id >= 100);
        }
    }

    #[test]
    fn sorted_matching_pairs_extremes() {
        let near = vec![user(0, 1.0), user(1, 3.0), user(2, 2.0)];
        let far = vec![user(10, 0.3), user(11, 0.1)];
        let out = propose_pairs(near, far, Matching::Sorted, &mut rng(2));
        assert_eq!(out.pairs[0].near.id, 1);
        assert_eq!(out.pairs[0].far.id, 11);
        assert_eq!(out.pairs[1].near.id, 2);
        assert_eq!(out.leftover, vec![0]);
    }

    #[test]
    fn random_pair_counts_and_roles() {
        let users: Vec<UserLink> = (0..9).map(|i| user(i, 0.1 * (i + 1) as f64)).collect();
        let out = random_pairs(&users, RoleAssignment::ScenarioA, &mut rng(3)).unwrap();
        assert_eq!((out.pairs.len(), out.leftover.len()), (4, 1));
        for p in &out.pairs {
            assert!(p.near.gain_true() >= p.far.gain_true());
        }
        let out = random_pairs(&users[..2], RoleAssignment::ScenarioB, &mut rng(4)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert!(out.pairs[0].near.gain_true() < out.pairs[0].far.gain_true());

        let two = [user(0, 2.0), user(1, 0.5)];
        let out = random_pairs(&two, RoleAssignment::ScenarioA, &mut rng(5)).unwrap();
        assert_eq!(out.pairs[0].near.id, 0);
        assert!(random_pairs(&two[..1], RoleAssignment::ScenarioA, &mut rng(5)).is_err());
    }

    #[test]
    fn same_stream_gives_same_random_pairs_for_both_scenarios() {
        let users: Vec<UserLink> = (0..9).map(|i| user(i, 0.3 + 0.1 * i as f64)).collect();
        let a = random_pairs(&users, RoleAssignment::ScenarioA, &mut rng(6)).unwrap();
        let b = random_pairs(&users, RoleAssignment::ScenarioB, &mut rng(6)).unwrap();
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(pa.near.id, pb.far.id);
            assert_eq!(pa.far.id, pb.near.id);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pairings_are_permutations(n_near in 0usize..8, n_far in 0usize..8, seed in any::<u64>()) {
                let near: Vec<UserLink> = (0..n_near).map(|i| user(i, 1.0 + i as f64)).collect();
                let far: Vec<UserLink> = (0..n_far).map(|i| user(50 + i, 0.1)).collect();
                let mut g = RngStream::new(seed, 0).generator();
                let out = propose_pairs(near, far, Matching::Uniform, &mut g);
                let mut ids = out.user_ids();
                ids.sort_unstable();
                let mut expected: Vec<usize> = (0..n_near).chain(50..50 + n_far).collect();
                expected.sort_unstable();
                prop_assert_eq!(ids, expected);
                prop_assert!(out.pairs.iter().all(|p| p.near.id < 50 && p.far.id >= 50));

                let all: Vec<UserLink> = (0..n_near + n_far + 2).map(|i| user(i, 0.2 * i as f64)).collect();
                let out = random_pairs(&all, RoleAssignment::ScenarioA, &mut g).unwrap();
                let mut ids = out.user_ids();
                ids.sort_unstable();
                prop_assert_eq!(ids, (0..all.len()).collect::<Vec<_>>());
            }
        }
    }
}
