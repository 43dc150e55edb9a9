//! Best-beam user clustering: group users by their selected beam, split
//! oversubscribed beams into `ceil(n / n_max)` clusters across consecutive
//! time slots, and order cluster members for SIC decoding.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::channel::{effective_gain, Codebook, UserChannel};
use crate::error::{Result, SimError};

/// Map from user id to selected beam index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BeamAssignment {
    pub by_user: BTreeMap<u32, usize>,
}

impl BeamAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, user_id: u32, beam: usize) {
        self.by_user.insert(user_id, beam);
    }

    pub fn get(&self, user_id: u32) -> Option<usize> {
        self.by_user.get(&user_id).copied()
    }

    pub fn len(&self) -> usize {
        self.by_user.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_user.is_empty()
    }

    /// Fraction of users assigned the same beam as in `reference`.
    pub fn agreement_with(&self, reference: &BeamAssignment) -> f64 {
        if self.by_user.is_empty() {
            return 0.0;
        }
        let hits = self
            .by_user
            .iter()
            .filter(|(u, b)| reference.get(**u) == Some(**b))
            .count();
        hits as f64 / self.by_user.len() as f64
    }
}

impl FromIterator<(u32, usize)> for BeamAssignment {
    fn from_iter<T: IntoIterator<Item = (u32, usize)>>(iter: T) -> Self {
        Self { by_user: iter.into_iter().collect() }
    }
}

/// How cluster members are ordered for SIC decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SicOrdering {
    /// Descending effective gain `|h^H f_b|^2`; requires CSI.
    ByChannelGain,
    /// Ascending user id; usable without any CSI.
    ArbitraryById,
}

/// How an oversubscribed beam's users are distributed over its clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Fill clusters to n_max in ascending user-id order; remainder last.
    GreedyFill,
    /// Near-equal cluster sizes, ascending user-id order.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    /// Maximum users per cluster.
    pub n_max: usize,
    /// Ordering used by the CSI-driven pipeline.
    pub sic_ordering: SicOrdering,
    /// Ordering used by the camera-driven pipeline.
    pub vision_sic_ordering: SicOrdering,
    pub split_policy: SplitPolicy,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            n_max: 4,
            sic_ordering: SicOrdering::ByChannelGain,
            vision_sic_ordering: SicOrdering::ArbitraryById,
            split_policy: SplitPolicy::GreedyFill,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(SimError::Domain("clustering.n_max: must be >= 1".into()));
        }
        Ok(())
    }
}

/// One NOMA cluster: users sharing a beam in one time slot, listed in SIC
/// decode order (strongest first once ordered).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub beam_index: usize,
    pub users: Vec<u32>,
    pub slot_index: usize,
}

/// Clusters laid out over time slots. Within a slot there is at most one
/// cluster per beam; the k-th cluster of a beam sits in slot k.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub slots: Vec<Vec<Cluster>>,
}

impl Schedule {
    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.slots.iter().flatten()
    }

    pub fn user_count(&self) -> usize {
        self.clusters().map(|c| c.users.len()).sum()
    }
}

fn split_sizes(n: usize, n_max: usize, policy: SplitPolicy) -> Vec<usize> {
    let clusters = n.div_ceil(n_max);
    match policy {
        SplitPolicy::GreedyFill => {
            let mut sizes = vec![n_max; clusters];
            let rem = n % n_max;
            if rem != 0 {
                sizes[clusters - 1] = rem;
            }
            sizes
        }
        SplitPolicy::Balanced => {
            let base = n / clusters;
            let extra = n % clusters;
            (0..clusters).map(|k| base + usize::from(k < extra)).collect()
        }
    }
}

/// The NOMA-BB rule: one cluster per (beam, split index), `ceil(n/n_max)`
/// clusters for a beam with n users, none for empty beams. Users fill
/// clusters in ascending id order; cluster k of a beam goes to slot k.
pub fn noma_bb(assignment: &BeamAssignment, config: &ClusteringConfig) -> Result<Schedule> {
    config.validate()?;
    let mut by_beam: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (&user, &beam) in &assignment.by_user {
        by_beam.entry(beam).or_default().push(user);
    }

    let mut schedule = Schedule::default();
    for (beam, users) in by_beam {
        let sizes = split_sizes(users.len(), config.n_max, config.split_policy);
        let mut start = 0;
        for (slot, size) in sizes.into_iter().enumerate() {
            if schedule.slots.len() <= slot {
                schedule.slots.push(Vec::new());
            }
            schedule.slots[slot].push(Cluster {
                beam_index: beam,
                users: users[start..start + size].to_vec(),
                slot_index: slot,
            });
            start += size;
        }
    }
    Ok(schedule)
}

/// Reorders one cluster for SIC decoding.
///
/// `ByChannelGain` sorts by descending `|h^H f_b|^2` (ties by ascending
/// id); `ArbitraryById` sorts by ascending id and touches no CSI.
pub fn order_users_sic(
    cluster: &Cluster,
    channels: &BTreeMap<u32, UserChannel>,
    codebook: &Codebook,
    mode: SicOrdering,
) -> Result<Cluster> {
    let mut users = cluster.users.clone();
    match mode {
        SicOrdering::ArbitraryById => users.sort_unstable(),
        SicOrdering::ByChannelGain => {
            if cluster.beam_index >= codebook.beam_count() {
                return Err(SimError::Domain(format!(
                    "cluster beam {} outside codebook of {} beams",
                    cluster.beam_index,
                    codebook.beam_count()
                )));
            }
            let beam = codebook.beam(cluster.beam_index);
            let mut keyed = Vec::with_capacity(users.len());
            for user in users {
                let ch = channels.get(&user).ok_or_else(|| {
                    SimError::Lookup(format!("no channel for user {user} in SIC ordering"))
                })?;
                keyed.push((user, effective_gain(&ch.coefficients, beam)));
            }
            keyed.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
            });
            users = keyed.into_iter().map(|(u, _)| u).collect();
        }
    }
    Ok(Cluster { beam_index: cluster.beam_index, users, slot_index: cluster.slot_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, generate_dft_codebook, ArrayGeometry, GainModel};
    use crate::rng::derive_rng;
    use crate::types::Position;
    use num_complex::Complex64;
    use rand::Rng;

    fn assignment_of(pairs: &[(u32, usize)]) -> BeamAssignment {
        pairs.iter().copied().collect()
    }

    #[test]
    fn seven_users_n_max_three_splits_3_3_1() {
        let assignment = assignment_of(&(0..7).map(|u| (u, 5usize)).collect::<Vec<_>>());
        let config = ClusteringConfig { n_max: 3, ..Default::default() };
        let schedule = noma_bb(&assignment, &config).unwrap();
        assert_eq!(schedule.depth(), 3);
        let sizes: Vec<usize> = schedule.clusters().map(|c| c.users.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        for (k, slot) in schedule.slots.iter().enumerate() {
            assert_eq!(slot.len(), 1);
            assert_eq!(slot[0].slot_index, k);
            assert_eq!(slot[0].beam_index, 5);
        }
        assert_eq!(schedule.slots[0][0].users, vec![0, 1, 2]);
        assert_eq!(schedule.slots[2][0].users, vec![6]);
    }

    #[test]
    fn empty_beams_produce_no_clusters() {
        let assignment = assignment_of(&[(1, 2), (2, 2)]);
        let schedule = noma_bb(&assignment, &ClusteringConfig::default()).unwrap();
        assert_eq!(schedule.cluster_count(), 1);
        assert!(schedule.clusters().all(|c| c.beam_index == 2 && !c.users.is_empty()));
    }

    #[test]
    fn distinct_beams_give_singletons_in_slot_zero() {
        let assignment = assignment_of(&[(0, 3), (1, 9), (2, 17), (3, 60)]);
        let schedule = noma_bb(&assignment, &ClusteringConfig::default()).unwrap();
        assert_eq!(schedule.depth(), 1);
        assert_eq!(schedule.cluster_count(), 4);
        assert!(schedule.slots[0].iter().all(|c| c.users.len() == 1 && c.slot_index == 0));
    }

    #[test]
    fn count_law_matches_histogram_oracle() {
        let mut rng = derive_rng(21, &[0]);
        for trial in 0..50 {
            let n_users = rng.gen_range(1..=200);
            let n_max = rng.gen_range(1..=8);
            let assignment: BeamAssignment =
                (0..n_users).map(|u| (u, rng.gen_range(0..64usize))).collect();
            let config = ClusteringConfig { n_max, ..Default::default() };
            let schedule = noma_bb(&assignment, &config).unwrap();

            // Brute-force histogram + ceiling sum.
            let mut hist = BTreeMap::new();
            for &b in assignment.by_user.values() {
                *hist.entry(b).or_insert(0usize) += 1;
            }
            let expected_total: usize = hist.values().map(|n| n.div_ceil(n_max)).sum();
            assert_eq!(schedule.cluster_count(), expected_total, "trial {trial}");

            let mut per_beam = BTreeMap::new();
            let mut seen = BTreeMap::new();
            for c in schedule.clusters() {
                assert!(!c.users.is_empty() && c.users.len() <= n_max);
                *per_beam.entry(c.beam_index).or_insert(0usize) += 1;
                for &u in &c.users {
                    *seen.entry(u).or_insert(0usize) += 1;
                }
            }
            for (b, n) in &hist {
                assert_eq!(per_beam[b], n.div_ceil(n_max));
            }
            assert!(seen.values().all(|&k| k == 1));
            assert_eq!(seen.len(), n_users as usize);

            let expected_depth = hist.values().map(|n| n.div_ceil(n_max)).max().unwrap();
            assert_eq!(schedule.depth(), expected_depth);
        }
    }

    #[test]
    fn balanced_split_evens_out_sizes() {
        let assignment = assignment_of(&(0..7).map(|u| (u, 0usize)).collect::<Vec<_>>());
        let config = ClusteringConfig {
            n_max: 3,
            split_policy: SplitPolicy::Balanced,
            ..Default::default()
        };
        let schedule = noma_bb(&assignment, &config).unwrap();
        let sizes: Vec<usize> = schedule.clusters().map(|c| c.users.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        assert_eq!(schedule.cluster_count(), 3);
    }

    #[test]
    fn noma_bb_is_deterministic() {
        let mut rng = derive_rng(22, &[0]);
        let assignment: BeamAssignment =
            (0..120u32).map(|u| (u, rng.gen_range(0..16usize))).collect();
        let config = ClusteringConfig { n_max: 5, ..Default::default() };
        let a = noma_bb(&assignment, &config).unwrap();
        let b = noma_bb(&assignment, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_ordering_puts_strong_user_first() {
        let geometry = ArrayGeometry { num_antennas: 1, element_spacing: 0.5 };
        let codebook = generate_dft_codebook(&geometry, 1).unwrap();
        let mut channels = BTreeMap::new();
        for (id, amp) in [(4u32, 1.0f64), (9u32, 0.5f64)] {
            channels.insert(
                id,
                UserChannel {
                    user_id: id,
                    coefficients: vec![Complex64::new(amp, 0.0)],
                    path_gain: Complex64::new(amp, 0.0),
                    aoa: 0.0,
                },
            );
        }
        let cluster = Cluster { beam_index: 0, users: vec![9, 4], slot_index: 0 };
        let ordered =
            order_users_sic(&cluster, &channels, &codebook, SicOrdering::ByChannelGain).unwrap();
        assert_eq!(ordered.users, vec![4, 9]);
    }

    #[test]
    fn arbitrary_ordering_sorts_by_id() {
        let codebook = generate_dft_codebook(&ArrayGeometry::default(), 4).unwrap();
        let cluster = Cluster { beam_index: 1, users: vec![9, 2, 5], slot_index: 0 };
        let ordered =
            order_users_sic(&cluster, &BTreeMap::new(), &codebook, SicOrdering::ArbitraryById)
                .unwrap();
        assert_eq!(ordered.users, vec![2, 5, 9]);
    }

    #[test]
    fn gain_ordering_matches_oracle_sort_and_scaling_invariance() {
        let geometry = ArrayGeometry { num_antennas: 32, element_spacing: 0.5 };
        let codebook = generate_dft_codebook(&geometry, 32).unwrap();
        let bs = Position::new(0.0, 0.0);
        let mut rng = derive_rng(23, &[0]);
        for _ in 0..20 {
            let mut channels = BTreeMap::new();
            let users: Vec<u32> = (0..6).collect();
            for &u in &users {
                let p = Position::new(rng.gen::<f64>() * 8.0 - 4.0, rng.gen::<f64>() * 6.0 + 0.5);
                channels.insert(
                    u,
                    generate_channel(&geometry, &GainModel::default(), u, p, bs, &mut rng).unwrap(),
                );
            }
            let cluster = Cluster { beam_index: 7, users: users.clone(), slot_index: 0 };
            let ordered =
                order_users_sic(&cluster, &channels, &codebook, SicOrdering::ByChannelGain)
                    .unwrap();

            // Independent full sort of recomputed gains.
            let beam = codebook.beam(7);
            let mut expected: Vec<(u32, f64)> = users
                .iter()
                .map(|&u| (u, effective_gain(&channels[&u].coefficients, beam)))
                .collect();
            expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let expected: Vec<u32> = expected.into_iter().map(|(u, _)| u).collect();
            assert_eq!(ordered.users, expected);

            // Common positive scaling of every channel leaves the order alone.
            let scale = Complex64::new(3.5, 0.0);
            let scaled: BTreeMap<u32, UserChannel> = channels
                .iter()
                .map(|(&u, ch)| {
                    (
                        u,
                        UserChannel {
                            user_id: u,
                            coefficients: ch.coefficients.iter().map(|c| c * scale).collect(),
                            path_gain: ch.path_gain * scale,
                            aoa: ch.aoa,
                        },
                    )
                })
                .collect();
            let reordered =
                order_users_sic(&cluster, &scaled, &codebook, SicOrdering::ByChannelGain).unwrap();
            assert_eq!(reordered.users, ordered.users);
        }
    }

    #[test]
    fn gain_ordering_without_channel_is_a_lookup_error() {
        let codebook = generate_dft_codebook(&ArrayGeometry::default(), 8).unwrap();
        let cluster = Cluster { beam_index: 0, users: vec![1], slot_index: 0 };
        let err = order_users_sic(&cluster, &BTreeMap::new(), &codebook, SicOrdering::ByChannelGain);
        assert!(matches!(err, Err(SimError::Lookup(_))));
    }
}
