//! Downlink power allocation, SIC-aware SINR, and spectral-efficiency
//! aggregation.
//!
//! Within a gain-ordered cluster (strongest first) the user at position i
//! cancels the signals of every user listed after it (perfect SIC) and is
//! interfered by the users listed before it. Power fractions follow a
//! geometric split so that weaker users receive more power. Other beams
//! active in the same slot contribute `P_tx * |h^H f_b'|^2` of inter-beam
//! interference.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::channel::{effective_gain, Codebook, UserChannel};
use crate::clustering::{Cluster, Schedule};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    /// Total transmit power per beam, watts. Zero is allowed and yields
    /// zero rates.
    pub tx_power: f64,
    /// Noise power sigma^2, watts.
    pub noise_power: f64,
    /// Geometric power-split ratio alpha in (0, 1).
    pub power_split_ratio: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self { tx_power: 1.0, noise_power: 1e-3, power_split_ratio: 0.25 }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power >= 0.0) {
            return Err(SimError::Domain("radio.tx_power: must be >= 0".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(SimError::Domain("radio.noise_power: must be > 0".into()));
        }
        if !(self.power_split_ratio > 0.0 && self.power_split_ratio < 1.0) {
            return Err(SimError::Domain("radio.power_split_ratio: must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-user share of one cluster's transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub fractions: BTreeMap<u32, f64>,
    pub total_power: f64,
}

/// SINR and achievable rate of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    pub sinr: f64,
    /// `log2(1 + sinr)`, bits/s/Hz.
    pub rate: f64,
}

/// Link quality of every user served in one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkMetrics {
    pub links: BTreeMap<u32, LinkStats>,
}

/// Spectral-efficiency summary of a schedule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemMetrics {
    /// Sum rate of each slot, bits/s/Hz.
    pub per_slot_sum: Vec<f64>,
    /// Arithmetic mean of `per_slot_sum` (0 for an empty schedule).
    pub avg_se: f64,
    pub per_user_rate: BTreeMap<u32, f64>,
}

impl SystemMetrics {
    pub fn is_finite(&self) -> bool {
        self.avg_se.is_finite()
            && self.per_slot_sum.iter().all(|x| x.is_finite())
            && self.per_user_rate.values().all(|x| x.is_finite())
    }

    /// Combines the metrics of consecutive frames: slot sums concatenate,
    /// the average is taken over all slots, and per-user rates are averaged
    /// over the frames in which the user appears.
    pub fn merge(frames: &[SystemMetrics]) -> SystemMetrics {
        let mut per_slot_sum = Vec::new();
        let mut rate_sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for frame in frames {
            per_slot_sum.extend_from_slice(&frame.per_slot_sum);
            for (&u, &r) in &frame.per_user_rate {
                let e = rate_sums.entry(u).or_insert((0.0, 0));
                e.0 += r;
                e.1 += 1;
            }
        }
        let avg_se = if per_slot_sum.is_empty() {
            0.0
        } else {
            per_slot_sum.iter().sum::<f64>() / per_slot_sum.len() as f64
        };
        let per_user_rate =
            rate_sums.into_iter().map(|(u, (s, n))| (u, s / n as f64)).collect();
        SystemMetrics { per_slot_sum, avg_se, per_user_rate }
    }
}

/// Geometric power split over a SIC-ordered cluster (strongest first).
///
/// Position i of K receives `alpha^(K-1-i) * (1-alpha) / (1-alpha^K)`, so
/// fractions sum to one and decrease toward stronger users; a singleton
/// gets everything.
pub fn allocate_power(cluster: &Cluster, config: &RadioConfig) -> Result<PowerAllocation> {
    config.validate()?;
    let k = cluster.users.len();
    if k == 0 {
        return Err(SimError::Domain("allocate_power: empty cluster".into()));
    }
    let mut fractions = BTreeMap::new();
    if k == 1 {
        fractions.insert(cluster.users[0], 1.0);
    } else {
        let alpha = config.power_split_ratio;
        let scale = (1.0 - alpha) / (1.0 - alpha.powi(k as i32));
        for (i, &user) in cluster.users.iter().enumerate() {
            fractions.insert(user, alpha.powi((k - 1 - i) as i32) * scale);
        }
    }
    Ok(PowerAllocation { fractions, total_power: config.tx_power })
}

/// SINR and rate for every user of a slot, with intra-cluster residual
/// interference from earlier-listed users and inter-beam interference from
/// the other clusters active in the slot.
pub fn compute_sinr(
    slot: &[Cluster],
    channels: &BTreeMap<u32, UserChannel>,
    codebook: &Codebook,
    allocations: &BTreeMap<usize, PowerAllocation>,
    config: &RadioConfig,
) -> Result<LinkMetrics> {
    config.validate()?;
    let mut links = BTreeMap::new();
    for cluster in slot {
        if cluster.beam_index >= codebook.beam_count() {
            return Err(SimError::Domain(format!(
                "cluster beam {} outside codebook of {} beams",
                cluster.beam_index,
                codebook.beam_count()
            )));
        }
        let allocation = allocations.get(&cluster.beam_index).ok_or_else(|| {
            SimError::Domain(format!("missing power allocation for beam {}", cluster.beam_index))
        })?;
        let beam = codebook.beam(cluster.beam_index);
        for (i, &user) in cluster.users.iter().enumerate() {
            let ch = channels
                .get(&user)
                .ok_or_else(|| SimError::Lookup(format!("no channel for user {user}")))?;
            let own_gain = effective_gain(&ch.coefficients, beam);
            let fraction = *allocation.fractions.get(&user).ok_or_else(|| {
                SimError::Domain(format!("missing power fraction for user {user}"))
            })?;

            let mut intra = 0.0;
            for &earlier in &cluster.users[..i] {
                intra += allocation.fractions[&earlier];
            }
            let intra_power = intra * allocation.total_power * own_gain;

            let mut inter = 0.0;
            for other in slot {
                if other.beam_index != cluster.beam_index {
                    inter += config.tx_power
                        * effective_gain(&ch.coefficients, codebook.beam(other.beam_index));
                }
            }

            let sinr = fraction * allocation.total_power * own_gain
                / (intra_power + inter + config.noise_power);
            links.insert(user, LinkStats { sinr, rate: (1.0 + sinr).log2() });
        }
    }
    Ok(LinkMetrics { links })
}

/// Aggregates per-slot link metrics into slot sum rates and their mean.
pub fn spectral_efficiency(schedule: &Schedule, per_slot: &[LinkMetrics]) -> Result<SystemMetrics> {
    if per_slot.len() != schedule.slots.len() {
        return Err(SimError::Domain(format!(
            "spectral_efficiency: {} metric sets for {} slots",
            per_slot.len(),
            schedule.slots.len()
        )));
    }
    let mut per_slot_sum = Vec::with_capacity(schedule.slots.len());
    let mut per_user_rate = BTreeMap::new();
    for (slot, metrics) in schedule.slots.iter().zip(per_slot) {
        let mut sum = 0.0;
        for cluster in slot {
            for &user in &cluster.users {
                let stats = metrics
                    .links
                    .get(&user)
                    .ok_or_else(|| SimError::Lookup(format!("no link metrics for user {user}")))?;
                sum += stats.rate;
                per_user_rate.insert(user, stats.rate);
            }
        }
        per_slot_sum.push(sum);
    }
    let avg_se = if per_slot_sum.is_empty() {
        0.0
    } else {
        per_slot_sum.iter().sum::<f64>() / per_slot_sum.len() as f64
    };
    Ok(SystemMetrics { per_slot_sum, avg_se, per_user_rate })
}

/// Allocates power, computes SINR per slot, and aggregates — the full PHY
/// evaluation of one schedule against a set of channels.
pub fn evaluate_schedule(
    schedule: &Schedule,
    channels: &BTreeMap<u32, UserChannel>,
    codebook: &Codebook,
    config: &RadioConfig,
) -> Result<(SystemMetrics, Vec<LinkMetrics>)> {
    let mut per_slot = Vec::with_capacity(schedule.slots.len());
    for slot in &schedule.slots {
        let mut allocations = BTreeMap::new();
        for cluster in slot {
            allocations.insert(cluster.beam_index, allocate_power(cluster, config)?);
        }
        per_slot.push(compute_sinr(slot, channels, codebook, &allocations, config)?);
    }
    let metrics = spectral_efficiency(schedule, &per_slot)?;
    Ok((metrics, per_slot))
}
