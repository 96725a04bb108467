use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::AvailabilityModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SiteState {
    Online,
    Offline,
}

impl SiteState {
    pub fn is_online(self) -> bool {
        self == SiteState::Online
    }
}

/// Independent RNG stream for `(seed, tag, index)`.
pub(crate) fn stream_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in [0,1) determined by `(seed, site, slot)`.
pub(crate) fn slot_uniform(seed: u64, site: usize, slot: i64) -> f64 {
    let h = mix64(seed ^ mix64(site as u64 ^ mix64(slot as u64 ^ 0x9e37_79b9_7f4a_7c15)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Lazily extended on/off timeline of one site under the renewal model.
///
/// Segment `j` covers `[ends[j-1], ends[j])` (with `ends[-1] = 0`); states
/// alternate starting from `starts_online`.
#[derive(Debug, Clone)]
pub(crate) struct ChurnTrace {
    rng: ChaCha8Rng,
    online: Exp<f64>,
    offline: Exp<f64>,
    starts_online: bool,
    ends: Vec<f64>,
}

impl ChurnTrace {
    /// Both means must be positive; degenerate cases are handled by the caller.
    pub(crate) fn new(seed: u64, site: usize, mean_online: f64, mean_offline: f64) -> Self {
        let mut rng = stream_rng(seed, "churn", site as u64);
        let p_online = mean_online / (mean_online + mean_offline);
        let starts_online = rng.random::<f64>() < p_online;
        ChurnTrace {
            rng,
            online: Exp::new(1.0 / mean_online).expect("positive mean"),
            offline: Exp::new(1.0 / mean_offline).expect("positive mean"),
            starts_online,
            ends: Vec::new(),
        }
    }

    pub(crate) fn state_at(&mut self, t: f64) -> SiteState {
        while self.ends.last().is_none_or(|&end| end <= t) {
            let online_segment = (self.ends.len() % 2 == 0) == self.starts_online;
            let d = if online_segment {
                self.online.sample(&mut self.rng)
            } else {
                self.offline.sample(&mut self.rng)
            };
            let start = self.ends.last().copied().unwrap_or(0.0);
            self.ends.push(start + d);
        }
        let segment = self.ends.partition_point(|&end| end <= t);
        if (segment % 2 == 0) == self.starts_online {
            SiteState::Online
        } else {
            SiteState::Offline
        }
    }
}

/// State of `site` at `t` seconds after the net's start, computed from
/// scratch. [`super::SimNet`] caches traces; this is the reference path.
pub fn model_state(model: &AvailabilityModel, seed: u64, site: usize, t: f64) -> SiteState {
    match *model {
        AvailabilityModel::AlwaysOn => SiteState::Online,
        AvailabilityModel::AlwaysOff => SiteState::Offline,
        AvailabilityModel::Probability { p, slot_seconds } => {
            let slot = (t / slot_seconds as f64).floor() as i64;
            if slot_uniform(seed, site, slot) < p {
                SiteState::Online
            } else {
                SiteState::Offline
            }
        }
        AvailabilityModel::Churn {
            mean_online_secs,
            mean_offline_secs,
        } => {
            if mean_offline_secs == 0.0 {
                SiteState::Online
            } else if mean_online_secs == 0.0 {
                SiteState::Offline
            } else {
                ChurnTrace::new(seed, site, mean_online_secs, mean_offline_secs).state_at(t)
            }
        }
    }
}
