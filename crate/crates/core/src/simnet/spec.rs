use serde::{Deserialize, Serialize};

use super::SimNetError;
use crate::model::Timestamp;
use crate::spider::stopwords;

pub const SPEC_VERSION: u32 = 1;

/// 2019-01-01T00:00:00Z
pub const DEFAULT_START_TIME: Timestamp = 1_546_300_800;

/// Generative description of a synthetic darknet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimNetSpec {
    pub spec_version: u32,
    pub seed: u64,
    pub n_sites: usize,
    #[serde(default = "default_start_time")]
    pub start_time: Timestamp,
    pub topology: Topology,
    #[serde(default)]
    pub availability: AvailabilitySpec,
    #[serde(default)]
    pub site_profile: SiteProfile,
    #[serde(default)]
    pub seeding: Seeding,
}

fn default_start_time() -> Timestamp {
    DEFAULT_START_TIME
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Directed edges between site indices.
    Explicit { edges: Vec<(usize, usize)> },
    /// Poisson out-degrees with uniformly chosen distinct targets.
    Random { mean_out_degree: f64, max_out_degree: usize },
    /// Fixed node-class quotas (10% source, 12% sink, 12% connected, the
    /// rest isolated) plus one high out-degree directory site.
    PaperShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AvailabilityModel {
    AlwaysOn,
    AlwaysOff,
    /// Online with probability `p`, redrawn independently every
    /// `slot_seconds`.
    Probability { p: f64, slot_seconds: i64 },
    /// Alternating renewal process with exponential on/off durations.
    Churn { mean_online_secs: f64, mean_offline_secs: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvailabilitySpec {
    pub default: AvailabilityModel,
    #[serde(default)]
    pub overrides: Vec<SiteOverride>,
}

impl Default for AvailabilitySpec {
    fn default() -> Self {
        AvailabilitySpec {
            default: AvailabilityModel::AlwaysOn,
            overrides: Vec::new(),
        }
    }
}

/// Per-site tweaks on top of the generated profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteOverride {
    pub site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<AvailabilityModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    #[serde(default)]
    pub pages: PageCountDist,
    #[serde(default)]
    pub home: HomeStatsDist,
    /// Language weights; normalized at generation time.
    #[serde(default = "default_languages")]
    pub languages: Vec<(String, f64)>,
}

impl Default for SiteProfile {
    fn default() -> Self {
        SiteProfile {
            pages: PageCountDist::default(),
            home: HomeStatsDist::default(),
            languages: default_languages(),
        }
    }
}

/// Observed language shares of crawled eepsites, in percent.
pub fn default_languages() -> Vec<(String, f64)> {
    [
        ("en", 96.31),
        ("fr", 0.86),
        ("de", 0.86),
        ("es", 0.62),
        ("no", 0.25),
        ("la", 0.25),
        ("it", 0.25),
        ("cy", 0.12),
        ("tr", 0.12),
        ("pt", 0.12),
        ("nl", 0.12),
        ("ca", 0.12),
    ]
    .into_iter()
    .map(|(c, w)| (c.to_string(), w))
    .collect()
}

/// Exactly `round(small_fraction * n)` sites get a uniform page count in
/// `1..=small_max`; the rest are log-uniform in `small_max+1..=large_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageCountDist {
    pub small_fraction: f64,
    pub small_max: u32,
    pub large_max: u32,
}

impl Default for PageCountDist {
    fn default() -> Self {
        PageCountDist {
            small_fraction: 0.8,
            small_max: 30,
            large_max: 2_000,
        }
    }
}

/// Geometric-ish means for the home page content.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomeStatsDist {
    pub mean_words: f64,
    pub mean_images: f64,
    pub mean_scripts: f64,
}

impl Default for HomeStatsDist {
    fn default() -> Self {
        HomeStatsDist {
            mean_words: 120.0,
            mean_images: 3.0,
            mean_scripts: 2.0,
        }
    }
}

/// Which sites the crawler learns about without following a link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeding {
    /// Explicit seed indices; when absent, `seed_fraction` of sites are drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeded: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announced: Option<Vec<usize>>,
    #[serde(default)]
    pub seed_fraction: f64,
    #[serde(default)]
    pub announce_fraction: f64,
    /// Floodfill announcements are spread uniformly over this many days.
    #[serde(default)]
    pub announce_spread_days: f64,
    /// Announce every site not reachable from the seed/announced set.
    #[serde(default = "yes")]
    pub ensure_reachable: bool,
}

fn yes() -> bool {
    true
}

impl Default for Seeding {
    fn default() -> Self {
        Seeding {
            seeded: None,
            announced: None,
            seed_fraction: 0.1,
            announce_fraction: 0.3,
            announce_spread_days: 0.0,
            ensure_reachable: true,
        }
    }
}

impl SimNetSpec {
    /// Always-on net with a random topology; everything reachable.
    pub fn random(seed: u64, n_sites: usize, mean_out_degree: f64) -> Self {
        SimNetSpec {
            spec_version: SPEC_VERSION,
            seed,
            n_sites,
            start_time: DEFAULT_START_TIME,
            topology: Topology::Random {
                mean_out_degree,
                max_out_degree: n_sites.saturating_sub(1).min(64),
            },
            availability: AvailabilitySpec::default(),
            site_profile: SiteProfile::default(),
            seeding: Seeding::default(),
        }
    }

    /// Preset mimicking the aggregate shape of the measured I2P web:
    /// node-class shares, small sites, mostly floodfill-announced hosts.
    pub fn paper_shape(seed: u64, n_sites: usize) -> Self {
        SimNetSpec {
            spec_version: SPEC_VERSION,
            seed,
            n_sites,
            start_time: DEFAULT_START_TIME,
            topology: Topology::PaperShape,
            availability: AvailabilitySpec::default(),
            site_profile: SiteProfile::default(),
            seeding: Seeding {
                seed_fraction: 0.07,
                announce_fraction: 0.6,
                ..Seeding::default()
            },
        }
    }

    pub fn explicit(seed: u64, n_sites: usize, edges: Vec<(usize, usize)>) -> Self {
        SimNetSpec {
            spec_version: SPEC_VERSION,
            seed,
            n_sites,
            start_time: DEFAULT_START_TIME,
            topology: Topology::Explicit { edges },
            availability: AvailabilitySpec::default(),
            site_profile: SiteProfile::default(),
            seeding: Seeding::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimNetError> {
        let invalid = |msg: String| Err(SimNetError::InvalidSpec(msg));
        if self.spec_version != SPEC_VERSION {
            return invalid(format!("unsupported spec_version {}", self.spec_version));
        }
        let n = self.n_sites;
        if n == 0 {
            return invalid("n_sites must be at least 1".into());
        }
        match &self.topology {
            Topology::Explicit { edges } => {
                for &(u, v) in edges {
                    if u >= n || v >= n {
                        return invalid(format!("edge ({u},{v}) has an endpoint >= n_sites"));
                    }
                    if u == v {
                        return invalid(format!("self-loop on site {u}"));
                    }
                }
            }
            Topology::Random { mean_out_degree, .. } => {
                if !(mean_out_degree.is_finite() && *mean_out_degree >= 0.0) {
                    return invalid("mean_out_degree must be finite and >= 0".into());
                }
            }
            Topology::PaperShape => {
                if n < 10 {
                    return invalid("paper_shape topology needs at least 10 sites".into());
                }
            }
        }
        validate_model(&self.availability.default)?;
        for o in &self.availability.overrides {
            if o.site >= n {
                return invalid(format!("override for site {} >= n_sites", o.site));
            }
            if let Some(m) = &o.model {
                validate_model(m)?;
            }
            if let Some(l) = o.latency_secs {
                if !(l.is_finite() && l >= 0.0) {
                    return invalid(format!("latency for site {} must be >= 0", o.site));
                }
            }
            if o.pages == Some(0) {
                return invalid(format!("site {} must have at least one page", o.site));
            }
            if let Some(lang) = &o.language {
                if stopwords(lang).is_none() {
                    return invalid(format!("unsupported language {lang}"));
                }
            }
        }
        let pages = &self.site_profile.pages;
        if !(0.0..=1.0).contains(&pages.small_fraction) {
            return invalid("small_fraction must be in [0,1]".into());
        }
        if pages.small_max == 0 || pages.large_max <= pages.small_max {
            return invalid("page counts need 1 <= small_max < large_max".into());
        }
        let home = &self.site_profile.home;
        for (name, v) in [
            ("mean_words", home.mean_words),
            ("mean_images", home.mean_images),
            ("mean_scripts", home.mean_scripts),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be finite and >= 0"));
            }
        }
        let langs = &self.site_profile.languages;
        if langs.is_empty() || langs.iter().map(|(_, w)| *w).sum::<f64>() <= 0.0 {
            return invalid("language weights must have a positive sum".into());
        }
        for (code, w) in langs {
            if stopwords(code).is_none() {
                return invalid(format!("unsupported language {code}"));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return invalid(format!("weight for {code} must be >= 0"));
            }
        }
        let s = &self.seeding;
        for (name, f) in [("seed_fraction", s.seed_fraction), ("announce_fraction", s.announce_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return invalid(format!("{name} must be in [0,1]"));
            }
        }
        if !(s.announce_spread_days.is_finite() && s.announce_spread_days >= 0.0) {
            return invalid("announce_spread_days must be >= 0".into());
        }
        for list in [&s.seeded, &s.announced].into_iter().flatten() {
            if let Some(bad) = list.iter().find(|&&i| i >= n) {
                return invalid(format!("seeding refers to site {bad} >= n_sites"));
            }
        }
        Ok(())
    }
}

fn validate_model(m: &AvailabilityModel) -> Result<(), SimNetError> {
    let invalid = |msg: &str| Err(SimNetError::InvalidSpec(msg.to_string()));
    match *m {
        AvailabilityModel::AlwaysOn | AvailabilityModel::AlwaysOff => Ok(()),
        AvailabilityModel::Probability { p, slot_seconds } => {
            if !(0.0..=1.0).contains(&p) {
                return invalid("availability probability must be in [0,1]");
            }
            if slot_seconds <= 0 {
                return invalid("slot_seconds must be > 0");
            }
            Ok(())
        }
        AvailabilityModel::Churn {
            mean_online_secs,
            mean_offline_secs,
        } => {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(mean_online_secs) || !ok(mean_offline_secs) {
                return invalid("churn means must be finite and >= 0");
            }
            if mean_online_secs == 0.0 && mean_offline_secs == 0.0 {
                return invalid("churn means cannot both be zero");
            }
            Ok(())
        }
    }
}
