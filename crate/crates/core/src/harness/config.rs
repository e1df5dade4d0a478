use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::metrics::OtConfig;
use crate::stats::ZTestOptions;
use crate::transforms::{MrSpec, TransitionTable};

/// Campaign parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Source repetitions N.
    pub n_runs: usize,
    /// Trajectories per prediction K.
    pub k: usize,
    pub alpha: f64,
    /// History length n.
    pub history_len: usize,
    /// Prediction horizon T.
    pub horizon: usize,
    /// Timestep in seconds.
    pub dt: f64,
    pub mrs: Vec<MrSpec>,
    /// Master seed.
    pub seed: u64,
    /// Maximum scenes in flight; 0 uses every available core.
    pub parallelism: usize,
    pub ot: OtConfig,
    pub z_test: ZTestOptions,
    pub transitions: TransitionTable,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self::short_term()
    }
}

impl HarnessConfig {
    /// 8 observed steps, 12 predicted, at 2.5 frames per second.
    pub fn short_term() -> Self {
        Self {
            n_runs: 8,
            k: 20,
            alpha: 0.05,
            history_len: 8,
            horizon: 12,
            dt: 0.4,
            mrs: MrSpec::label_preserving_set(),
            seed: 0,
            parallelism: 0,
            ot: OtConfig::default(),
            z_test: ZTestOptions::default(),
            transitions: TransitionTable::default(),
        }
    }

    /// 5 observed steps, 30 predicted, at 1 frame per second.
    pub fn long_term() -> Self {
        Self {
            history_len: 5,
            horizon: 30,
            dt: 1.0,
            ..Self::short_term()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_runs < 2 {
            return bad(format!(
                "N must be at least 2 to form a baseline, got {}",
                self.n_runs
            ));
        }
        if self.k == 0 || self.horizon == 0 || self.history_len < 2 {
            return bad("K and T must be positive and n at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.mrs.is_empty() {
            return bad("no metamorphic relations selected".into());
        }
        for mr in &self.mrs {
            mr.validate()
                .map_err(|e| HarnessError::Config(format!("{mr}: {e}")))?;
        }
        self.ot
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Which SUT call a seed is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunTag {
    Source(usize),
    FollowUp,
}

/// Seed of one SUT call: a pure function of the master seed, the scene and
/// the run.
pub fn derive_seed(master: u64, scene_id: &str, tag: RunTag) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((scene_id.len() as u64).to_le_bytes());
    h.update(scene_id.as_bytes());
    match tag {
        RunTag::Source(i) => {
            h.update(b"source");
            h.update((i as u64).to_le_bytes());
        }
        RunTag::FollowUp => h.update(b"follow-up"),
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..8 {
            assert!(seen.insert(derive_seed(1, "a", RunTag::Source(i))));
        }
        assert!(seen.insert(derive_seed(1, "a", RunTag::FollowUp)));
        assert!(seen.insert(derive_seed(2, "a", RunTag::FollowUp)));
        assert!(seen.insert(derive_seed(1, "b", RunTag::FollowUp)));
        assert_eq!(
            derive_seed(1, "a", RunTag::Source(3)),
            derive_seed(1, "a", RunTag::Source(3))
        );
    }

    #[test]
    fn presets() {
        let s = HarnessConfig::short_term();
        assert_eq!(
            (s.n_runs, s.k, s.alpha, s.history_len, s.horizon),
            (8, 20, 0.05, 8, 12)
        );
        let l = HarnessConfig::long_term();
        assert_eq!((l.history_len, l.horizon, l.dt), (5, 30, 1.0));
        assert!(s.validate().is_ok());
        assert!(HarnessConfig {
            n_runs: 1,
            ..s.clone()
        }
        .validate()
        .is_err());
        assert!(HarnessConfig { alpha: 1.0, ..s }.validate().is_err());
    }
}
