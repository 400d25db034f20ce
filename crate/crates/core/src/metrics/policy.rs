use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How first-token (null) attention is treated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    /// Drop `j == 0` terms from every metric except null attention itself.
    pub exclude_null_target: bool,
    /// Renormalize the non-null part of a row before taking its entropy.
    pub entropy_renormalize: bool,
    /// Rows sending more than this share to `j == 0` are left out of entropy.
    pub entropy_null_threshold: f64,
    /// Only the first N positions enter variability.
    pub variability_prefix_n: usize,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            exclude_null_target: true,
            entropy_renormalize: true,
            entropy_null_threshold: 0.9,
            variability_prefix_n: 10,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.entropy_null_threshold) {
            return Err(Error::config(
                "policy.entropy_null_threshold",
                format!("{} is outside [0, 1]", self.entropy_null_threshold),
            ));
        }
        if self.variability_prefix_n == 0 {
            return Err(Error::config("policy.variability_prefix_n", "must be at least 1"));
        }
        Ok(())
    }

    /// Smallest attended position that enters filtered sums.
    pub fn first_target(&self) -> usize {
        usize::from(self.exclude_null_target)
    }
}
