use std::sync::Arc;

use crate::error::Result;
use crate::kink_profile::{Kink, KinkProfile, DEFAULT_NODES, DEFAULT_X_MAX};
use crate::potential::{NormalizationRecord, Potential};

/// A potential together with its normalization and tabulated kink.
#[derive(Debug, Clone)]
pub struct Model {
    original: Potential,
    normalized: Potential,
    record: NormalizationRecord,
    profile: Arc<KinkProfile>,
}

impl Model {
    pub fn builtin(name: &str) -> Result<Self> {
        Self::new(Potential::make_builtin(name)?, DEFAULT_X_MAX, DEFAULT_NODES)
    }

    pub fn new(potential: Potential, x_max: f64, nodes: usize) -> Result<Self> {
        potential.validate(512)?;
        let (normalized, record) = potential.normalize();
        let profile = Arc::new(KinkProfile::build(&normalized, x_max, nodes)?);
        Ok(Self { original: potential, normalized, record, profile })
    }

    pub fn potential(&self) -> &Potential {
        &self.original
    }

    pub fn normalized_potential(&self) -> &Potential {
        &self.normalized
    }

    pub fn record(&self) -> &NormalizationRecord {
        &self.record
    }

    pub fn profile(&self) -> &Arc<KinkProfile> {
        &self.profile
    }

    /// The kink in the model's own units.
    pub fn kink(&self) -> Kink {
        Kink::physical(self.profile.clone(), &self.original).expect("profile built from this potential")
    }

    pub fn normalized_kink(&self) -> Kink {
        Kink::normalized(self.profile.clone())
    }
}
