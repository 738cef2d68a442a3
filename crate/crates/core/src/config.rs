use serde::{Deserialize, Serialize};

use crate::comparator::ClassifierConfig;
use crate::error::Result;
use crate::segmentation::SegmentationConfig;
use crate::spectral::SpectralConfig;

/// Every tunable used by one analysis run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub segmentation: SegmentationConfig,
    pub spectral: SpectralConfig,
    pub classifier: ClassifierConfig,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.spectral.validate()?;
        self.classifier.validate()
    }
}
