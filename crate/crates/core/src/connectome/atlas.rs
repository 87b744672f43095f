use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConnectomeError;

/// Functional systems of the 264-ROI Power parcellation, plus `Uncertain`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalSystem {
    SensorySomatomotorHand,
    SensorySomatomotorMouth,
    CinguloOpercularTaskControl,
    Auditory,
    DefaultMode,
    MemoryRetrieval,
    Visual,
    FrontoParietalTaskControl,
    Salience,
    Subcortical,
    VentralAttention,
    DorsalAttention,
    Cerebellar,
    Uncertain,
}

impl FunctionalSystem {
    pub const ALL: [FunctionalSystem; 14] = [
        FunctionalSystem::SensorySomatomotorHand,
        FunctionalSystem::SensorySomatomotorMouth,
        FunctionalSystem::CinguloOpercularTaskControl,
        FunctionalSystem::Auditory,
        FunctionalSystem::DefaultMode,
        FunctionalSystem::MemoryRetrieval,
        FunctionalSystem::Visual,
        FunctionalSystem::FrontoParietalTaskControl,
        FunctionalSystem::Salience,
        FunctionalSystem::Subcortical,
        FunctionalSystem::VentralAttention,
        FunctionalSystem::DorsalAttention,
        FunctionalSystem::Cerebellar,
        FunctionalSystem::Uncertain,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FunctionalSystem::SensorySomatomotorHand => "sensory_somatomotor_hand",
            FunctionalSystem::SensorySomatomotorMouth => "sensory_somatomotor_mouth",
            FunctionalSystem::CinguloOpercularTaskControl => "cingulo_opercular_task_control",
            FunctionalSystem::Auditory => "auditory",
            FunctionalSystem::DefaultMode => "default_mode",
            FunctionalSystem::MemoryRetrieval => "memory_retrieval",
            FunctionalSystem::Visual => "visual",
            FunctionalSystem::FrontoParietalTaskControl => "fronto_parietal_task_control",
            FunctionalSystem::Salience => "salience",
            FunctionalSystem::Subcortical => "subcortical",
            FunctionalSystem::VentralAttention => "ventral_attention",
            FunctionalSystem::DorsalAttention => "dorsal_attention",
            FunctionalSystem::Cerebellar => "cerebellar",
            FunctionalSystem::Uncertain => "uncertain",
        }
    }
}

impl fmt::Display for FunctionalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub id: usize,
    pub name: String,
    pub system: FunctionalSystem,
    /// MNI coordinates in mm.
    pub xyz: [f64; 3],
}

/// ROI metadata with ids `0..N` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Roi>", into = "Vec<Roi>")]
pub struct RoiAtlas {
    rois: Vec<Roi>,
}

impl TryFrom<Vec<Roi>> for RoiAtlas {
    type Error = ConnectomeError;

    fn try_from(rois: Vec<Roi>) -> Result<Self, Self::Error> {
        RoiAtlas::new(rois)
    }
}

impl From<RoiAtlas> for Vec<Roi> {
    fn from(atlas: RoiAtlas) -> Self {
        atlas.rois
    }
}

impl RoiAtlas {
    pub fn new(mut rois: Vec<Roi>) -> Result<Self, ConnectomeError> {
        rois.sort_by_key(|r| r.id);
        for (expected, roi) in rois.iter().enumerate() {
            if roi.id != expected {
                return Err(ConnectomeError::Atlas(format!(
                    "ROI ids must be contiguous from 0; expected {expected}, found {}",
                    roi.id
                )));
            }
        }
        Ok(RoiAtlas { rois })
    }

    pub fn from_json(text: &str) -> Result<Self, ConnectomeError> {
        serde_json::from_str(text).map_err(|e| ConnectomeError::Atlas(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConnectomeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConnectomeError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rois).expect("atlas serializes")
    }

    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Roi> {
        self.rois.get(id)
    }

    pub fn rois(&self) -> &[Roi] {
        &self.rois
    }
}
