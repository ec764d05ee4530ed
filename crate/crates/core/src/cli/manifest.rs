use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};
use crate::metrics::Scores;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub psnr_y: f64,
    pub ssim_y: f64,
    pub epi: f64,
}

impl MetricRow {
    pub fn new(name: &str, s: Scores) -> Self {
        MetricRow {
            name: name.to_string(),
            psnr_y: s.psnr_y,
            ssim_y: s.ssim_y,
            epi: s.epi,
        }
    }
}

/// Record of one training run. Timestamps are seconds since the Unix epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub started_at: u64,
    pub finished_at: u64,
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
    /// Infinite PSNR values are stored as `null`.
    #[serde(with = "rows")]
    pub metrics: Vec<MetricRow>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

mod rows {
    use super::MetricRow;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        name: String,
        psnr_y: Option<f64>,
        ssim_y: f64,
        epi: f64,
    }

    pub fn serialize<S: Serializer>(v: &[MetricRow], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|r| Row {
                name: r.name.clone(),
                psnr_y: r.psnr_y.is_finite().then_some(r.psnr_y),
                ssim_y: r.ssim_y,
                epi: r.epi,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<MetricRow>, D::Error> {
        Ok(Vec::<Row>::deserialize(d)?
            .into_iter()
            .map(|r| MetricRow {
                name: r.name,
                psnr_y: r.psnr_y.unwrap_or(f64::INFINITY),
                ssim_y: r.ssim_y,
                epi: r.epi,
            })
            .collect())
    }
}
