//! Checkpoint directories: everything needed to re-render a trained scene.
//!
//! Layout:
//!   meta.json         architecture + scene name
//!   points.ply        point positions (binary)
//!   descriptors.rdsc  descriptor table
//!   params.rckp       network weights
//!   scores.json       per-image training scores (optional)
//!   log.jsonl         one training-log record per line (optional)

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::LEVELS;
use crate::error::{Error, Result};
use crate::io::{checkpoint, descfile, ply};
use crate::net::OmegaNet;
use crate::sampler::ImageScore;
use crate::scene::Scene;
use crate::train::TrainLogRecord;

pub const META_FILE: &str = "meta.json";
pub const POINTS_FILE: &str = "points.ply";
pub const DESCRIPTORS_FILE: &str = "descriptors.rdsc";
pub const PARAMS_FILE: &str = "params.rckp";
pub const SCORES_FILE: &str = "scores.json";
pub const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub name: String,
    pub descriptor_dim: usize,
    pub widths: [usize; LEVELS],
}

pub fn save_checkpoint(dir: &Path, scene: &Scene, net: &OmegaNet<f32>) -> Result<()> {
    if scene.descriptors.dim() != net.descriptor_dim {
        return Err(Error::validation(format!(
            "scene descriptors are {}-dim but the network expects {}",
            scene.descriptors.dim(),
            net.descriptor_dim
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = CheckpointMeta {
        format_version: 1,
        name: scene.name.clone(),
        descriptor_dim: net.descriptor_dim,
        widths: net.widths,
    };
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::parse(&meta_path, format!("serialization failed: {e}")))?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    ply::write_ply(&dir.join(POINTS_FILE), &scene.cloud, None, true)?;
    descfile::write_descriptors(&dir.join(DESCRIPTORS_FILE), &scene.descriptors)?;
    checkpoint::write_checkpoint(&dir.join(PARAMS_FILE), net)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Scene, OmegaNet<f32>, CheckpointMeta)> {
    let meta_path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&meta_path, format!("bad checkpoint metadata: {e}")))?;
    if meta.format_version != 1 {
        return Err(Error::parse(
            &meta_path,
            format!("unsupported checkpoint version {}", meta.format_version),
        ));
    }
    let (cloud, _) = ply::read_ply(&dir.join(POINTS_FILE))?;
    let descriptors = descfile::read_descriptors(&dir.join(DESCRIPTORS_FILE))?;
    if descriptors.dim() != meta.descriptor_dim {
        return Err(Error::validation(format!(
            "descriptor file is {}-dim but metadata says {}",
            descriptors.dim(),
            meta.descriptor_dim
        )));
    }
    let net = checkpoint::load_network(&dir.join(PARAMS_FILE), meta.descriptor_dim, meta.widths)?;
    let scene = Scene::new(meta.name.clone(), cloud, descriptors)?;
    Ok((scene, net, meta))
}

pub fn write_scores(dir: &Path, scores: &[ImageScore]) -> Result<()> {
    let path = dir.join(SCORES_FILE);
    let text = serde_json::to_string_pretty(scores)
        .map_err(|e| Error::parse(&path, format!("serialization failed: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_scores(dir: &Path) -> Result<Vec<ImageScore>> {
    let path = dir.join(SCORES_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, format!("bad scores file: {e}")))
}

/// Appends records to the training log, one JSON object per line.
pub fn append_log(dir: &Path, records: &[TrainLogRecord]) -> Result<()> {
    use std::io::Write;
    let path = dir.join(LOG_FILE);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::parse(&path, format!("serialization failed: {e}")))?;
        writeln!(file, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn read_log(dir: &Path) -> Result<Vec<TrainLogRecord>> {
    let path = dir.join(LOG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::parse(&path, format!("log line {}: {e}", i + 1)))
        })
        .collect()
}

/// The path a checkpoint directory stores its rendered outputs under; a
/// convenience so callers agree on naming.
pub fn render_output_path(dir: &Path, image_id: u32) -> PathBuf {
    dir.join(format!("render_{image_id:04}.png"))
}
