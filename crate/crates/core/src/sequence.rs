//! A directory of frame files, optionally described by `sequence.json`.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{self, FrameHeader, LabelMask, FRAME_MAGIC, HEADER_LEN};
use crate::geometry::PointCloud;

pub const MANIFEST_FILE: &str = "sequence.json";
pub const FRAME_EXTENSION: &str = "pcb";
pub const MASK_EXTENSION: &str = "lbl";
pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
    pub frames: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameEntry {
    pub file_name: String,
    pub timestamp_us: u64,
    pub point_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    dir: PathBuf,
    nominal_fps: f64,
    frames: Vec<FrameEntry>,
}

/// Conventional name of the `index`-th frame file.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.{FRAME_EXTENSION}")
}

/// Timestamp assigned to frame `index` when the recorder supplied none.
pub fn synthesized_timestamp_us(index: usize, fps: f64) -> u64 {
    (index as f64 * 1e6 / fps).round() as u64
}

fn read_header(path: &Path) -> Result<FrameHeader> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    fs::File::open(path)
        .and_then(|f| f.take(HEADER_LEN as u64).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    FrameHeader::parse(&buf, FRAME_MAGIC)
}

impl FrameSequence {
    /// Loads frame metadata from `dir`. Frame bodies are read on demand.
    ///
    /// With a manifest, frames follow manifest order; otherwise every
    /// `frame_*.pcb` is taken in lexicographic filename order. If all
    /// headers carry timestamp 0, timestamps are synthesized from the
    /// nominal rate.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest_path = dir.join(MANIFEST_FILE);
        let (fps, names) = if manifest_path.is_file() {
            let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
            if !(manifest.fps.is_finite() && manifest.fps > 0.0) {
                return Err(Error::InvalidParams(format!("manifest fps {} must be positive", manifest.fps)));
            }
            for name in &manifest.frames {
                if !dir.join(name).is_file() {
                    return Err(Error::MissingFrame(name.clone()));
                }
            }
            (manifest.fps, manifest.frames)
        } else {
            let mut names = Vec::new();
            let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| Error::io(&dir, e))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if name.starts_with("frame_")
                    && name.ends_with(&format!(".{FRAME_EXTENSION}"))
                    && entry.path().is_file()
                {
                    names.push(name);
                }
            }
            names.sort();
            (DEFAULT_FPS, names)
        };
        if names.is_empty() {
            return Err(Error::EmptySequence);
        }

        let mut frames = Vec::with_capacity(names.len());
        for name in names {
            let header = read_header(&dir.join(&name))?;
            frames.push(FrameEntry {
                file_name: name,
                timestamp_us: header.timestamp_us,
                point_count: header.point_count as usize,
            });
        }
        if frames.len() > 1 && frames.iter().all(|f| f.timestamp_us == 0) {
            for (i, f) in frames.iter_mut().enumerate() {
                f.timestamp_us = synthesized_timestamp_us(i, fps);
            }
        }
        if let Some(i) = (1..frames.len()).find(|&i| frames[i].timestamp_us <= frames[i - 1].timestamp_us) {
            return Err(Error::NonMonotonicTimestamps(i));
        }
        Ok(FrameSequence {
            dir,
            nominal_fps: fps,
            frames,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn nominal_fps(&self) -> f64 {
        self.nominal_fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameEntry] {
        &self.frames
    }

    pub fn entry(&self, index: usize) -> Result<&FrameEntry> {
        self.frames.get(index).ok_or(Error::FrameOutOfRange {
            index,
            count: self.frames.len(),
        })
    }

    pub fn frame_path(&self, index: usize) -> Result<PathBuf> {
        Ok(self.dir.join(&self.entry(index)?.file_name))
    }

    /// Sidecar path: the frame file with its extension swapped to `.lbl`.
    pub fn mask_path(&self, index: usize) -> Result<PathBuf> {
        Ok(self.frame_path(index)?.with_extension(MASK_EXTENSION))
    }

    pub fn frame_bytes(&self, index: usize) -> Result<Vec<u8>> {
        let path = self.frame_path(index)?;
        fs::read(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn read_cloud(&self, index: usize) -> Result<PointCloud> {
        let (cloud, _) = format::read_frame(&self.frame_bytes(index)?)?;
        Ok(cloud)
    }

    /// Reads the sidecar mask if present, checking it against the frame's
    /// point count.
    pub fn read_mask(&self, index: usize) -> Result<Option<LabelMask>> {
        let path = self.mask_path(index)?;
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mask = format::read_mask(&bytes)?;
        let entry = self.entry(index)?;
        if mask.len() != entry.point_count {
            return Err(Error::MaskMisaligned {
                frame: Some(entry.file_name.clone()),
                mask_len: mask.len(),
                cloud_len: entry.point_count,
            });
        }
        Ok(Some(mask))
    }

    pub fn write_mask(&self, index: usize, mask: &LabelMask) -> Result<()> {
        let entry = self.entry(index)?;
        if mask.len() != entry.point_count {
            return Err(Error::MaskMisaligned {
                frame: Some(entry.file_name.clone()),
                mask_len: mask.len(),
                cloud_len: entry.point_count,
            });
        }
        let path = self.mask_path(index)?;
        fs::write(&path, format::write_mask(mask)).map_err(|e| Error::io(&path, e))
    }
}

/// Writes frames as `frame_NNNNNN.pcb` plus a manifest.
pub fn write_sequence(
    dir: impl AsRef<Path>,
    fps: f64,
    frames: &[(PointCloud, u64)],
) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(frames.len());
    for (i, (cloud, ts)) in frames.iter().enumerate() {
        let name = frame_file_name(i);
        let path = dir.join(&name);
        fs::write(&path, format::write_frame(cloud, *ts)).map_err(|e| Error::io(&path, e))?;
        names.push(name);
    }
    let manifest = Manifest { fps, frames: names };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    FrameSequence::load(dir)
}
