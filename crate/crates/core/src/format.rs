//! Frame (`.pcb`) and label-mask (`.lbl`) binary layouts.
//!
//! Both share a 24-byte little-endian header:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic, `PCFB` (frame) or `PCLB` (mask) |
//! | 4      | 4    | version, u32 = 1                       |
//! | 8      | 8    | point count, u64                       |
//! | 16     | 8    | timestamp in µs (frames), 0 (masks)    |
//!
//! Frame records are 16 bytes: x, y, z as f32, then r, g, b and one zero
//! pad byte. Mask records are one u16 label id per point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, Rgb, Vec3};

pub const FRAME_MAGIC: [u8; 4] = *b"PCFB";
pub const MASK_MAGIC: [u8; 4] = *b"PCLB";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const FRAME_RECORD_LEN: usize = 16;
pub const MASK_RECORD_LEN: usize = 2;

pub type LabelId = u16;

/// Label id meaning "no label"; also the eraser.
pub const UNLABELED: LabelId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub point_count: u64,
    pub timestamp_us: u64,
}

impl FrameHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.magic);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..16].copy_from_slice(&self.point_count.to_le_bytes());
        out[16..24].copy_from_slice(&self.timestamp_us.to_le_bytes());
        out
    }

    /// Parses and validates a header against the expected magic.
    pub fn parse(bytes: &[u8], magic: [u8; 4]) -> Result<Self> {
        let expected = if magic == FRAME_MAGIC { "frame" } else { "label mask" };
        if bytes.len() >= 4 && bytes[0..4] != magic {
            return Err(Error::BadMagic { expected });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::UnexpectedEof {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        Ok(FrameHeader {
            magic,
            version,
            point_count: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            timestamp_us: u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
        })
    }
}

fn body_len(bytes: &[u8], count: u64, stride: usize) -> Result<usize> {
    let expected = usize::try_from(count)
        .ok()
        .and_then(|n| n.checked_mul(stride))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(Error::UnexpectedEof {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            expected,
            found: bytes.len(),
        });
    }
    Ok(count as usize)
}

pub fn frame_file_len(point_count: usize) -> usize {
    HEADER_LEN + FRAME_RECORD_LEN * point_count
}

pub fn mask_file_len(point_count: usize) -> usize {
    HEADER_LEN + MASK_RECORD_LEN * point_count
}

/// Serializes a cloud. Coordinates are rounded to f32.
pub fn write_frame(cloud: &PointCloud, timestamp_us: u64) -> Vec<u8> {
    let header = FrameHeader {
        magic: FRAME_MAGIC,
        version: FORMAT_VERSION,
        point_count: cloud.len() as u64,
        timestamp_us,
    };
    let mut out = Vec::with_capacity(frame_file_len(cloud.len()));
    out.extend_from_slice(&header.to_bytes());
    for p in cloud.points() {
        for c in p.position.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        out.extend_from_slice(&p.color.0);
        out.push(0);
    }
    out
}

pub fn read_frame(bytes: &[u8]) -> Result<(PointCloud, u64)> {
    let header = FrameHeader::parse(bytes, FRAME_MAGIC)?;
    let count = body_len(bytes, header.point_count, FRAME_RECORD_LEN)?;
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let points = bytes[HEADER_LEN..]
        .chunks_exact(FRAME_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let o = HEADER_LEN + i * FRAME_RECORD_LEN;
            Point::new(
                Vec3::new(f32_at(o), f32_at(o + 4), f32_at(o + 8)),
                Rgb([rec[12], rec[13], rec[14]]),
            )
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(points.len(), count);
    Ok((PointCloud::new(points)?, header.timestamp_us))
}

/// Per-point label ids, index-aligned with one frame's cloud.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMask(Vec<LabelId>);

impl LabelMask {
    pub fn unlabeled(len: usize) -> Self {
        LabelMask(vec![UNLABELED; len])
    }

    pub fn from_vec(labels: Vec<LabelId>) -> Self {
        LabelMask(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[LabelId] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [LabelId] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<LabelId> {
        self.0
    }

    pub fn get(&self, index: usize) -> LabelId {
        self.0[index]
    }

    pub fn set(&mut self, index: usize, label: LabelId) {
        self.0[index] = label;
    }

    pub fn has_labels(&self) -> bool {
        self.0.iter().any(|&l| l != UNLABELED)
    }

    /// Distinct nonzero labels in ascending order.
    pub fn labels(&self) -> Vec<LabelId> {
        let mut seen: Vec<LabelId> = self.0.iter().copied().filter(|&l| l != UNLABELED).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Indices carrying `label`, ascending.
    pub fn indices_of(&self, label: LabelId) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    pub fn count_of(&self, label: LabelId) -> usize {
        self.0.iter().filter(|&&l| l == label).count()
    }

    pub fn ensure_aligned(&self, cloud_len: usize) -> Result<()> {
        if self.len() != cloud_len {
            return Err(Error::MaskMisaligned {
                frame: None,
                mask_len: self.len(),
                cloud_len,
            });
        }
        Ok(())
    }
}

pub fn write_mask(mask: &LabelMask) -> Vec<u8> {
    let header = FrameHeader {
        magic: MASK_MAGIC,
        version: FORMAT_VERSION,
        point_count: mask.len() as u64,
        timestamp_us: 0,
    };
    let mut out = Vec::with_capacity(mask_file_len(mask.len()));
    out.extend_from_slice(&header.to_bytes());
    for id in mask.as_slice() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn read_mask(bytes: &[u8]) -> Result<LabelMask> {
    let header = FrameHeader::parse(bytes, MASK_MAGIC)?;
    body_len(bytes, header.point_count, MASK_RECORD_LEN)?;
    Ok(LabelMask(
        bytes[HEADER_LEN..]
            .chunks_exact(MASK_RECORD_LEN)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
    ))
}
