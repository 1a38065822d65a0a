//! An editable labeling session over one sequence directory.
//!
//! Masks are created lazily (all unlabeled) the first time a frame is
//! edited. Every mask change is journaled as one undo entry holding the
//! previous values of the entries it touched, so undoing entries in reverse
//! restores the earlier state exactly. Frame files are never written; only
//! `.lbl` sidecars and `session.json`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::{FrameCache, FrameSource};
use crate::error::{Error, Result};
use crate::format::{self, LabelId, LabelMask, UNLABELED};
use crate::geometry::{PointCloud, Rgb, Vec3};
use crate::kdtree::KdTree;
use crate::propagation::{propagate_sequence, PropagationParams, PropagationReport};
use crate::sequence::FrameSequence;

pub const SESSION_FILE: &str = "session.json";
pub const UNDO_DEPTH: usize = 256;
pub const DEFAULT_BRUSH_RADIUS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: LabelId,
    pub name: String,
    pub color: Rgb,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PaletteEntry>", into = "Vec<PaletteEntry>")]
pub struct LabelPalette {
    entries: Vec<PaletteEntry>,
}

impl LabelPalette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.id == UNLABELED {
                return Err(Error::InvalidPalette("label id 0 is reserved".into()));
            }
            if !seen.insert(e.id) {
                return Err(Error::InvalidPalette(format!("duplicate label id {}", e.id)));
            }
        }
        Ok(LabelPalette { entries })
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn contains(&self, id: LabelId) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn get(&self, id: LabelId) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

impl Default for LabelPalette {
    fn default() -> Self {
        const DEFAULTS: [(&str, [u8; 3]); 8] = [
            ("red", [230, 25, 75]),
            ("green", [60, 180, 75]),
            ("blue", [0, 130, 200]),
            ("yellow", [255, 225, 25]),
            ("orange", [245, 130, 48]),
            ("purple", [145, 30, 180]),
            ("cyan", [70, 240, 240]),
            ("magenta", [240, 50, 230]),
        ];
        LabelPalette {
            entries: DEFAULTS
                .iter()
                .enumerate()
                .map(|(i, (name, color))| PaletteEntry {
                    id: (i + 1) as LabelId,
                    name: name.to_string(),
                    color: Rgb(*color),
                })
                .collect(),
        }
    }
}

impl TryFrom<Vec<PaletteEntry>> for LabelPalette {
    type Error = Error;

    fn try_from(entries: Vec<PaletteEntry>) -> Result<Self> {
        LabelPalette::new(entries)
    }
}

impl From<LabelPalette> for Vec<PaletteEntry> {
    fn from(p: LabelPalette) -> Self {
        p.entries
    }
}

/// Persisted session settings, stored as `session.json` next to the frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionFile {
    pub cursor: usize,
    pub active_label: LabelId,
    pub brush_radius: f64,
    pub palette: LabelPalette,
    pub params: PropagationParams,
}

impl Default for SessionFile {
    fn default() -> Self {
        SessionFile {
            cursor: 0,
            active_label: 1,
            brush_radius: DEFAULT_BRUSH_RADIUS,
            palette: LabelPalette::default(),
            params: PropagationParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceInfo {
    pub frame_count: usize,
    pub fps: f64,
    pub point_counts: Vec<usize>,
}

#[derive(Clone, Debug)]
struct UndoEntry {
    frame: usize,
    /// The mask did not exist before this edit.
    created: bool,
    /// `(point index, previous label)` for every entry the edit changed.
    previous: Vec<(usize, LabelId)>,
}

/// Points within `radius` of `center`, ascending.
pub fn select_sphere(tree: &KdTree, center: &Vec3, radius: f64) -> Result<Vec<usize>> {
    tree.radius_query(center, radius)
}

#[derive(Debug)]
pub struct Session {
    frames: FrameCache,
    masks: BTreeMap<usize, LabelMask>,
    settings: SessionFile,
    undo: VecDeque<UndoEntry>,
    /// Frames whose mask changed since the last save.
    dirty: BTreeSet<usize>,
    settings_dirty: bool,
}

impl Session {
    /// Opens `dir`, reading `session.json` and any `.lbl` sidecars present.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let sequence = FrameSequence::load(dir.as_ref())?;
        let path = sequence.dir().join(SESSION_FILE);
        let settings = if path.is_file() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let s: SessionFile = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
            s.params.validate()?;
            s
        } else {
            SessionFile::default()
        };
        let mut masks = BTreeMap::new();
        for index in 0..sequence.len() {
            if let Some(mask) = sequence.read_mask(index)? {
                masks.insert(index, mask);
            }
        }
        let mut session = Session {
            frames: FrameCache::new(sequence),
            masks,
            settings,
            undo: VecDeque::new(),
            dirty: BTreeSet::new(),
            settings_dirty: false,
        };
        session.settings.cursor = session.settings.cursor.min(session.frame_count() - 1);
        if session.settings.active_label != UNLABELED && !session.settings.palette.contains(session.settings.active_label) {
            session.settings.active_label = UNLABELED;
        }
        if session.settings.brush_radius.is_nan() || session.settings.brush_radius <= 0.0 {
            session.settings.brush_radius = DEFAULT_BRUSH_RADIUS;
        }
        Ok(session)
    }

    /// Writes changed masks and the settings file.
    pub fn save(&mut self) -> Result<()> {
        let seq = self.frames.sequence();
        for &frame in &self.dirty {
            match self.masks.get(&frame) {
                Some(mask) => seq.write_mask(frame, mask)?,
                None => {
                    let path = seq.mask_path(frame)?;
                    if path.is_file() {
                        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                    }
                }
            }
        }
        self.dirty.clear();
        let path = seq.dir().join(SESSION_FILE);
        let text = serde_json::to_string_pretty(&self.settings).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.settings_dirty = false;
        Ok(())
    }

    pub fn has_unsaved_changes(&self) -> bool {
        !self.dirty.is_empty() || self.settings_dirty
    }

    pub fn sequence(&self) -> &FrameSequence {
        self.frames.sequence()
    }

    pub fn frame_count(&self) -> usize {
        self.sequence().len()
    }

    pub fn info(&self) -> SequenceInfo {
        let seq = self.sequence();
        SequenceInfo {
            frame_count: seq.len(),
            fps: seq.nominal_fps(),
            point_counts: seq.frames().iter().map(|f| f.point_count).collect(),
        }
    }

    pub fn cursor(&self) -> usize {
        self.settings.cursor
    }

    pub fn palette(&self) -> &LabelPalette {
        &self.settings.palette
    }

    pub fn params(&self) -> &PropagationParams {
        &self.settings.params
    }

    pub fn settings(&self) -> &SessionFile {
        &self.settings
    }

    pub fn active_label(&self) -> LabelId {
        self.settings.active_label
    }

    pub fn brush_radius(&self) -> f64 {
        self.settings.brush_radius
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    fn check_frame(&self, frame: usize) -> Result<()> {
        self.sequence().entry(frame).map(|_| ())
    }

    fn check_label(&self, label: LabelId) -> Result<()> {
        if label == UNLABELED || self.settings.palette.contains(label) {
            Ok(())
        } else {
            Err(Error::LabelNotInPalette(label))
        }
    }

    /// Replaces the palette. Ids still used by any mask must stay.
    pub fn set_palette(&mut self, palette: LabelPalette) -> Result<()> {
        for mask in self.masks.values() {
            if let Some(id) = mask.labels().into_iter().find(|&l| !palette.contains(l)) {
                return Err(Error::InvalidPalette(format!("label {id} is still in use")));
            }
        }
        if !palette.contains(self.settings.active_label) {
            self.settings.active_label = UNLABELED;
        }
        self.settings.palette = palette;
        self.settings_dirty = true;
        Ok(())
    }

    pub fn set_params(&mut self, params: PropagationParams) -> Result<()> {
        params.validate()?;
        self.settings.params = params;
        self.settings_dirty = true;
        Ok(())
    }

    pub fn set_active_label(&mut self, label: LabelId) -> Result<()> {
        self.check_label(label)?;
        self.settings.active_label = label;
        self.settings_dirty = true;
        Ok(())
    }

    pub fn set_brush_radius(&mut self, radius: f64) -> Result<()> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams("brush radius must be positive".into()));
        }
        self.settings.brush_radius = radius;
        self.settings_dirty = true;
        Ok(())
    }

    /// Moves the cursor by `delta`, clamped to the sequence.
    pub fn step_frame(&mut self, delta: i64) -> usize {
        let last = self.frame_count() as i64 - 1;
        let next = (self.settings.cursor as i64).saturating_add(delta).clamp(0, last);
        self.settings.cursor = next as usize;
        self.settings_dirty = true;
        self.settings.cursor
    }

    /// The frame's mask; all unlabeled if never edited.
    pub fn mask(&self, frame: usize) -> Result<LabelMask> {
        let entry = self.sequence().entry(frame)?;
        Ok(self
            .masks
            .get(&frame)
            .cloned()
            .unwrap_or_else(|| LabelMask::unlabeled(entry.point_count)))
    }

    pub fn mask_bytes(&self, frame: usize) -> Result<Vec<u8>> {
        Ok(format::write_mask(&self.mask(frame)?))
    }

    /// Exact bytes of the frame file.
    pub fn frame_bytes(&self, frame: usize) -> Result<Vec<u8>> {
        self.sequence().frame_bytes(frame)
    }

    pub fn cloud(&mut self, frame: usize) -> Result<std::sync::Arc<PointCloud>> {
        self.frames.cloud(frame)
    }

    pub fn is_materialized(&self, frame: usize) -> bool {
        self.masks.contains_key(&frame)
    }

    fn push_undo(&mut self, entry: UndoEntry) {
        self.undo.push_back(entry);
        while self.undo.len() > UNDO_DEPTH {
            self.undo.pop_front();
        }
    }

    /// Sets every point within `radius` of `center` to `label` (0 erases).
    /// Returns how many entries actually changed.
    pub fn apply_brush(&mut self, frame: usize, center: Vec3, radius: f64, label: LabelId) -> Result<usize> {
        self.check_frame(frame)?;
        self.check_label(label)?;
        if radius < 0.0 || radius.is_nan() {
            return Err(Error::NegativeRadius);
        }
        if self.sequence().entry(frame)?.point_count == 0 {
            return Ok(0);
        }
        let tree = self.frames.tree(frame)?;
        let selected = select_sphere(&tree, &center, radius)?;

        let created = !self.masks.contains_key(&frame);
        let len = tree.len();
        let mask = self.masks.entry(frame).or_insert_with(|| LabelMask::unlabeled(len));
        let mut previous = Vec::new();
        for i in selected {
            let old = mask.get(i);
            if old != label {
                previous.push((i, old));
                mask.set(i, label);
            }
        }
        let changed = previous.len();
        if changed == 0 {
            if created {
                self.masks.remove(&frame);
            }
            return Ok(0);
        }
        self.dirty.insert(frame);
        self.push_undo(UndoEntry {
            frame,
            created,
            previous,
        });
        Ok(changed)
    }

    /// Reverts the most recent journaled edit and returns its frame.
    pub fn undo(&mut self) -> Result<usize> {
        let entry = self.undo.pop_back().ok_or(Error::NothingToUndo)?;
        if entry.created {
            self.masks.remove(&entry.frame);
        } else if let Some(mask) = self.masks.get_mut(&entry.frame) {
            for &(i, old) in &entry.previous {
                mask.set(i, old);
            }
        }
        self.dirty.insert(entry.frame);
        Ok(entry.frame)
    }

    /// Propagates with the session's parameters.
    pub fn run_propagation(&mut self, from: usize, to: usize) -> Result<Vec<PropagationReport>> {
        let params = self.settings.params.clone();
        self.run_propagation_with(from, to, &params)
    }

    /// Propagates labels from frame `from` to `to` and replaces the masks
    /// of every frame after `from`, journaling one undo entry per frame.
    /// Nothing changes if any step fails.
    pub fn run_propagation_with(
        &mut self,
        from: usize,
        to: usize,
        params: &PropagationParams,
    ) -> Result<Vec<PropagationReport>> {
        self.check_frame(from)?;
        self.check_frame(to)?;
        let mut work = BTreeMap::new();
        if let Some(mask) = self.masks.get(&from) {
            work.insert(from, mask.clone());
        }
        let reports = propagate_sequence(&mut self.frames, &mut work, from, to, params)?;
        work.remove(&from);

        let order: Vec<usize> = if to > from {
            (from + 1..=to).collect()
        } else {
            (to..from).rev().collect()
        };
        for frame in order {
            let new = work.remove(&frame).expect("every step writes its mask");
            let entry = match self.masks.get(&frame) {
                Some(old) => UndoEntry {
                    frame,
                    created: false,
                    previous: old
                        .as_slice()
                        .iter()
                        .zip(new.as_slice())
                        .enumerate()
                        .filter_map(|(i, (&o, &n))| (o != n).then_some((i, o)))
                        .collect(),
                },
                None => UndoEntry {
                    frame,
                    created: true,
                    previous: Vec::new(),
                },
            };
            self.masks.insert(frame, new);
            self.dirty.insert(frame);
            self.push_undo(entry);
        }
        Ok(reports)
    }

    /// Every frame's labels as plain arrays, unedited frames all zero.
    pub fn export(&self) -> Result<ExportedLabels> {
        let seq = self.sequence();
        let frames = (0..seq.len())
            .map(|i| {
                Ok(ExportedFrame {
                    file: seq.entry(i)?.file_name.clone(),
                    timestamp_us: seq.entry(i)?.timestamp_us,
                    labels: self.mask(i)?.into_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExportedLabels {
            fps: seq.nominal_fps(),
            palette: self.settings.palette.clone(),
            frames,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExportedFrame {
    pub file: String,
    pub timestamp_us: u64,
    pub labels: Vec<LabelId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExportedLabels {
    pub fps: f64,
    pub palette: LabelPalette,
    pub frames: Vec<ExportedFrame>,
}
