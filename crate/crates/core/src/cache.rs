//! Lazily loaded frames and their k-d trees.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::kdtree::KdTree;
use crate::sequence::FrameSequence;

/// Frames this many steps apart are not kept resident at the same time.
pub const DEFAULT_CACHE_FRAMES: usize = 8;

/// Random access to a sequence's clouds and their spatial indexes.
pub trait FrameSource {
    fn frame_count(&self) -> usize;
    fn cloud(&mut self, index: usize) -> Result<Arc<PointCloud>>;
    fn tree(&mut self, index: usize) -> Result<Arc<KdTree>>;
}

#[derive(Debug)]
struct Slot {
    index: usize,
    cloud: Arc<PointCloud>,
    tree: Option<Arc<KdTree>>,
}

/// LRU over frames read from disk; trees are built on first use.
#[derive(Debug)]
pub struct FrameCache {
    sequence: FrameSequence,
    capacity: usize,
    slots: VecDeque<Slot>,
}

impl FrameCache {
    pub fn new(sequence: FrameSequence) -> Self {
        Self::with_capacity(sequence, DEFAULT_CACHE_FRAMES)
    }

    pub fn with_capacity(sequence: FrameSequence, capacity: usize) -> Self {
        FrameCache {
            sequence,
            capacity: capacity.max(2),
            slots: VecDeque::new(),
        }
    }

    pub fn sequence(&self) -> &FrameSequence {
        &self.sequence
    }

    /// Frame indices currently resident, least recently used first.
    pub fn resident(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.index).collect()
    }

    fn slot(&mut self, index: usize) -> Result<&mut Slot> {
        if let Some(pos) = self.slots.iter().position(|s| s.index == index) {
            let slot = self.slots.remove(pos).expect("position is in range");
            self.slots.push_back(slot);
        } else {
            let cloud = Arc::new(self.sequence.read_cloud(index)?);
            if self.slots.len() == self.capacity {
                self.slots.pop_front();
            }
            self.slots.push_back(Slot {
                index,
                cloud,
                tree: None,
            });
        }
        Ok(self.slots.back_mut().expect("just pushed"))
    }
}

impl FrameSource for FrameCache {
    fn frame_count(&self) -> usize {
        self.sequence.len()
    }

    fn cloud(&mut self, index: usize) -> Result<Arc<PointCloud>> {
        Ok(self.slot(index)?.cloud.clone())
    }

    fn tree(&mut self, index: usize) -> Result<Arc<KdTree>> {
        let slot = self.slot(index)?;
        if slot.tree.is_none() {
            slot.tree = Some(Arc::new(KdTree::build(&slot.cloud)?));
        }
        Ok(slot.tree.clone().expect("built above"))
    }
}

/// Frames held in memory, each tree built once on demand.
#[derive(Debug)]
pub struct MemoryFrames {
    clouds: Vec<Arc<PointCloud>>,
    trees: Vec<Option<Arc<KdTree>>>,
}

impl MemoryFrames {
    pub fn new(clouds: Vec<PointCloud>) -> Self {
        let trees = vec![None; clouds.len()];
        MemoryFrames {
            clouds: clouds.into_iter().map(Arc::new).collect(),
            trees,
        }
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.clouds.len() {
            return Err(Error::FrameOutOfRange {
                index,
                count: self.clouds.len(),
            });
        }
        Ok(())
    }
}

impl FrameSource for MemoryFrames {
    fn frame_count(&self) -> usize {
        self.clouds.len()
    }

    fn cloud(&mut self, index: usize) -> Result<Arc<PointCloud>> {
        self.check(index)?;
        Ok(self.clouds[index].clone())
    }

    fn tree(&mut self, index: usize) -> Result<Arc<KdTree>> {
        self.check(index)?;
        if self.trees[index].is_none() {
            self.trees[index] = Some(Arc::new(KdTree::build(&self.clouds[index])?));
        }
        Ok(self.trees[index].clone().expect("built above"))
    }
}
