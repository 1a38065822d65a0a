//! Carrying label masks from one frame to the next.
//!
//! Every label is tracked on its own: its points are registered onto the
//! next frame with ICP, moved by the result, and each moved point labels its
//! nearest neighbor in the next frame if that neighbor is within
//! `assign_radius`. When two labels claim one point the closer claim wins,
//! then the lower label id.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::FrameSource;
use crate::error::{Error, Result};
use crate::format::{LabelId, LabelMask};
use crate::geometry::PointCloud;
use crate::kdtree::KdTree;
use crate::registration::{icp, IcpParams, IcpResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    pub icp: IcpParams,
    /// Max distance (meters) from a moved point to the target point it labels.
    pub assign_radius: f64,
    /// Labels with fewer points are not tracked.
    pub min_points_per_label: usize,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            icp: IcpParams::default(),
            assign_radius: 0.02,
            min_points_per_label: 3,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        self.icp.validate()?;
        if !(self.assign_radius > 0.0 && self.assign_radius.is_finite()) {
            return Err(Error::InvalidParams("assign_radius must be positive".into()));
        }
        if self.min_points_per_label < 3 {
            return Err(Error::InvalidParams("min_points_per_label must be at least 3".into()));
        }
        Ok(())
    }
}

/// Outcome for one label in one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub icp_rmse: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Target points that received the label.
    pub transferred: usize,
    /// Source points whose label did not land on a target point.
    pub lost: usize,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl LabelReport {
    fn failure(source_points: usize, reason: String) -> Self {
        LabelReport {
            icp_rmse: None,
            iterations: 0,
            converged: false,
            transferred: 0,
            lost: source_points,
            failed: true,
            reason: Some(reason),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<usize>,
    pub labels: BTreeMap<LabelId, LabelReport>,
}

impl PropagationReport {
    pub fn failed_labels(&self) -> Vec<LabelId> {
        self.labels
            .iter()
            .filter_map(|(&l, r)| r.failed.then_some(l))
            .collect()
    }
}

/// One target point claimed by one moved source point.
struct Claim {
    target: usize,
    distance_sq: f64,
}

enum Tracked {
    Moved { result: IcpResult, claims: Vec<Claim> },
    Failed(String),
}

fn track_label(
    cloud_i: &PointCloud,
    indices: &[usize],
    cloud_j: &PointCloud,
    tree_j: &KdTree,
    params: &PropagationParams,
) -> Tracked {
    if indices.len() < params.min_points_per_label {
        return Tracked::Failed(format!(
            "too few points: {} < {}",
            indices.len(),
            params.min_points_per_label
        ));
    }
    let result = match icp(cloud_i, indices, cloud_j, tree_j, &params.icp) {
        Ok(r) => r,
        Err(e) => return Tracked::Failed(e.to_string()),
    };
    let radius_sq = params.assign_radius * params.assign_radius;
    let claims = indices
        .iter()
        .filter_map(|&s| {
            let moved = result.transform.apply_point(&cloud_i.point(s).position);
            let (target, distance_sq) = tree_j.knn_squared(&moved, 1)[0];
            (distance_sq <= radius_sq).then_some(Claim {
                target,
                distance_sq,
            })
        })
        .collect();
    Tracked::Moved { result, claims }
}

/// Predicts the mask of `cloud_j` from the mask of `cloud_i`.
pub fn propagate_labels(
    cloud_i: &PointCloud,
    mask_i: &LabelMask,
    cloud_j: &PointCloud,
    tree_j: &KdTree,
    params: &PropagationParams,
) -> Result<(LabelMask, PropagationReport)> {
    mask_i.ensure_aligned(cloud_i.len())?;
    params.validate()?;
    if tree_j.len() != cloud_j.len() {
        return Err(Error::InvalidParams("tree does not index the target cloud".into()));
    }

    let per_label: Vec<(LabelId, Vec<usize>)> = mask_i
        .labels()
        .into_iter()
        .map(|l| (l, mask_i.indices_of(l)))
        .collect();
    let tracked: Vec<Tracked> = per_label
        .par_iter()
        .map(|(_, indices)| track_label(cloud_i, indices, cloud_j, tree_j, params))
        .collect();

    // Labels are visited in ascending order, so on equal distance the
    // earlier (lower) label keeps the point.
    let mut owner: Vec<Option<(f64, LabelId)>> = vec![None; cloud_j.len()];
    for ((label, _), t) in per_label.iter().zip(&tracked) {
        if let Tracked::Moved { claims, .. } = t {
            for c in claims {
                let wins = owner[c.target].is_none_or(|(d, _)| c.distance_sq < d);
                if wins {
                    owner[c.target] = Some((c.distance_sq, *label));
                }
            }
        }
    }

    let mut mask_j = LabelMask::unlabeled(cloud_j.len());
    for (j, o) in owner.iter().enumerate() {
        if let Some((_, label)) = o {
            mask_j.set(j, *label);
        }
    }

    let mut report = PropagationReport::default();
    for ((label, indices), t) in per_label.iter().zip(tracked) {
        let entry = match t {
            Tracked::Failed(reason) => LabelReport::failure(indices.len(), reason),
            Tracked::Moved { result, claims } => {
                let landed = claims
                    .iter()
                    .filter(|c| mask_j.get(c.target) == *label)
                    .count();
                LabelReport {
                    icp_rmse: Some(result.final_rmse),
                    iterations: result.iterations_run,
                    converged: result.converged,
                    transferred: mask_j.count_of(*label),
                    lost: indices.len() - landed,
                    failed: false,
                    reason: None,
                }
            }
        };
        report.labels.insert(*label, entry);
    }
    Ok((mask_j, report))
}

/// Every label fails when the target frame has no points to register onto.
fn propagate_into_empty(mask_i: &LabelMask) -> (LabelMask, PropagationReport) {
    let mut report = PropagationReport::default();
    for label in mask_i.labels() {
        report.labels.insert(
            label,
            LabelReport::failure(mask_i.count_of(label), Error::RegistrationLost(0).to_string()),
        );
    }
    (LabelMask::unlabeled(0), report)
}

/// Propagates frame by frame from `start` to `end`, each step consuming the
/// mask the previous step produced. A reversed range runs backwards.
pub fn propagate_sequence<F: FrameSource>(
    frames: &mut F,
    masks: &mut BTreeMap<usize, LabelMask>,
    start: usize,
    end: usize,
    params: &PropagationParams,
) -> Result<Vec<PropagationReport>> {
    let count = frames.frame_count();
    for index in [start, end] {
        if index >= count {
            return Err(Error::FrameOutOfRange { index, count });
        }
    }
    if start == end {
        return Ok(Vec::new());
    }
    params.validate()?;
    if !masks.get(&start).is_some_and(LabelMask::has_labels) {
        return Err(Error::NoLabelsAtStart(start));
    }

    let mut reports = Vec::with_capacity(start.abs_diff(end));
    let mut i = start;
    while i != end {
        let j = if end > start { i + 1 } else { i - 1 };
        let cloud_i = frames.cloud(i)?;
        let cloud_j = frames.cloud(j)?;
        let mask_i = &masks[&i];
        let (mask_j, mut report) = if cloud_j.is_empty() {
            propagate_into_empty(mask_i)
        } else {
            let tree_j = frames.tree(j)?;
            propagate_labels(&cloud_i, mask_i, &cloud_j, &tree_j, params)?
        };
        report.from = Some(i);
        report.to = Some(j);
        masks.insert(j, mask_j);
        reports.push(report);
        i = j;
    }
    Ok(reports)
}
