//! Rigid alignment of a labeled subset onto the next frame.
//!
//! [`icp`] alternates a correspondence step with a closed-form least-squares
//! fit ([`estimate_rigid_transform`]). Correspondences are either the
//! spatially nearest target point, or, in color mode, the best color match
//! among the `k` nearest targets. Color only chooses the match; the fit is
//! always a plain spatial least-squares fit.

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud, RigidTransform, Rgb, Vec3};
use crate::kdtree::KdTree;

/// Below this ratio of second to first singular value the cross-covariance
/// is treated as rank ≤ 1 and only a translation is fitted.
pub const DEGENERATE_SINGULAR_RATIO: f64 = 1e-9;

const RMSE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrespondenceMode {
    Spatial,
    Color,
}

impl std::str::FromStr for CorrespondenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(CorrespondenceMode::Spatial),
            "color" => Ok(CorrespondenceMode::Color),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop when the RMSE changes by at most this fraction of its previous value.
    pub rel_tolerance: f64,
    /// Stop when the RMSE drops to this value (meters).
    pub abs_tolerance: f64,
    /// Correspondences farther than this (meters) are rejected.
    pub max_correspondence_distance: f64,
    pub mode: CorrespondenceMode,
    /// Candidate count for color matching.
    pub k_neighbors: usize,
    /// Larger labeled subsets are randomly subsampled to this size.
    pub subsample_limit: usize,
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 50,
            rel_tolerance: 1e-6,
            abs_tolerance: 1e-8,
            max_correspondence_distance: 0.1,
            mode: CorrespondenceMode::Spatial,
            k_neighbors: 8,
            subsample_limit: 20_000,
            seed: 0,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.rel_tolerance >= 0.0 && self.abs_tolerance >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.max_correspondence_distance.is_nan() || self.max_correspondence_distance <= 0.0 {
            return bad("max_correspondence_distance must be positive");
        }
        if self.k_neighbors < 1 {
            return bad("k_neighbors must be at least 1");
        }
        if self.subsample_limit < 3 {
            return bad("subsample_limit must be at least 3");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub distance_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    /// Maps original source positions into the target frame.
    pub transform: RigidTransform,
    pub final_rmse: f64,
    pub iterations_run: usize,
    /// True when a tolerance, not the iteration cap, ended the loop.
    pub converged: bool,
    pub correspondence_count: usize,
    /// Correspondences at the final transform; `source` is a source cloud index.
    pub correspondences: Vec<Correspondence>,
    /// RMSE measured at the start of each iteration.
    pub rmse_history: Vec<f64>,
}

/// Least-squares rigid transform taking `source[i]` onto `target[i]`.
///
/// Uses the SVD of the cross-covariance `H = Σ (pᵢ − p̄)(qᵢ − q̄)ᵀ`, with the
/// sign of the weakest singular direction flipped when needed so the result
/// is a proper rotation. A rank ≤ 1 covariance yields a pure translation.
pub fn estimate_rigid_transform(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::PairCountMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::InsufficientCorrespondences(source.len()));
    }
    let p_bar = centroid(source)?;
    let q_bar = centroid(target)?;
    let mut h = Matrix3::zeros();
    for (p, q) in source.iter().zip(target) {
        h += (p - p_bar) * (q - q_bar).transpose();
    }

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::InvalidTransform("SVD did not converge".into())),
    };
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let (largest, second, weakest) = (sv[order[0]], sv[order[1]], order[2]);

    let rotation = if largest <= 0.0 || second < DEGENERATE_SINGULAR_RATIO * largest {
        Matrix3::identity()
    } else {
        let v = v_t.transpose();
        let d = (v * u.transpose()).determinant().signum();
        let mut correction = Matrix3::identity();
        correction[(weakest, weakest)] = d;
        v * correction * u.transpose()
    };
    let translation = q_bar - rotation * p_bar;
    Ok(RigidTransform::from_parts(rotation, translation))
}

fn gate(max_dist: f64) -> f64 {
    max_dist * max_dist
}

/// Nearest target for each source point, dropping those beyond `max_dist`.
/// `source` in each result is the position in `source_points`.
pub fn find_correspondences_spatial(
    source_points: &[Vec3],
    target_tree: &KdTree,
    max_dist: f64,
) -> Vec<Correspondence> {
    let max_sq = gate(max_dist);
    source_points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (target, distance_sq) = target_tree.knn_squared(p, 1)[0];
            (distance_sq <= max_sq).then_some(Correspondence {
                source: i,
                target,
                distance_sq,
            })
        })
        .collect()
}

fn match_by_color(
    position: &Vec3,
    color: Rgb,
    target: &PointCloud,
    target_tree: &KdTree,
    k: usize,
    max_sq: f64,
) -> Option<(usize, f64)> {
    // knn_squared is sorted by (distance, index), so keeping the first
    // strict color minimum resolves ties by distance, then index.
    let mut best: Option<(usize, f64, f64)> = None;
    for (index, distance_sq) in target_tree.knn_squared(position, k) {
        if distance_sq > max_sq {
            break;
        }
        let color_sq = color.distance_sq(target.point(index).color);
        if best.is_none_or(|(_, _, c)| color_sq < c) {
            best = Some((index, distance_sq, color_sq));
        }
    }
    best.map(|(index, distance_sq, _)| (index, distance_sq))
}

/// For each listed source point: its `k` nearest targets, gated by
/// `max_dist`, then the one with the most similar color.
pub fn find_correspondences_color(
    source: &PointCloud,
    source_indices: &[usize],
    target: &PointCloud,
    target_tree: &KdTree,
    k: usize,
    max_dist: f64,
) -> Vec<Correspondence> {
    let max_sq = gate(max_dist);
    source_indices
        .iter()
        .filter_map(|&i| {
            let p = source.point(i);
            match_by_color(&p.position, p.color, target, target_tree, k, max_sq).map(
                |(target, distance_sq)| Correspondence {
                    source: i,
                    target,
                    distance_sq,
                },
            )
        })
        .collect()
}

fn correspondences_at(
    positions: &[Vec3],
    colors: &[Rgb],
    target: &PointCloud,
    target_tree: &KdTree,
    params: &IcpParams,
) -> Vec<Correspondence> {
    match params.mode {
        CorrespondenceMode::Spatial => {
            find_correspondences_spatial(positions, target_tree, params.max_correspondence_distance)
        }
        CorrespondenceMode::Color => {
            let max_sq = gate(params.max_correspondence_distance);
            positions
                .iter()
                .zip(colors)
                .enumerate()
                .filter_map(|(i, (p, &c))| {
                    match_by_color(p, c, target, target_tree, params.k_neighbors, max_sq).map(
                        |(target, distance_sq)| Correspondence {
                            source: i,
                            target,
                            distance_sq,
                        },
                    )
                })
                .collect()
        }
    }
}

fn rmse(corr: &[Correspondence]) -> f64 {
    (corr.iter().map(|c| c.distance_sq).sum::<f64>() / corr.len() as f64).sqrt()
}

/// Picks the working subset, subsampling with `params.seed` when it is
/// larger than `params.subsample_limit`.
fn working_subset(source_indices: &[usize], params: &IcpParams) -> Vec<usize> {
    if source_indices.len() <= params.subsample_limit {
        return source_indices.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut picks = rand::seq::index::sample(&mut rng, source_indices.len(), params.subsample_limit).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| source_indices[i]).collect()
}

/// Registers the listed source points onto `target`.
pub fn icp(
    source: &PointCloud,
    source_indices: &[usize],
    target: &PointCloud,
    target_tree: &KdTree,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    if source_indices.len() < 3 {
        return Err(Error::InsufficientCorrespondences(source_indices.len()));
    }
    let subset = working_subset(source_indices, params);
    let original: Vec<Vec3> = subset.iter().map(|&i| source.point(i).position).collect();
    let colors: Vec<Rgb> = subset.iter().map(|&i| source.point(i).color).collect();

    let mut current = original.clone();
    let mut total = RigidTransform::identity();
    let mut history = Vec::new();
    let mut converged = false;
    let mut last: Option<Vec<Correspondence>> = None;

    for _ in 0..params.max_iterations {
        let corr = correspondences_at(&current, &colors, target, target_tree, params);
        if corr.len() < 3 {
            return Err(Error::RegistrationLost(corr.len()));
        }
        let err = rmse(&corr);
        let settled = history
            .last()
            .is_some_and(|&prev: &f64| (prev - err).abs() <= params.rel_tolerance * prev.max(RMSE_FLOOR));
        history.push(err);
        if err <= params.abs_tolerance || settled {
            converged = true;
            last = Some(corr);
            break;
        }

        let from: Vec<Vec3> = corr.iter().map(|c| current[c.source]).collect();
        let to: Vec<Vec3> = corr.iter().map(|c| target.point(c.target).position).collect();
        let step = estimate_rigid_transform(&from, &to)?;
        total = step.compose(&total);
        for (cur, orig) in current.iter_mut().zip(&original) {
            *cur = total.apply_point(orig);
        }
    }

    let final_corr = match last {
        Some(corr) => corr,
        None => {
            let corr = correspondences_at(&current, &colors, target, target_tree, params);
            if corr.len() < 3 {
                return Err(Error::RegistrationLost(corr.len()));
            }
            corr
        }
    };
    let final_rmse = rmse(&final_corr);
    Ok(IcpResult {
        transform: total,
        final_rmse,
        iterations_run: history.len(),
        converged,
        correspondence_count: final_corr.len(),
        correspondences: final_corr
            .into_iter()
            .map(|c| Correspondence {
                source: subset[c.source],
                ..c
            })
            .collect(),
        rmse_history: history,
    })
}
