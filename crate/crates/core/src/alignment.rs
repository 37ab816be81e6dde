//! Model-to-scene alignment score: the fraction of candidate points that can
//! be bound to a distinct scene point within `tau`.
//!
//! Candidate points are visited in storage order. Each binds to the closest
//! scene point within `tau` that no earlier candidate point has claimed; a
//! point whose neighbors are all claimed binds nothing. There is no
//! backtracking, so the result is a greedy matching, not an optimal one.

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::kdtree::KdTree;

/// Default match radius, meters.
pub const DEFAULT_TAU: f64 = 0.01;
/// Default score required to leave acquisition.
pub const DEFAULT_EPSILON: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentScore {
    pub value: f64,
    pub matched_count: usize,
    pub candidate_size: usize,
}

impl AlignmentScore {
    pub fn zero(candidate_size: usize) -> Self {
        Self {
            value: 0.0,
            matched_count: 0,
            candidate_size,
        }
    }
}

pub fn alignment_score(candidate: &PointCloud, scene_tree: &KdTree, tau: f64) -> Result<AlignmentScore> {
    alignment_score_transformed(candidate, &RigidTransform::identity(), scene_tree, tau)
}

/// Scores `transform · candidate` without materializing the moved cloud.
pub fn alignment_score_transformed(
    candidate: &PointCloud,
    transform: &RigidTransform,
    scene_tree: &KdTree,
    tau: f64,
) -> Result<AlignmentScore> {
    if candidate.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let mut bound = vec![false; scene_tree.len()];
    let mut hits = Vec::new();
    let mut matched = 0;
    for p in candidate.points() {
        scene_tree.radius_search_raw(&transform.apply(p), tau, &mut hits);
        if let Some(&(i, _)) = hits.iter().find(|(i, _)| !bound[*i]) {
            bound[i] = true;
            matched += 1;
        }
    }
    Ok(AlignmentScore {
        value: matched as f64 / candidate.len() as f64,
        matched_count: matched,
        candidate_size: candidate.len(),
    })
}
