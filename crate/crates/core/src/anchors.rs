//! Trajectory anchor machinery: a static vocabulary clustered offline from
//! expert trajectories, fusion with per-scene dynamic anchors into one hybrid
//! set, and nearest-anchor lookup for training targets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::traj::FlatTrajectory;
use crate::{Error, Result};

/// Independent k-means++ restarts per build; best inertia wins. Fixed so a
/// (data, seed) pair always reproduces the same vocabulary.
const KMEANS_RESTARTS: u64 = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticVocabulary {
    pub anchors: Vec<FlatTrajectory>,
    /// Final within-cluster sum of squares.
    pub inertia: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorProvenance {
    /// Index of the decoder head that produced it.
    Dynamic(usize),
    /// Index into the static vocabulary.
    Static(usize),
}

/// Hybrid anchor collection: dynamic anchors first, then the static
/// vocabulary, each tagged with where it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<FlatTrajectory>,
    pub provenance: Vec<AnchorProvenance>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded to
/// the point farthest from its assigned centroid; iteration stops when the
/// largest centroid shift drops below `tol`. Inertia is asserted
/// non-increasing across iterations.
pub fn kmeans(
    data: &[FlatTrajectory],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<StaticVocabulary> {
    if k == 0 || data.len() < k {
        return Err(Error::TooFewPoints { n: data.len(), k });
    }
    let dim = data[0].values().len();
    for d in data {
        if d.values().len() != dim {
            return Err(Error::HorizonMismatch {
                a: dim / 2,
                b: d.values().len() / 2,
            });
        }
    }

    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let rng_seed = crate::scene::mix_seed(seed, restart);
        let (centroids, inertia) = lloyd_once(data, k, dim, rng_seed, max_iters, tol);
        if best.as_ref().is_none_or(|(_, bi)| inertia < *bi) {
            best = Some((centroids, inertia));
        }
    }
    let (centroids, inertia) = best.unwrap();
    Ok(StaticVocabulary {
        anchors: centroids
            .into_iter()
            .map(|c| FlatTrajectory::new(c).expect("even length"))
            .collect(),
        inertia,
        seed,
    })
}

fn lloyd_once(
    data: &[FlatTrajectory],
    k: usize,
    dim: usize,
    rng_seed: u64,
    max_iters: usize,
    tol: f64,
) -> (Vec<Vec<f64>>, f64) {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(rng_seed);
    let mut centroids = plus_plus_seeding(data, k, &mut rng);
    let mut assignment = vec![0usize; data.len()];
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..max_iters {
        // assignment step
        let mut inertia = 0.0;
        for (i, point) in data.iter().enumerate() {
            let (best_c, best_d) = nearest_centroid(point.values(), &centroids);
            assignment[i] = best_c;
            inertia += best_d;
        }
        assert!(
            inertia <= prev_inertia + 1e-9,
            "inertia increased: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;

        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, point) in data.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(point.values()) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed to the farthest point from its current centroid
                let far = data
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| {
                        let da = sq_dist(a.values(), &centroids[assignment[*i]]);
                        let db = sq_dist(b.values(), &centroids[assignment[*j]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(_, p)| p.values().to_vec())
                    .unwrap();
                shift = shift.max(sq_dist(&far, &centroids[c]).sqrt());
                centroids[c] = far;
                continue;
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < tol {
            break;
        }
    }

    // final assignment for the reported inertia
    let mut inertia = 0.0;
    for point in data {
        inertia += nearest_centroid(point.values(), &centroids).1;
    }
    (centroids, inertia)
}

fn plus_plus_seeding(data: &[FlatTrajectory], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..data.len());
    centroids.push(data[first].values().to_vec());
    let mut d2: Vec<f64> = data
        .iter()
        .map(|p| sq_dist(p.values(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 1e-18 {
            // all points coincide with existing centroids
            rng.gen_range(0..data.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut idx = data.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        };
        centroids.push(data[next].values().to_vec());
        for (i, p) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p.values(), centroids.last().unwrap()));
        }
    }
    centroids
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Concatenate dynamic anchors (first, in head order) with the static
/// vocabulary. An empty dynamic list is allowed only in ablation mode.
pub fn fuse(
    vocabulary: &StaticVocabulary,
    dynamic: &[FlatTrajectory],
    expected_dynamic: usize,
) -> Result<AnchorSet> {
    if dynamic.len() != expected_dynamic {
        return Err(Error::AnchorCountMismatch {
            expected: expected_dynamic,
            got: dynamic.len(),
        });
    }
    let mut anchors = Vec::with_capacity(dynamic.len() + vocabulary.anchors.len());
    let mut provenance = Vec::with_capacity(anchors.capacity());
    for (i, a) in dynamic.iter().enumerate() {
        anchors.push(a.clone());
        provenance.push(AnchorProvenance::Dynamic(i));
    }
    for (i, a) in vocabulary.anchors.iter().enumerate() {
        anchors.push(a.clone());
        provenance.push(AnchorProvenance::Static(i));
    }
    Ok(AnchorSet {
        anchors,
        provenance,
    })
}

/// Index and displacement of the anchor closest to `target` (mean waypoint
/// distance); ties go to the lowest index.
pub fn nearest_anchor(target: &FlatTrajectory, set: &AnchorSet) -> Result<(usize, f64)> {
    if set.is_empty() {
        return Err(Error::EmptyInput {
            context: "nearest_anchor",
        });
    }
    let mut best = (0usize, f64::INFINITY);
    for (i, a) in set.anchors.iter().enumerate() {
        let d = target.ade(a)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Vocabulary file payload: anchors plus build metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub corpus_hash: String,
    pub anchors: Vec<Vec<f64>>,
}

impl VocabularyFile {
    pub fn from_vocabulary(v: &StaticVocabulary, corpus_hash: String) -> Self {
        Self {
            k: v.anchors.len(),
            seed: v.seed,
            inertia: v.inertia,
            corpus_hash,
            anchors: v.anchors.iter().map(|a| a.values().to_vec()).collect(),
        }
    }

    pub fn to_vocabulary(&self) -> Result<StaticVocabulary> {
        Ok(StaticVocabulary {
            anchors: self
                .anchors
                .iter()
                .map(|a| FlatTrajectory::new(a.clone()))
                .collect::<Result<_>>()?,
            inertia: self.inertia,
            seed: self.seed,
        })
    }
}

/// FNV-1a over bytes; used to fingerprint the corpus manifest a vocabulary
/// was built from.
pub fn fnv1a_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
