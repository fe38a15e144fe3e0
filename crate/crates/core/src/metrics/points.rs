use super::MetricsError;
use nalgebra::Vector3;
use rayon::prelude::*;

/// Exact nearest-neighbor KD-tree over 3D points. Query results equal a
/// brute-force scan (the tie on equal distances resolves to the lower
/// original index in both paths).
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    /// Original index per point, co-sorted with the implicit tree layout.
    ids: Vec<usize>,
    /// Split axis per tree node (implicit median layout over `ids`).
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        let pts = points.to_vec();
        if !ids.is_empty() {
            build_node(&pts, &mut ids, &mut axes, 0, points.len());
        }
        Self {
            points: pts,
            ids,
            axes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Nearest point to `query`: (original index, distance).
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<(usize, f64)> {
        if self.ids.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.ids.len(), query, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, start: usize, len: usize, query: &Vector3<f64>, best: &mut (usize, f64)) {
        if len == 0 {
            return;
        }
        let mid = start + len / 2;
        let p = &self.points[self.ids[mid]];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && self.ids[mid] < best.0) {
            *best = (self.ids[mid], d2);
        }
        if len == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let delta = query[axis] - p[axis];
        let (near_start, near_len, far_start, far_len) = if delta < 0.0 {
            (start, len / 2, mid + 1, len - len / 2 - 1)
        } else {
            (mid + 1, len - len / 2 - 1, start, len / 2)
        };
        self.search(near_start, near_len, query, best);
        if delta * delta <= best.1 {
            self.search(far_start, far_len, query, best);
        }
    }
}

fn build_node(points: &[Vector3<f64>], ids: &mut [usize], axes: &mut [u8], start: usize, len: usize) {
    if len <= 1 {
        return;
    }
    // Widest-spread axis of this subset.
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &id in &ids[start..start + len] {
        lo = lo.inf(&points[id]);
        hi = hi.sup(&points[id]);
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = len / 2;
    ids[start..start + len].select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    axes[start + mid] = axis as u8;
    build_node(points, ids, axes, start, mid);
    build_node(points, ids, axes, start + mid + 1, len - mid - 1);
}

fn one_sided_mean_distance(from: &[Vector3<f64>], to_tree: &KdTree) -> f64 {
    let total: f64 = from
        .par_iter()
        .map(|p| to_tree.nearest(p).expect("tree non-empty").1)
        .sum();
    total / from.len() as f64
}

/// Symmetric Chamfer distance: the mean nearest-neighbor distance from
/// each set to the other, averaged.
pub fn chamfer(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    Ok(0.5 * (one_sided_mean_distance(a, &tb) + one_sided_mean_distance(b, &ta)))
}

/// Brute-force twin of [`chamfer`], the oracle for the accelerated path.
pub fn chamfer_brute(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let side = |from: &[Vector3<f64>], to: &[Vector3<f64>]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(0.5 * (side(a, b) + side(b, a)))
}

/// F-score at threshold `tau`: harmonic mean of precision (fraction of `a`
/// within `tau` of `b`) and recall (the reverse), scaled to percent.
pub fn f_score(a: &[Vector3<f64>], b: &[Vector3<f64>], tau: f64) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if tau <= 0.0 {
        return Err(MetricsError::BadThreshold(tau));
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    let frac_within = |from: &[Vector3<f64>], tree: &KdTree| -> f64 {
        let hits = from
            .par_iter()
            .filter(|p| tree.nearest(p).expect("non-empty").1 < tau)
            .count();
        hits as f64 / from.len() as f64
    };
    let precision = frac_within(a, &tb);
    let recall = frac_within(b, &ta);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Brute-force twin of [`f_score`].
pub fn f_score_brute(
    a: &[Vector3<f64>],
    b: &[Vector3<f64>],
    tau: f64,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if tau <= 0.0 {
        return Err(MetricsError::BadThreshold(tau));
    }
    let frac = |from: &[Vector3<f64>], to: &[Vector3<f64>]| -> f64 {
        from.iter()
            .filter(|p| {
                to.iter()
                    .map(|q| (*p - q).norm())
                    .fold(f64::INFINITY, f64::min)
                    < tau
            })
            .count() as f64
            / from.len() as f64
    };
    let precision = frac(a, b);
    let recall = frac(b, a);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Normal consistency in percent: |n_a . n_b| over nearest-neighbor pairs,
/// averaged over both directions. Normals must be unit length.
pub fn normal_consistency(
    a: &[(Vector3<f64>, Vector3<f64>)],
    b: &[(Vector3<f64>, Vector3<f64>)],
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    for (_, n) in a.iter().chain(b.iter()) {
        if (n.norm() - 1.0).abs() > 1e-6 {
            return Err(MetricsError::MissingNormals);
        }
    }
    let pa: Vec<Vector3<f64>> = a.iter().map(|(p, _)| *p).collect();
    let pb: Vec<Vector3<f64>> = b.iter().map(|(p, _)| *p).collect();
    let ta = KdTree::build(&pa);
    let tb = KdTree::build(&pb);
    let side = |from: &[(Vector3<f64>, Vector3<f64>)],
                to: &[(Vector3<f64>, Vector3<f64>)],
                tree: &KdTree| {
        from.par_iter()
            .map(|(p, n)| {
                let (j, _) = tree.nearest(p).expect("non-empty");
                n.dot(&to[j].1).abs()
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(100.0 * 0.5 * (side(a, b, &tb) + side(b, a, &ta)))
}
