use super::TrajectoryError;
use crate::geometry::Pose;
use crate::img::ImageF;

/// Variance of the 3x3 Laplacian response over the luma channel: the
/// sharpness score used to rank frames.
pub fn laplacian_sharpness(img: &ImageF) -> f64 {
    if img.width < 3 || img.height < 3 {
        return 0.0;
    }
    let luma = |x: usize, y: usize| -> f64 {
        let p = img.pixel(x, y);
        p.iter().sum::<f64>() / p.len() as f64
    };
    let mut responses = Vec::with_capacity((img.width - 2) * (img.height - 2));
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let lap = luma(x - 1, y) + luma(x + 1, y) + luma(x, y - 1) + luma(x, y + 1)
                - 4.0 * luma(x, y);
            responses.push(lap);
        }
    }
    let mean = responses.iter().sum::<f64>() / responses.len() as f64;
    responses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / responses.len() as f64
}

fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    a.rotation_distance(b) + a.translation_distance(b)
}

/// Picks `k` frame indices: the sharpest frame first, then greedy
/// farthest-point selection (rotation-angle plus translation distance)
/// among frames whose sharpness is at least the median. Ties break toward
/// the lower index, so the choice is deterministic and permutation-stable.
pub fn select_keyframes(
    frames: &[ImageF],
    poses: &[Pose],
    k: usize,
) -> Result<Vec<usize>, TrajectoryError> {
    let n = frames.len();
    if poses.len() != n {
        return Err(TrajectoryError::InvalidConfig(format!(
            "{n} frames but {} poses",
            poses.len()
        )));
    }
    if k > n {
        return Err(TrajectoryError::TooManyKeyframes { k, frames: n });
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let sharpness: Vec<f64> = frames.iter().map(laplacian_sharpness).collect();
    let mut sorted = sharpness.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[(n - 1) / 2];
    // Frames at or above the median sharpness are eligible; with uniform
    // sharpness that is every frame.
    let eligible: Vec<usize> = (0..n).filter(|&i| sharpness[i] >= median).collect();

    let first = eligible
        .iter()
        .copied()
        .max_by(|&a, &b| {
            sharpness[a]
                .partial_cmp(&sharpness[b])
                .unwrap()
                .then(b.cmp(&a)) // ties -> lower index wins the max
        })
        .expect("eligible set is non-empty");
    let mut selected = vec![first];
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for &i in &eligible {
            if selected.contains(&i) {
                continue;
            }
            let min_dist = selected
                .iter()
                .map(|&s| pose_distance(&poses[i], &poses[s]))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((bi, bd)) => min_dist > bd || (min_dist == bd && i < bi),
            };
            if better {
                best = Some((i, min_dist));
            }
        }
        match best {
            Some((i, _)) => selected.push(i),
            // Eligible set exhausted; fall back to the remaining frames.
            None => {
                for i in 0..n {
                    if !selected.contains(&i) {
                        selected.push(i);
                        break;
                    }
                }
            }
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::OrbitPath;
    use nalgebra::Vector3;

    fn flat_frame(v: f64) -> ImageF {
        ImageF::filled(8, 8, 3, v)
    }

    fn textured_frame(amp: f64) -> ImageF {
        let mut img = ImageF::new(8, 8, 3);
        for y in 0..8 {
            for x in 0..8 {
                let v = 0.5 + amp * (((x + y) % 2) as f64 - 0.5);
                for c in 0..3 {
                    img.set(x, y, c, v);
                }
            }
        }
        img
    }

    fn arc_poses(n: usize) -> Vec<Pose> {
        let source = Pose::look_at(
            Vector3::new(0.0, 0.0, -3.0),
            Vector3::zeros(),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let orbit =
            OrbitPath::anchored(&source, Vector3::zeros(), 3.0, 1.2, 0.0, n).unwrap();
        orbit.poses().unwrap()
    }

    #[test]
    fn k_equals_n_returns_everything() {
        let frames: Vec<ImageF> = (0..5).map(|_| flat_frame(0.5)).collect();
        let poses = arc_poses(5);
        assert_eq!(select_keyframes(&frames, &poses, 5).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn sharpest_frame_is_chosen_first() {
        let mut frames: Vec<ImageF> = (0..6).map(|_| flat_frame(0.5)).collect();
        frames[3] = textured_frame(0.6);
        // All poses identical: only sharpness can order the first pick.
        let poses = vec![arc_poses(1)[0]; 6];
        let sel = select_keyframes(&frames, &poses, 1).unwrap();
        assert_eq!(sel, vec![3]);
    }

    #[test]
    fn uniform_arc_selection_is_well_spread() {
        let frames: Vec<ImageF> = (0..16).map(|_| textured_frame(0.4)).collect();
        let poses = arc_poses(16);
        let sel = select_keyframes(&frames, &poses, 4).unwrap();
        let mut sorted = sel.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            assert!(
                w[1] - w[0] >= 3,
                "indices {sorted:?} not pairwise separated by >= 3 steps"
            );
        }

        // Brute-force oracle: the optimal max-min-distance 4-subset on the
        // arc also has separation >= 3 index steps, and the greedy pick is
        // within a factor two of the optimum (classic farthest-point bound).
        let dist = |a: usize, b: usize| pose_distance(&poses[a], &poses[b]);
        let min_pair = |s: &[usize]| -> f64 {
            let mut m = f64::INFINITY;
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    m = m.min(dist(s[i], s[j]));
                }
            }
            m
        };
        let mut best = 0.0f64;
        for a in 0..16 {
            for b in a + 1..16 {
                for c in b + 1..16 {
                    for d in c + 1..16 {
                        best = best.max(min_pair(&[a, b, c, d]));
                    }
                }
            }
        }
        let got = min_pair(&sel);
        assert!(
            got >= best / 2.0 - 1e-12,
            "greedy min distance {got} vs optimal {best}"
        );
    }

    #[test]
    fn too_many_keyframes_is_an_error() {
        let frames: Vec<ImageF> = (0..3).map(|_| flat_frame(0.1)).collect();
        let poses = arc_poses(3);
        assert!(matches!(
            select_keyframes(&frames, &poses, 4),
            Err(TrajectoryError::TooManyKeyframes { .. })
        ));
    }

    #[test]
    fn selection_is_deterministic() {
        let frames: Vec<ImageF> = (0..10).map(|_| textured_frame(0.3)).collect();
        let poses = arc_poses(10);
        let a = select_keyframes(&frames, &poses, 3).unwrap();
        let b = select_keyframes(&frames, &poses, 3).unwrap();
        assert_eq!(a, b);
    }
}
