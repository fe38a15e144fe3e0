use super::{SamplerConfig, TrajectoryCandidate, ViewProbe};
use crate::geometry::CameraIntrinsics;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

/// Why a candidate was rejected; the display strings appear in rejection
/// logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    ExcessiveUnseen,
    InsufficientUnseen,
    NearPlaneOcclusion,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::ExcessiveUnseen => write!(f, "excessive unseen region coverage"),
            RejectReason::InsufficientUnseen => write!(f, "insufficient unseen region coverage"),
            RejectReason::NearPlaneOcclusion => write!(f, "near-plane occlusion"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    Unevaluated,
    Accepted,
    Rejected {
        /// Position in the probed keyframe list that failed first.
        keyframe: usize,
        reason: RejectReason,
        /// The measured quantity that violated its bound (mask area or
        /// minimum depth).
        measured: f64,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

/// Checks one candidate: every probed keyframe must satisfy
/// `s_low < area(mask) < s_high` and `min depth over hit pixels > d0`.
/// The area check runs first, so an all-unseen frame fails on area.
/// Probed depths and masks are stored on the candidate for post-hoc
/// re-checking.
pub fn evaluate_candidate(
    candidate: &mut TrajectoryCandidate,
    probe: &dyn ViewProbe,
    intrinsics: &CameraIntrinsics,
    config: &SamplerConfig,
) {
    candidate.keyframe_depths.clear();
    candidate.keyframe_masks.clear();
    let mut verdict = Verdict::Accepted;
    for (ki, &fi) in candidate.probe_indices.iter().enumerate() {
        let (depth, mask) = probe.depth_and_mask(intrinsics, &candidate.poses[fi]);
        let area = mask.mean();
        let mut min_depth = f64::INFINITY;
        for &d in &depth.data {
            if d.is_finite() && d < min_depth {
                min_depth = d;
            }
        }
        candidate.keyframe_depths.push(depth);
        candidate.keyframe_masks.push(mask);
        if verdict != Verdict::Accepted {
            continue; // keep probing to store all keyframes, verdict fixed
        }
        if area >= config.s_high {
            verdict = Verdict::Rejected {
                keyframe: ki,
                reason: RejectReason::ExcessiveUnseen,
                measured: area,
            };
        } else if area <= config.s_low {
            verdict = Verdict::Rejected {
                keyframe: ki,
                reason: RejectReason::InsufficientUnseen,
                measured: area,
            };
        } else if !(min_depth > config.d0) {
            verdict = Verdict::Rejected {
                keyframe: ki,
                reason: RejectReason::NearPlaneOcclusion,
                measured: min_depth,
            };
        }
    }
    candidate.verdict = verdict;
}

/// Evaluates candidates in parallel; results stay in proposal order.
pub fn evaluate_candidates(
    candidates: &mut [TrajectoryCandidate],
    probe: &dyn ViewProbe,
    intrinsics: &CameraIntrinsics,
    config: &SamplerConfig,
) {
    candidates
        .par_iter_mut()
        .for_each(|c| evaluate_candidate(c, probe, intrinsics, config));
}

/// CSV rejection log: candidate id, keyframe, failed inequality, measured
/// value. Accepted candidates appear with an `accepted` row.
pub fn write_rejection_log(
    candidates: &[TrajectoryCandidate],
    path: &Path,
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "candidate,keyframe,failed_inequality,measured")?;
    for (i, c) in candidates.iter().enumerate() {
        match c.verdict {
            Verdict::Accepted => writeln!(w, "{i},,accepted,")?,
            Verdict::Unevaluated => writeln!(w, "{i},,unevaluated,")?,
            Verdict::Rejected {
                keyframe,
                reason,
                measured,
            } => writeln!(w, "{i},{keyframe},{reason},{measured}")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::img::ImageF;
    use crate::trajectory::{OrbitPath, Verdict};
    use crate::geometry::Pose;
    use nalgebra::Vector3;

    /// Probe returning fixed (area, min depth) per keyframe.
    struct FixedProbe {
        areas: Vec<f64>,
        depths: Vec<f64>,
        counter: std::sync::atomic::AtomicUsize,
    }

    impl super::super::ViewProbe for FixedProbe {
        fn depth_and_mask(
            &self,
            intrinsics: &CameraIntrinsics,
            _pose: &Pose,
        ) -> (ImageF, ImageF) {
            let k = self
                .counter
                .fetch_add(1, std::sync::atomic::Ordering::SeqCst)
                % self.areas.len();
            let w = intrinsics.width;
            let h = intrinsics.height;
            let n = w * h;
            let unseen = (self.areas[k] * n as f64).round() as usize;
            let mut mask = ImageF::new(w, h, 1);
            let mut depth = ImageF::filled(w, h, 1, f64::INFINITY);
            for i in 0..n {
                if i < unseen {
                    mask.data[i] = 1.0;
                } else {
                    depth.data[i] = self.depths[k] + 0.3 * (i % 7) as f64;
                }
            }
            (depth, mask)
        }
    }

    fn candidate(n_keyframes: usize) -> TrajectoryCandidate {
        let source = Pose::look_at(
            Vector3::new(0.0, 0.0, -3.0),
            Vector3::zeros(),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let orbit = OrbitPath::anchored(&source, Vector3::zeros(), 3.0, 0.5, 0.0, 16).unwrap();
        let poses = orbit.poses().unwrap();
        TrajectoryCandidate {
            source_view: 0,
            orbit,
            poses,
            probe_indices: crate::trajectory::spread_indices(16, n_keyframes),
            keyframe_depths: Vec::new(),
            keyframe_masks: Vec::new(),
            verdict: Verdict::Unevaluated,
        }
    }

    fn config() -> SamplerConfig {
        let mut cfg = SamplerConfig::for_scene_diagonal(1.0);
        cfg.s_low = 0.05;
        cfg.s_high = 0.45;
        cfg.d0 = 0.2;
        cfg
    }

    #[test]
    fn good_keyframes_are_accepted() {
        let probe = FixedProbe {
            areas: vec![0.30],
            depths: vec![0.9],
            counter: Default::default(),
        };
        let mut c = candidate(4);
        let intr = CameraIntrinsics::from_fov(20, 20, 1.2).unwrap();
        evaluate_candidate(&mut c, &probe, &intr, &config());
        assert!(c.verdict.is_accepted());
        assert_eq!(c.keyframe_depths.len(), 4);
    }

    #[test]
    fn oversized_unseen_area_is_rejected_with_reason() {
        let probe = FixedProbe {
            areas: vec![0.60],
            depths: vec![0.9],
            counter: Default::default(),
        };
        let mut c = candidate(4);
        let intr = CameraIntrinsics::from_fov(20, 20, 1.2).unwrap();
        evaluate_candidate(&mut c, &probe, &intr, &config());
        match c.verdict {
            Verdict::Rejected {
                keyframe, reason, ..
            } => {
                assert_eq!(keyframe, 0);
                assert_eq!(reason, RejectReason::ExcessiveUnseen);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn near_plane_occlusion_is_rejected_with_reason() {
        let probe = FixedProbe {
            areas: vec![0.30],
            depths: vec![0.05],
            counter: Default::default(),
        };
        let mut c = candidate(4);
        let intr = CameraIntrinsics::from_fov(20, 20, 1.2).unwrap();
        evaluate_candidate(&mut c, &probe, &intr, &config());
        match c.verdict {
            Verdict::Rejected { reason, measured, .. } => {
                assert_eq!(reason, RejectReason::NearPlaneOcclusion);
                assert!(measured < 0.2);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn tightening_thresholds_never_accepts_a_rejection() {
        // Monotonicity: shrinking the area window or raising d0 can only
        // flip acceptances to rejections.
        let probe = FixedProbe {
            areas: vec![0.30, 0.2, 0.40, 0.1],
            depths: vec![0.9, 1.5, 0.5, 2.0],
            counter: Default::default(),
        };
        let intr = CameraIntrinsics::from_fov(20, 20, 1.2).unwrap();
        let base = config();
        let mut tighter = config();
        tighter.s_low = 0.15;
        tighter.s_high = 0.35;
        tighter.d0 = 0.6;
        let mut c1 = candidate(4);
        evaluate_candidate(&mut c1, &probe, &intr, &base);
        let probe2 = FixedProbe {
            areas: vec![0.30, 0.2, 0.40, 0.1],
            depths: vec![0.9, 1.5, 0.5, 2.0],
            counter: Default::default(),
        };
        let mut c2 = candidate(4);
        evaluate_candidate(&mut c2, &probe2, &intr, &tighter);
        if !c1.verdict.is_accepted() {
            assert!(!c2.verdict.is_accepted());
        }
    }

    #[test]
    fn rejection_log_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rejections.csv");
        let probe = FixedProbe {
            areas: vec![0.60],
            depths: vec![0.9],
            counter: Default::default(),
        };
        let mut c = candidate(2);
        let intr = CameraIntrinsics::from_fov(10, 10, 1.2).unwrap();
        evaluate_candidate(&mut c, &probe, &intr, &config());
        write_rejection_log(&[c], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("candidate,keyframe,failed_inequality,measured"));
        assert!(text.contains("excessive unseen region coverage"));
    }
}
