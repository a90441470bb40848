//! Two-dimensional projection of optimization trajectories.
//!
//! Two runs' iterate sequences are centered at an anchor (normally the
//! global optimum), the top two principal directions of the pooled
//! centered iterates are found by power iteration with deflation, and
//! every iterate is projected onto that orthonormal pair. The anchor
//! itself lands at the origin. Data that genuinely lies in a plane
//! through the anchor is reproduced with all pairwise distances intact.

use crate::error::{Error, Result};
use crate::stream::StreamKey;
use crate::vector;

/// Seed for the projection's internal power-iteration starts; fixed so
/// plots are a pure function of the iterates.
const PROJECTION_SEED: u64 = 0x706c616e65;

/// Projected trajectories of the two runs, in input order.
#[derive(Debug, Clone)]
pub struct Projection2d {
    pub runs: [Vec<[f64; 2]>; 2],
    /// Variance captured by each axis.
    pub axis_variances: [f64; 2],
    /// Number of non-negligible principal directions found (0, 1, or 2).
    /// Below 2, the missing coordinates are zero.
    pub effective_rank: usize,
}

/// Project both runs onto the top-2 principal plane of their pooled
/// iterates centered at `anchor`, then smooth each projected run with a
/// centered moving average of `smoothing_window` points (1 = no
/// smoothing). Each run needs at least three iterates.
pub fn trajectory_projection_2d(
    run_a: &[Vec<f64>],
    run_b: &[Vec<f64>],
    anchor: &[f64],
    smoothing_window: usize,
) -> Result<Projection2d> {
    let d = anchor.len();
    if d == 0 {
        return Err(Error::InvalidConfig("anchor must be non-empty".into()));
    }
    if smoothing_window == 0 {
        return Err(Error::InvalidConfig(
            "smoothing window must be at least 1".into(),
        ));
    }
    for (name, run) in [("first", run_a), ("second", run_b)] {
        if run.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "{name} run has {} iterates, need at least 3",
                run.len()
            )));
        }
        if let Some(bad) = run.iter().find(|w| w.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
    }

    // Pooled centered iterates.
    let centered: Vec<Vec<f64>> = run_a
        .iter()
        .chain(run_b.iter())
        .map(|w| vector::sub(w, anchor))
        .collect();
    let m = centered.len() as f64;
    let covariance_apply = |v: &[f64], exclude: Option<&[f64]>| -> Vec<f64> {
        let mut out = vector::zeros(d);
        for x in &centered {
            vector::add_scaled(&mut out, vector::dot(x, v) / m, x);
        }
        if let Some(axis) = exclude {
            let overlap = vector::dot(&out, axis);
            vector::add_scaled(&mut out, -overlap, axis);
        }
        out
    };

    let key = StreamKey::new(PROJECTION_SEED);
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut variances = [0.0f64; 2];
    let total_scale: f64 = centered
        .iter()
        .map(|x| vector::dot(x, x) / m)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for axis_idx in 0..2usize {
        let exclude = axes.first().map(|a| a.as_slice());
        let mut v = vector::zeros(d);
        key.child("axis", axis_idx as u64)
            .stream()
            .fill_gaussian(&mut v, 1.0);
        if let Some(prev) = exclude {
            let overlap = vector::dot(&v, prev);
            vector::add_scaled(&mut v, -overlap, prev);
        }
        let norm = vector::norm(&v);
        if norm == 0.0 {
            break;
        }
        vector::scale_in_place(&mut v, 1.0 / norm);
        let mut eigenvalue = 0.0;
        let mut degenerate = false;
        for _ in 0..2000 {
            let mut av = covariance_apply(&v, exclude);
            if let Some(prev) = exclude {
                // Re-orthogonalize against rounding drift.
                let overlap = vector::dot(&av, prev);
                vector::add_scaled(&mut av, -overlap, prev);
            }
            let new_eigenvalue = vector::dot(&v, &av);
            let norm = vector::norm(&av);
            if norm <= 1e-14 * total_scale {
                degenerate = true;
                break;
            }
            v = vector::scaled(&av, 1.0 / norm);
            let change = (new_eigenvalue - eigenvalue).abs();
            eigenvalue = new_eigenvalue;
            if change <= 1e-14 * eigenvalue.abs().max(1e-300) {
                break;
            }
        }
        if degenerate || eigenvalue <= 1e-12 * total_scale {
            break;
        }
        variances[axis_idx] = eigenvalue;
        axes.push(v);
    }
    let effective_rank = axes.len();

    let project_run = |run: &[Vec<f64>]| -> Vec<[f64; 2]> {
        run.iter()
            .map(|w| {
                let x = vector::sub(w, anchor);
                let mut coords = [0.0; 2];
                for (j, axis) in axes.iter().enumerate() {
                    coords[j] = vector::dot(&x, axis);
                }
                coords
            })
            .collect()
    };
    let smoothed_a = smooth(&project_run(run_a), smoothing_window);
    let smoothed_b = smooth(&project_run(run_b), smoothing_window);

    Ok(Projection2d {
        runs: [smoothed_a, smoothed_b],
        axis_variances: variances,
        effective_rank,
    })
}

/// Centered moving average over up to `window` points, clipped at the
/// ends. Odd windows are symmetric; even windows take one extra point on
/// the trailing side.
fn smooth(points: &[[f64; 2]], window: usize) -> Vec<[f64; 2]> {
    if window <= 1 {
        return points.to_vec();
    }
    let left = (window - 1) / 2;
    let right = window / 2;
    (0..points.len())
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(points.len() - 1);
            let count = (hi - lo + 1) as f64;
            let mut acc = [0.0; 2];
            for p in &points[lo..=hi] {
                acc[0] += p[0];
                acc[1] += p[1];
            }
            [acc[0] / count, acc[1] / count]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_plane_runs(d: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        // Iterates in anchor + span{e1, e3}.
        let anchor: Vec<f64> = (0..d).map(|i| i as f64 * 0.1).collect();
        let lift = |a: f64, b: f64| {
            let mut w = anchor.clone();
            w[0] += a;
            w[2] += b;
            w
        };
        let run_a = vec![lift(1.0, 0.0), lift(0.5, 0.5), lift(0.25, 0.75), lift(0.0, 1.0)];
        let run_b = vec![lift(-1.0, 0.2), lift(-0.5, 0.4), lift(0.2, -0.3)];
        (run_a, run_b, anchor)
    }

    #[test]
    fn planar_data_keeps_pairwise_distances() {
        let (run_a, run_b, anchor) = planted_plane_runs(6);
        let proj = trajectory_projection_2d(&run_a, &run_b, &anchor, 1).unwrap();
        assert_eq!(proj.effective_rank, 2);
        let all_high: Vec<&Vec<f64>> = run_a.iter().chain(run_b.iter()).collect();
        let all_low: Vec<[f64; 2]> = proj.runs[0]
            .iter()
            .chain(proj.runs[1].iter())
            .copied()
            .collect();
        for i in 0..all_high.len() {
            for j in (i + 1)..all_high.len() {
                let high = vector::distance(all_high[i], all_high[j]);
                let dx = all_low[i][0] - all_low[j][0];
                let dy = all_low[i][1] - all_low[j][1];
                let low = (dx * dx + dy * dy).sqrt();
                assert!(
                    (high - low).abs() < 1e-9,
                    "pair ({i},{j}): {high} vs {low}"
                );
            }
            // Distance to the anchor is the distance to the origin below.
            let high = vector::distance(all_high[i], &anchor);
            let low = (all_low[i][0].powi(2) + all_low[i][1].powi(2)).sqrt();
            assert!((high - low).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_data_degrades_to_rank_one() {
        let anchor = vec![0.0; 4];
        let line = |t: f64| vec![t, 2.0 * t, 0.0, -t];
        let run_a = vec![line(1.0), line(2.0), line(3.0)];
        let run_b = vec![line(-1.0), line(0.5), line(4.0)];
        let proj = trajectory_projection_2d(&run_a, &run_b, &anchor, 1).unwrap();
        assert_eq!(proj.effective_rank, 1);
        for p in proj.runs[0].iter().chain(proj.runs[1].iter()) {
            assert_eq!(p[1], 0.0);
        }
        assert_eq!(proj.axis_variances[1], 0.0);
    }

    #[test]
    fn smoothing_window_one_is_identity_and_three_averages() {
        let pts = vec![[0.0, 0.0], [3.0, 3.0], [0.0, 6.0], [3.0, 9.0]];
        assert_eq!(smooth(&pts, 1), pts);
        let s = smooth(&pts, 3);
        // Interior points average their neighborhood; ends clip.
        assert_eq!(s[1], [1.0, 3.0]);
        assert_eq!(s[2], [2.0, 6.0]);
        assert_eq!(s[0], [1.5, 1.5]);
        assert_eq!(s[3], [1.5, 7.5]);
    }

    #[test]
    fn short_runs_are_rejected() {
        let anchor = vec![0.0; 2];
        let run = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ok = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            trajectory_projection_2d(&run, &ok, &anchor, 1),
            Err(Error::InvalidConfig(m)) if m.contains("at least 3")
        ));
    }

    #[test]
    fn projection_is_deterministic() {
        let (run_a, run_b, anchor) = planted_plane_runs(5);
        let p1 = trajectory_projection_2d(&run_a, &run_b, &anchor, 3).unwrap();
        let p2 = trajectory_projection_2d(&run_a, &run_b, &anchor, 3).unwrap();
        assert_eq!(p1.runs, p2.runs);
    }
}
