mod common;

use std::f64::consts::PI;

use glideplan::dubins::{heading_error, min_turn_radius, shortest_path, word_path, DubinsError, DubinsWord, Pose2D};
use proptest::prelude::*;

use common::dubins_candidates;

fn pose() -> impl Strategy<Value = Pose2D> {
    (-300.0..300.0f64, -300.0..300.0f64, -PI..PI).prop_map(|(x, y, h)| Pose2D::new(x, y, h))
}

fn reflect(p: &Pose2D) -> Pose2D {
    Pose2D::new(p.x, -p.y, -p.heading)
}

proptest! {
    #[test]
    fn shortest_matches_geometric_construction(a in pose(), b in pose(), r in 5.0..80.0f64) {
        let path = shortest_path(a, b, r).unwrap();
        let best = dubins_candidates(&a, &b, r).into_iter().map(|(_, l)| l).fold(f64::INFINITY, f64::min);
        prop_assert!((path.length() - best).abs() <= 1e-6 * (1.0 + best), "{} vs {best}", path.length());
    }

    #[test]
    fn every_word_reaches_the_goal(a in pose(), b in pose(), r in 5.0..80.0f64) {
        for word in DubinsWord::ALL {
            if let Some(p) = word_path(a, b, r, word).unwrap() {
                let end = p.pose_at(p.length());
                prop_assert!((end.x - b.x).hypot(end.y - b.y) < 1e-6, "{word:?} ends at {end:?}");
                prop_assert!(heading_error(end.heading, b.heading) < 1e-6);
                prop_assert!(p.segment_lengths.iter().all(|l| *l >= 0.0));
            }
        }
    }

    #[test]
    fn reflection_swaps_turn_directions(a in pose(), b in pose(), r in 5.0..80.0f64) {
        for word in DubinsWord::ALL {
            let p = word_path(a, b, r, word).unwrap();
            let q = word_path(reflect(&a), reflect(&b), r, word.mirrored()).unwrap();
            prop_assert_eq!(p.is_some(), q.is_some());
            if let (Some(p), Some(q)) = (p, q) {
                prop_assert!((p.length() - q.length()).abs() < 1e-9 * (1.0 + p.length()));
            }
        }
    }

    #[test]
    fn samples_move_at_unit_speed(a in pose(), b in pose(), r in 5.0..80.0f64) {
        let path = shortest_path(a, b, r).unwrap();
        let n = 400;
        let pts = path.sample(n).unwrap();
        let ds = path.length() / (n - 1) as f64;
        for w in pts.windows(2) {
            let chord = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
            // a chord never exceeds its arc and is close to it for short arcs
            prop_assert!(chord <= ds + 1e-9);
            prop_assert!(chord >= ds * (1.0 - (ds / r).powi(2) / 24.0) - 1e-9);
        }
    }

    #[test]
    fn heading_follows_the_tangent(a in pose(), b in pose(), r in 5.0..80.0f64, f in 0.01..0.99f64) {
        let path = shortest_path(a, b, r).unwrap();
        let s = f * path.length();
        let h = 1e-5;
        let (p, q) = (path.pose_at(s - h), path.pose_at(s + h));
        let tangent = (q.y - p.y).atan2(q.x - p.x);
        prop_assert!(heading_error(tangent, path.pose_at(s).heading) < 1e-4);
    }
}

#[test]
fn aligned_goal_is_a_straight_line() {
    let p = shortest_path(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(250.0, 0.0, 0.0), 40.0).unwrap();
    assert!((p.length() - 250.0).abs() < 1e-9);
    assert!(p.segment_lengths[0].abs() < 1e-9 && p.segment_lengths[2].abs() < 1e-9);
}

#[test]
fn u_turn_onto_parallel_track_is_a_half_circle() {
    let r = 30.0;
    let p = shortest_path(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(0.0, 2.0 * r, PI), r).unwrap();
    assert!((p.length() - PI * r).abs() < 1e-9, "{}", p.length());
}

#[test]
fn radius_follows_bank_limit() {
    let r = min_turn_radius(12.0, 9.81, 30f64.to_radians());
    assert!((r - 144.0 / (9.81 * 30f64.to_radians().tan())).abs() < 1e-12);
}

#[test]
fn invalid_inputs() {
    let a = Pose2D::new(0.0, 0.0, 0.0);
    assert_eq!(shortest_path(a, a, 0.0).unwrap_err(), DubinsError::Radius(0.0));
    assert!(shortest_path(a, a, -1.0).is_err());
    let p = shortest_path(a, Pose2D::new(10.0, 0.0, 0.0), 5.0).unwrap();
    assert_eq!(p.sample(1).unwrap_err(), DubinsError::Samples(1));
}
