//! Shortest planar paths under a minimum turning radius, used to seed
//! cruise segments with waypoints.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DubinsError {
    #[error("turning radius must be positive, got {0}")]
    Radius(f64),
    #[error("need at least 2 samples, got {0}")]
    Samples(usize),
}

pub type Result<T> = std::result::Result<T, DubinsError>;

/// Planar pose; heading is counter-clockwise from +x, normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D { x, y, heading: crate::flatness::wrap_angle(heading) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Left,
    Straight,
    Right,
}

impl DubinsWord {
    /// Enumeration order; also the tie-breaking order.
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::LSL,
        DubinsWord::RSR,
        DubinsWord::LSR,
        DubinsWord::RSL,
        DubinsWord::RLR,
        DubinsWord::LRL,
    ];

    fn pieces(self) -> [Piece; 3] {
        use Piece::*;
        match self {
            DubinsWord::LSL => [Left, Straight, Left],
            DubinsWord::RSR => [Right, Straight, Right],
            DubinsWord::LSR => [Left, Straight, Right],
            DubinsWord::RSL => [Right, Straight, Left],
            DubinsWord::RLR => [Right, Left, Right],
            DubinsWord::LRL => [Left, Right, Left],
        }
    }

    /// Same word with left and right swapped.
    pub fn mirrored(self) -> Self {
        match self {
            DubinsWord::LSL => DubinsWord::RSR,
            DubinsWord::RSR => DubinsWord::LSL,
            DubinsWord::LSR => DubinsWord::RSL,
            DubinsWord::RSL => DubinsWord::LSR,
            DubinsWord::RLR => DubinsWord::LRL,
            DubinsWord::LRL => DubinsWord::RLR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub start: Pose2D,
    pub word: DubinsWord,
    /// Lengths of the three pieces, m.
    pub segment_lengths: [f64; 3],
    pub r_min: f64,
}

fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // values that should be zero but landed just below 2π
    if TAU - r < 1e-10 {
        0.0
    } else {
        r
    }
}

/// Normalized piece lengths (radians / units of `r`) for one word.
fn word_params(word: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let cab = (alpha - beta).cos();
    match word {
        DubinsWord::LSL => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(-alpha + tmp), p2.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::RSR => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p2.sqrt(), mod2pi(-beta + tmp)])
        }
        DubinsWord::LSR => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(-alpha + tmp), p, mod2pi(-mod2pi(beta) + tmp)])
        }
        DubinsWord::RSL => {
            let p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::RLR => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::LRL => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(mod2pi(beta) - alpha - t + p)])
        }
    }
}

/// Path of a specific word, if that word can connect the poses.
pub fn word_path(start: Pose2D, goal: Pose2D, r_min: f64, word: DubinsWord) -> Result<Option<DubinsPath>> {
    if !(r_min > 0.0) {
        return Err(DubinsError::Radius(r_min));
    }
    let dx = goal.x - start.x;
    let dy = goal.y - start.y;
    let d = dx.hypot(dy) / r_min;
    let theta = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
    let alpha = mod2pi(start.heading - theta);
    let beta = mod2pi(goal.heading - theta);
    Ok(word_params(word, alpha, beta, d).map(|p| DubinsPath {
        start,
        word,
        segment_lengths: [p[0] * r_min, p[1] * r_min, p[2] * r_min],
        r_min,
    }))
}

/// Shortest of the six candidate words; ties go to the earlier word in
/// [`DubinsWord::ALL`].
pub fn shortest_path(start: Pose2D, goal: Pose2D, r_min: f64) -> Result<DubinsPath> {
    let mut best: Option<DubinsPath> = None;
    for word in DubinsWord::ALL {
        if let Some(p) = word_path(start, goal, r_min, word)? {
            if best.is_none_or(|b| p.length() < b.length()) {
                best = Some(p);
            }
        }
    }
    Ok(best.expect("LSL and RSR always exist"))
}

/// Turning radius of a coordinated turn at speed `v` and bank `phi_max`.
pub fn min_turn_radius(v: f64, g: f64, phi_max: f64) -> f64 {
    v * v / (g * phi_max.tan())
}

impl DubinsPath {
    pub fn length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Pose after travelling arc length `s` (clamped to the path).
    pub fn pose_at(&self, s: f64) -> Pose2D {
        let mut s = s.clamp(0.0, self.length());
        let (mut x, mut y, mut h) = (self.start.x, self.start.y, self.start.heading);
        for (piece, &len) in self.word.pieces().iter().zip(&self.segment_lengths) {
            let step = s.min(len);
            let r = self.r_min;
            match piece {
                Piece::Straight => {
                    x += step * h.cos();
                    y += step * h.sin();
                }
                Piece::Left => {
                    let dh = step / r;
                    x += r * ((h + dh).sin() - h.sin());
                    y += r * (h.cos() - (h + dh).cos());
                    h += dh;
                }
                Piece::Right => {
                    let dh = step / r;
                    x += r * (h.sin() - (h - dh).sin());
                    y += r * ((h - dh).cos() - h.cos());
                    h -= dh;
                }
            }
            s -= step;
            if s <= 0.0 {
                break;
            }
        }
        Pose2D::new(x, y, h)
    }

    /// `n` poses at equal arc-length spacing, both endpoints included.
    pub fn sample(&self, n: usize) -> Result<Vec<Pose2D>> {
        if n < 2 {
            return Err(DubinsError::Samples(n));
        }
        let len = self.length();
        Ok((0..n).map(|i| self.pose_at(len * i as f64 / (n - 1) as f64)).collect())
    }
}

/// Angular distance helper kept for callers comparing headings.
pub fn heading_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_collinear_is_straight() {
        let r = 25.0;
        let p = shortest_path(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(4.0 * r, 0.0, 0.0), r).unwrap();
        assert_eq!(p.word, DubinsWord::LSL);
        assert!((p.length() - 4.0 * r).abs() < 1e-9);
        assert!(p.segment_lengths[0].abs() < 1e-12 && p.segment_lengths[2].abs() < 1e-12);
    }

    #[test]
    fn endpoints_are_reached() {
        let start = Pose2D::new(3.0, -2.0, 0.4);
        let goal = Pose2D::new(-40.0, 55.0, -2.2);
        for word in DubinsWord::ALL {
            if let Some(p) = word_path(start, goal, 12.0, word).unwrap() {
                let end = p.pose_at(p.length());
                assert!((end.x - goal.x).abs() < 1e-9, "{word:?}");
                assert!((end.y - goal.y).abs() < 1e-9, "{word:?}");
                assert!(heading_error(end.heading, goal.heading) < 1e-9, "{word:?}");
            }
        }
    }

    #[test]
    fn straight_sampling() {
        let p = shortest_path(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(100.0, 0.0, 0.0), 20.0).unwrap();
        let s = p.sample(3).unwrap();
        let xs: Vec<f64> = s.iter().map(|q| q.x).collect();
        for (a, b) in xs.iter().zip([0.0, 50.0, 100.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(p.sample(1).is_err());
    }

    #[test]
    fn radius_must_be_positive() {
        let a = Pose2D::new(0.0, 0.0, 0.0);
        assert!(shortest_path(a, a, 0.0).is_err());
    }

    #[test]
    fn turn_radius_formula() {
        let r = min_turn_radius(12.0, 9.81, 45f64.to_radians());
        assert!((r - 144.0 / 9.81).abs() < 1e-9);
    }
}
