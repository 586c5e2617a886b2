use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::flatness::Vec3;

/// Sinusoidal gust component `a·sin(2πft + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gust {
    pub amplitude: Vec3,
    /// Hz
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Vertical air column with a cosine-shaped profile that falls to zero at
/// `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub center: [f64; 2],
    pub radius: f64,
    pub vertical_speed: f64,
}

/// Smooth wind change by `delta` starting at `start` and completing after
/// `rise` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindRamp {
    pub start: f64,
    pub rise: f64,
    pub delta: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WindField {
    pub steady: Vec3,
    pub gusts: Vec<Gust>,
    pub columns: Vec<Column>,
    pub ramps: Vec<WindRamp>,
}

impl WindField {
    pub fn steady(w: Vec3) -> Self {
        WindField { steady: w, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gusts.iter().find(|g| !(g.frequency > 0.0)) {
            return Err(SimError::Config(format!("gust frequency must be positive, got {}", g.frequency)));
        }
        if let Some(c) = self.columns.iter().find(|c| !(c.radius > 0.0)) {
            return Err(SimError::Config(format!("column radius must be positive, got {}", c.radius)));
        }
        if let Some(r) = self.ramps.iter().find(|r| !(r.rise >= 0.0)) {
            return Err(SimError::Config(format!("ramp rise time must be nonnegative, got {}", r.rise)));
        }
        Ok(())
    }
}

/// Wind vector at time `t` and position `pos`.
pub fn wind_at(field: &WindField, t: f64, pos: &Vec3) -> Vec3 {
    let mut w = field.steady;
    for g in &field.gusts {
        w += g.amplitude * (TAU * g.frequency * t + g.phase).sin();
    }
    for c in &field.columns {
        let r = (pos.x - c.center[0]).hypot(pos.y - c.center[1]);
        if r < c.radius {
            w.z += c.vertical_speed * 0.5 * (1.0 + (PI * r / c.radius).cos());
        }
    }
    for r in &field.ramps {
        let s = if r.rise > 0.0 { ((t - r.start) / r.rise).clamp(0.0, 1.0) } else if t >= r.start { 1.0 } else { 0.0 };
        // smoothstep keeps the wind acceleration bounded
        w += r.delta * (s * s * (3.0 - 2.0 * s));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_field_is_calm() {
        assert_eq!(wind_at(&WindField::default(), 3.0, &Vec3::new(1.0, 2.0, 3.0)), Vec3::zeros());
    }

    #[test]
    fn column_center_and_edge() {
        let f = WindField {
            columns: vec![Column { center: [10.0, -5.0], radius: 50.0, vertical_speed: 2.0 }],
            ..Default::default()
        };
        assert_eq!(wind_at(&f, 0.0, &Vec3::new(10.0, -5.0, 80.0)), Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(wind_at(&f, 0.0, &Vec3::new(60.0, -5.0, 80.0)).z, 0.0);
        let half = wind_at(&f, 0.0, &Vec3::new(35.0, -5.0, 80.0)).z;
        assert!((half - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gust_peak() {
        let f = WindField {
            steady: Vec3::new(1.0, 0.0, 0.0),
            gusts: vec![Gust { amplitude: Vec3::new(0.0, 0.5, 0.0), frequency: 0.2, phase: 0.0 }],
            ..Default::default()
        };
        let w = wind_at(&f, 1.0 / (4.0 * 0.2), &Vec3::zeros());
        assert!((w - Vec3::new(1.0, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ramp_is_monotone_and_complete() {
        let f = WindField {
            ramps: vec![WindRamp { start: 10.0, rise: 5.0, delta: Vec3::new(5.0, 0.0, 0.0) }],
            ..Default::default()
        };
        assert_eq!(wind_at(&f, 9.0, &Vec3::zeros()).x, 0.0);
        assert_eq!(wind_at(&f, 15.0, &Vec3::zeros()).x, 5.0);
        let mut prev = 0.0;
        for i in 0..=50 {
            let w = wind_at(&f, 10.0 + 0.1 * i as f64, &Vec3::zeros()).x;
            assert!(w >= prev);
            prev = w;
        }
    }

    #[test]
    fn validation() {
        let f = WindField {
            gusts: vec![Gust { amplitude: Vec3::zeros(), frequency: 0.0, phase: 0.0 }],
            ..Default::default()
        };
        assert!(f.validate().is_err());
    }
}
