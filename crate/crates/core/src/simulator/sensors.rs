use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::aero::{self, Airframe, EnergySample, SgFilter, SinkPolar, StreamingDerivative};
use crate::flatness::Vec3;

/// Gaussian noise and sample rates of the airspeed and position sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// m/s
    pub airspeed_sigma: f64,
    /// Hz
    pub airspeed_rate: f64,
    /// m
    pub position_sigma: f64,
    /// Hz
    pub position_rate: f64,
    pub seed: u64,
    /// Span of the variometer smoothing windows, s.
    pub filter_span: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            airspeed_sigma: 0.3,
            airspeed_rate: 20.0,
            position_sigma: 0.5,
            position_rate: 10.0,
            seed: 0,
            filter_span: 2.0,
        }
    }
}

impl SensorModel {
    /// Noise-free sensors at the default rates.
    pub fn ideal() -> Self {
        SensorModel { airspeed_sigma: 0.0, position_sigma: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.airspeed_sigma >= 0.0 && self.position_sigma >= 0.0) {
            return Err(SimError::Config("sensor noise must be nonnegative".into()));
        }
        if !(self.airspeed_rate > 0.0 && self.position_rate > 0.0 && self.filter_span > 0.0) {
            return Err(SimError::Config("sensor rates and filter span must be positive".into()));
        }
        Ok(())
    }

    /// Odd window covering `filter_span` at `rate`.
    fn window(&self, rate: f64) -> usize {
        2 * ((0.5 * self.filter_span * rate).round() as usize).max(2) + 1
    }
}

/// Sampled, noisy sensors with zero-order hold between samples.
#[derive(Debug, Clone)]
pub struct Sensors {
    model: SensorModel,
    rng: ChaCha8Rng,
    next_airspeed: f64,
    next_position: f64,
    airspeed: Option<f64>,
    position: Option<Vec3>,
}

/// New samples produced by one poll.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorSamples {
    pub airspeed: Option<f64>,
    pub position: Option<Vec3>,
}

impl Sensors {
    pub fn new(model: SensorModel) -> Result<Self> {
        model.validate()?;
        Ok(Sensors {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            next_airspeed: 0.0,
            next_position: 0.0,
            airspeed: None,
            position: None,
        })
    }

    fn noise(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma).expect("finite sigma").sample(&mut self.rng)
    }

    /// Samples whichever sensors are due at time `t`.
    pub fn poll(&mut self, t: f64, va: f64, x: &Vec3) -> SensorSamples {
        let mut out = SensorSamples::default();
        let eps = 1e-9;
        if t + eps >= self.next_airspeed {
            let s = va + self.noise(self.model.airspeed_sigma);
            self.airspeed = Some(s);
            out.airspeed = Some(s);
            self.next_airspeed += 1.0 / self.model.airspeed_rate;
        }
        if t + eps >= self.next_position {
            let sigma = self.model.position_sigma;
            let p = x + Vec3::new(self.noise(sigma), self.noise(sigma), self.noise(sigma));
            self.position = Some(p);
            out.position = Some(p);
            self.next_position += 1.0 / self.model.position_rate;
        }
        out
    }

    /// Most recent airspeed sample (held between samples).
    pub fn airspeed(&self) -> Option<f64> {
        self.airspeed
    }

    pub fn position(&self) -> Option<Vec3> {
        self.position
    }
}

/// Onboard netto pipeline: Savitzky-Golay smoothing and differentiation of
/// airspeed and altitude, then energy rate plus polar sink. Outputs refer to
/// the window centers; the bank angle is delayed to match.
#[derive(Debug, Clone)]
pub struct Variometer {
    va: StreamingDerivative,
    z: StreamingDerivative,
    va_state: Option<(f64, f64)>,
    z_state: Option<(f64, f64)>,
    phi_hist: VecDeque<f64>,
    phi_delay: usize,
    polar: SinkPolar,
    airframe: Airframe,
}

impl Variometer {
    pub fn new(model: &SensorModel, polar: SinkPolar, airframe: Airframe) -> Result<Self> {
        let wa = model.window(model.airspeed_rate);
        let wz = model.window(model.position_rate);
        let fa = SgFilter::new(wa, 2).map_err(|e| SimError::Config(e.to_string()))?;
        let fz = SgFilter::new(wz, 2).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(Variometer {
            va: StreamingDerivative::new(&fa, 1.0 / model.airspeed_rate),
            z: StreamingDerivative::new(&fz, 1.0 / model.position_rate),
            va_state: None,
            z_state: None,
            phi_hist: VecDeque::with_capacity(wa / 2 + 1),
            phi_delay: wa / 2,
            polar,
            airframe,
        })
    }

    /// Latency of the estimate, s.
    pub fn delay(&self) -> f64 {
        self.va.delay().max(self.z.delay())
    }

    /// Feeds an airspeed sample together with the bank angle at that time.
    pub fn push_airspeed(&mut self, va: f64, phi: f64) {
        if let Some(s) = self.va.push(va) {
            self.va_state = Some(s);
        }
        if self.phi_hist.len() > self.phi_delay {
            self.phi_hist.pop_front();
        }
        self.phi_hist.push_back(phi);
    }

    pub fn push_altitude(&mut self, z: f64) {
        if let Some(s) = self.z.push(z) {
            self.z_state = Some(s);
        }
    }

    /// Netto estimate once both filters are primed.
    pub fn netto(&self) -> Option<f64> {
        let (va, va_dot) = self.va_state?;
        let (_, z_dot) = self.z_state?;
        let phi = *self.phi_hist.front()?;
        let sample = EnergySample { t: 0.0, xz_dot: z_dot, va, va_dot, phi };
        aero::netto(&sample, &self.polar, &self.airframe).ok()
    }

    pub fn energy_rate(&self) -> Option<f64> {
        let (va, va_dot) = self.va_state?;
        let (_, z_dot) = self.z_state?;
        let sample = EnergySample { t: 0.0, xz_dot: z_dot, va, va_dot, phi: 0.0 };
        Some(aero::energy_rate(&sample, self.airframe.g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_windows() {
        let m = SensorModel::default();
        assert_eq!(m.window(m.airspeed_rate), 41);
        assert_eq!(m.window(m.position_rate), 21);
    }

    #[test]
    fn sample_rates_and_hold() {
        let mut s = Sensors::new(SensorModel::ideal()).unwrap();
        let (mut na, mut np) = (0, 0);
        for i in 0..100 {
            let out = s.poll(i as f64 * 0.01, 10.0, &Vec3::zeros());
            na += out.airspeed.is_some() as usize;
            np += out.position.is_some() as usize;
        }
        assert_eq!((na, np), (20, 10));
        assert_eq!(s.airspeed(), Some(10.0));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let m = SensorModel { seed: 7, ..Default::default() };
        let run = || {
            let mut s = Sensors::new(m).unwrap();
            (0..50).filter_map(|i| s.poll(i as f64 * 0.05, 10.0, &Vec3::zeros()).airspeed).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn steady_glide_reads_zero() {
        let af = Airframe::default();
        let polar = SinkPolar::from_airframe(&af);
        let m = SensorModel::ideal();
        let mut v = Variometer::new(&m, polar, af).unwrap();
        let va = 11.0;
        let sink = polar.sink_rate(&af, va, 0.0).unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.05;
            v.push_airspeed(va, 0.0);
            if i % 2 == 0 {
                v.push_altitude(100.0 - sink * t);
            }
        }
        assert!(v.netto().unwrap().abs() < 1e-9);
    }
}
