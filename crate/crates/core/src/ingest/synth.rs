//! Seeded synthetic two-station data.
//!
//! Station A carries ten features with a diurnal cycle, AR(1) weather and
//! pollutant noise, and ozone that is depleted by nitrogen dioxide. Station
//! B holds the four pollutants as a one-hour-lagged, rescaled, noisy copy of
//! station A, so a learnable spatial mapping exists but the identity
//! (persistence) forecast is biased.

use std::f64::consts::PI;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Column, ColumnSpec, IngestError, SeriesTable};

/// B(t) = gain * A(t - 1) + offset + noise, per pollutant.
pub const B_GAIN: [f64; 4] = [0.85, 1.2, 0.75, 0.9];
pub const B_OFFSET: [f64; 4] = [4.0, -6.0, 5.0, 1.5];
pub const B_NOISE: [f64; 4] = [1.0, 1.0, 0.8, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub hours: usize,
    /// Lengths of consecutive regimes, each with its own seasonal level.
    /// Empty means one regime; otherwise the lengths must sum to `hours`.
    pub chunk_layout: Vec<usize>,
    /// Probability that a pollutant cell is dropped (meteorology stays complete).
    pub gap_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            hours: 4000,
            chunk_layout: Vec::new(),
            gap_rate: 0.0,
        }
    }
}

struct Ar1 {
    phi: f64,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64) -> Self {
        Self { phi, state: 0.0 }
    }

    /// Unit stationary variance.
    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.phi * self.state + (1.0 - self.phi * self.phi).sqrt() * z;
        self.state
    }
}

fn rush_hour(hour: f64) -> f64 {
    (-(hour - 8.0).powi(2) / 8.0).exp() + (-(hour - 18.0).powi(2) / 8.0).exp()
}

pub fn synthesize(cfg: &SynthConfig) -> Result<(SeriesTable, SeriesTable), IngestError> {
    if cfg.hours == 0 {
        return Err(IngestError::Synth("hours must be positive".into()));
    }
    let layout = if cfg.chunk_layout.is_empty() {
        vec![cfg.hours]
    } else {
        cfg.chunk_layout.clone()
    };
    if layout.iter().sum::<usize>() != cfg.hours || layout.contains(&0) {
        return Err(IngestError::Synth(format!(
            "chunk layout {:?} does not partition {} hours",
            layout, cfg.hours
        )));
    }
    if !(0.0..1.0).contains(&cfg.gap_rate) {
        return Err(IngestError::Synth("gap_rate must be in [0, 1)".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let levels: Vec<f64> = layout
        .iter()
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let regime: Vec<f64> = layout
        .iter()
        .zip(&levels)
        .flat_map(|(&len, &lvl)| std::iter::repeat_n(lvl, len))
        .collect();

    let n = cfg.hours;
    let mut a: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 10];
    let (mut e_t, mut e_cloud, mut e_dew) = (Ar1::new(0.95), Ar1::new(0.9), Ar1::new(0.9));
    let (mut e_wind, mut e_dir, mut e_press) = (Ar1::new(0.97), Ar1::new(0.9), Ar1::new(0.99));
    let (mut e_no2, mut e_o3, mut e_pm, mut e_pm25) =
        (Ar1::new(0.8), Ar1::new(0.8), Ar1::new(0.85), Ar1::new(0.7));

    for t in 0..n {
        let hour = (t % 24) as f64;
        let season = regime[t];

        let temp = 100.0 + 40.0 * season + 50.0 * (2.0 * PI * (hour - 9.0) / 24.0).sin()
            + 20.0 * e_t.step(&mut rng);
        let daylight = (2.0 * PI * (hour - 6.0) / 24.0).sin().max(0.0);
        let sun = 10.0 * daylight * (0.6 - 0.3 * e_cloud.step(&mut rng)).clamp(0.0, 1.0);
        let dew = 0.8 * temp - 20.0 + 10.0 * e_dew.step(&mut rng);
        let wind_noise = e_wind.step(&mut rng);
        let speed =
            (40.0 + 15.0 * wind_noise + 10.0 * (2.0 * PI * (hour - 14.0) / 24.0).sin()).max(0.0);
        let direction = (220.0 + 40.0 * wind_noise + 30.0 * e_dir.step(&mut rng)).rem_euclid(360.0);
        let pressure = 10150.0 + 60.0 * e_press.step(&mut rng);

        let no2 = (25.0 + 12.0 * rush_hour(hour) - 0.35 * (speed - 40.0) + 3.0 * season
            + 5.0 * e_no2.step(&mut rng))
        .max(1.0);
        let o3 = (50.0 + 0.25 * (temp - 100.0) + 1.5 * sun - 0.8 * (no2 - 25.0)
            + 5.0 * e_o3.step(&mut rng))
        .max(1.0);
        let pm10 = (18.0 + 0.3 * no2 + 0.05 * (pressure - 10150.0) - 0.15 * (speed - 40.0)
            + 4.0 * e_pm.step(&mut rng))
        .max(1.0);
        let pm25 = (0.55 * pm10 + 2.0 * e_pm25.step(&mut rng)).max(0.5);

        for (col, v) in a
            .iter_mut()
            .zip([no2, o3, pm10, pm25, pressure, dew, direction, speed, sun, temp])
        {
            col.push(v);
        }
    }

    let mut b: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 4];
    for t in 0..n {
        let src = t.saturating_sub(1);
        for p in 0..4 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = B_GAIN[p] * a[p][src] + B_OFFSET[p] + B_NOISE[p] * z;
            b[p].push(v.max(0.0));
        }
    }

    if cfg.gap_rate > 0.0 {
        for col in a.iter_mut().take(4).chain(b.iter_mut()) {
            for v in col.iter_mut() {
                if rng.random::<f64>() < cfg.gap_rate {
                    *v = f64::NAN;
                }
            }
        }
    }

    let start = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
    let build = |id: &str, spec: ColumnSpec, data: Vec<Vec<f64>>| {
        let cols = spec
            .columns
            .into_iter()
            .zip(data)
            .map(|((name, unit), values)| Column::new(name, unit, values))
            .collect();
        SeriesTable::new(id, start, cols)
    };
    Ok((
        build("station_a", ColumnSpec::station_a(), a)?,
        build("station_b", ColumnSpec::station_b(), b)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SynthConfig {
            seed: 3,
            hours: 500,
            ..Default::default()
        };
        let (a1, b1) = synthesize(&cfg).unwrap();
        let (a2, b2) = synthesize(&cfg).unwrap();
        let bits = |t: &SeriesTable| {
            t.columns
                .iter()
                .flat_map(|c| c.values.iter().map(|v| v.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a1), bits(&a2));
        assert_eq!(bits(&b1), bits(&b2));
    }

    #[test]
    fn no2_and_o3_are_anticorrelated() {
        let cfg = SynthConfig {
            seed: 0,
            hours: 1000,
            ..Default::default()
        };
        let (a, _) = synthesize(&cfg).unwrap();
        let r = pearson(a.values("NO2").unwrap(), a.values("O3").unwrap());
        assert!(r < 0.0, "r = {r}");
    }

    #[test]
    fn zero_hours_rejected() {
        let cfg = SynthConfig {
            hours: 0,
            ..Default::default()
        };
        assert!(synthesize(&cfg).is_err());
    }

    #[test]
    fn layout_must_partition_hours() {
        let cfg = SynthConfig {
            hours: 100,
            chunk_layout: vec![50, 40],
            ..Default::default()
        };
        assert!(synthesize(&cfg).is_err());
        let cfg = SynthConfig {
            hours: 100,
            chunk_layout: vec![60, 40],
            ..Default::default()
        };
        let (a, b) = synthesize(&cfg).unwrap();
        assert_eq!((a.len(), b.len()), (100, 100));
    }

    #[test]
    fn target_station_is_lagged_affine_copy() {
        let cfg = SynthConfig {
            seed: 5,
            hours: 2000,
            ..Default::default()
        };
        let (a, b) = synthesize(&cfg).unwrap();
        for (p, name) in ["NO2", "O3", "PM10", "PM25"].iter().enumerate() {
            let src = &a.values(name).unwrap()[..1999];
            let dst = &b.values(name).unwrap()[1..];
            let resid: f64 = src
                .iter()
                .zip(dst)
                .map(|(x, y)| (y - (B_GAIN[p] * x + B_OFFSET[p])).powi(2))
                .sum::<f64>()
                / 1999.0;
            assert!(resid.sqrt() < 1.5 * B_NOISE[p], "{name}: {}", resid.sqrt());
        }
    }

    #[test]
    fn gaps_only_in_pollutants() {
        let cfg = SynthConfig {
            seed: 1,
            hours: 1000,
            gap_rate: 0.05,
            ..Default::default()
        };
        let (a, b) = synthesize(&cfg).unwrap();
        assert!(a.column("NO2").unwrap().gap_count() > 0);
        assert!(b.column("O3").unwrap().gap_count() > 0);
        assert_eq!(a.column("T").unwrap().gap_count(), 0);
    }
}
