//! Synthetic click/no-click data for a known source under fixed,
//! Gaussian-random, and drifting thermal noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::detector::{thermal_no_click_probability, DetectorSetting, MeasurementRecord};
use crate::error::{Error, Result};
use crate::state::PhotonDistribution;

/// Reflected random walk of the noise level: +-`step` per shot, up with
/// probability `p_up`, reflected at `floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalkSpec {
    start: f64,
    step: f64,
    p_up: f64,
    floor: f64,
}

impl RandomWalkSpec {
    pub fn new(start: f64, step: f64, p_up: f64, floor: f64) -> Result<Self> {
        if !floor.is_finite() || floor < 0.0 {
            return Err(Error::InvalidParameter {
                name: "floor",
                value: floor,
                expected: "finite and >= 0",
            });
        }
        if !start.is_finite() || start < floor {
            return Err(Error::InvalidParameter {
                name: "start",
                value: start,
                expected: "finite and >= floor",
            });
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "step",
                value: step,
                expected: "> 0",
            });
        }
        if !p_up.is_finite() || !(0.0..=1.0).contains(&p_up) {
            return Err(Error::InvalidParameter {
                name: "p_up",
                value: p_up,
                expected: "in [0, 1]",
            });
        }
        Ok(Self {
            start,
            step,
            p_up,
            floor,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn p_up(&self) -> f64 {
        self.p_up
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// One detector shot: which pulse it was, the noise level it saw, and whether
/// the detector clicked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub shot_index: u64,
    pub nbar_actual: f64,
    pub clicked: bool,
}

/// Per-shot log of a drifting-noise run, ordered by shot index.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotLog {
    records: Vec<ShotRecord>,
}

impl ShotLog {
    /// Build from raw records; shot indices must be strictly increasing.
    pub fn from_records(records: Vec<ShotRecord>) -> Result<Self> {
        for w in records.windows(2) {
            if w[1].shot_index <= w[0].shot_index {
                return Err(Error::InvalidRecord {
                    label: format!("shot {}", w[1].shot_index),
                    reason: "shot indices must be strictly increasing".into(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ShotRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Smallest and largest noise level realized over the log.
    pub fn nbar_range(&self) -> Option<(f64, f64)> {
        let mut it = self.records.iter().map(|r| r.nbar_actual);
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some((lo, hi))
    }
}

// Stream 0 drives the sequential random walk; setting j uses stream j + 1, so
// per-setting output depends only on (seed, index), not on execution order.
fn setting_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidParameter {
            name: "shots",
            value: 0.0,
            expected: ">= 1",
        });
    }
    Ok(())
}

/// Binomial sampling of no-click counts at each fixed noise level; one RNG
/// stream per setting, so results are deterministic given the seed.
pub fn simulate_fixed(
    rho: &PhotonDistribution,
    eta: f64,
    nbars: &[f64],
    shots_per_setting: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    check_shots(shots_per_setting)?;
    let mut out = Vec::with_capacity(nbars.len());
    for (j, &nbar) in nbars.iter().enumerate() {
        let setting = DetectorSetting::new(eta, nbar)?;
        let p = thermal_no_click_probability(rho, &setting).clamp(0.0, 1.0);
        let mut rng = setting_rng(seed, j as u64 + 1);
        let dist = Binomial::new(shots_per_setting, p)
            .map_err(|e| Error::Numerical(format!("binomial sampler: {e}")))?;
        let no_clicks = dist.sample(&mut rng);
        out.push(MeasurementRecord::new(
            format!("nbar={nbar}"),
            shots_per_setting,
            no_clicks,
        )?);
    }
    Ok(out)
}

/// Per-shot Bernoulli sampling where each shot first draws its own noise level
/// from a normal spread around the setting's mean, truncated to nbar >= 0 by
/// rejection.
pub fn simulate_gaussian_noise(
    rho: &PhotonDistribution,
    eta: f64,
    noise_means: &[f64],
    variance: f64,
    shots_per_setting: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    check_shots(shots_per_setting)?;
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::InvalidParameter {
            name: "variance",
            value: variance,
            expected: "finite and >= 0",
        });
    }
    let sigma = variance.sqrt();
    let mut out = Vec::with_capacity(noise_means.len());
    for (j, &mean) in noise_means.iter().enumerate() {
        let setting = DetectorSetting::new(eta, mean)?;
        let mut rng = setting_rng(seed, j as u64 + 1);
        let mut no_clicks = 0u64;
        if variance == 0.0 {
            let p = thermal_no_click_probability(rho, &setting).clamp(0.0, 1.0);
            for _ in 0..shots_per_setting {
                if rng.random_bool(p) {
                    no_clicks += 1;
                }
            }
        } else {
            let normal = Normal::new(mean, sigma)
                .map_err(|e| Error::Numerical(format!("normal sampler: {e}")))?;
            for _ in 0..shots_per_setting {
                let nbar = loop {
                    let draw = normal.sample(&mut rng);
                    if draw >= 0.0 {
                        break draw;
                    }
                };
                let shot_setting = DetectorSetting::new(eta, nbar)?;
                let p = thermal_no_click_probability(rho, &shot_setting).clamp(0.0, 1.0);
                if rng.random_bool(p) {
                    no_clicks += 1;
                }
            }
        }
        out.push(MeasurementRecord::new(
            format!("nbar={mean}"),
            shots_per_setting,
            no_clicks,
        )?);
    }
    Ok(out)
}

/// Sequential Bernoulli run while the noise level random-walks. The level is
/// updated after each shot, so the first shot sees `walk.start()`.
pub fn simulate_random_walk(
    rho: &PhotonDistribution,
    eta: f64,
    walk: &RandomWalkSpec,
    total_shots: u64,
    seed: u64,
) -> Result<ShotLog> {
    check_shots(total_shots)?;
    DetectorSetting::new(eta, walk.start())?;
    let mut rng = setting_rng(seed, 0);
    let mut nbar = walk.start();
    let mut records = Vec::with_capacity(total_shots as usize);
    for i in 0..total_shots {
        let setting = DetectorSetting::new(eta, nbar)?;
        let p = thermal_no_click_probability(rho, &setting).clamp(0.0, 1.0);
        let no_click = rng.random_bool(p);
        records.push(ShotRecord {
            shot_index: i,
            nbar_actual: nbar,
            clicked: !no_click,
        });
        if rng.random_bool(walk.p_up()) {
            nbar += walk.step();
        } else {
            nbar -= walk.step();
            if nbar < walk.floor() {
                nbar = 2.0 * walk.floor() - nbar;
            }
        }
    }
    Ok(ShotLog { records })
}

/// Aggregate a shot log into `bins` contiguous groups, preserving order. Each
/// group yields a measurement record plus the mean realized noise level; when
/// the bin count does not divide the log length, the remainder goes to the
/// last bin.
pub fn bin_shot_log(log: &ShotLog, bins: usize) -> Result<Vec<(MeasurementRecord, f64)>> {
    if bins == 0 {
        return Err(Error::InvalidParameter {
            name: "bins",
            value: 0.0,
            expected: ">= 1",
        });
    }
    if bins > log.len() {
        return Err(Error::InvalidParameter {
            name: "bins",
            value: bins as f64,
            expected: "<= number of shots",
        });
    }
    let q = log.len() / bins;
    let mut out = Vec::with_capacity(bins);
    for b in 0..bins {
        let start = b * q;
        let end = if b == bins - 1 { log.len() } else { start + q };
        let chunk = &log.records()[start..end];
        let no_clicks = chunk.iter().filter(|r| !r.clicked).count() as u64;
        let mean_nbar = chunk.iter().map(|r| r.nbar_actual).sum::<f64>() / chunk.len() as f64;
        out.push((
            MeasurementRecord::new(format!("bin{b}"), chunk.len() as u64, no_clicks)?,
            mean_nbar,
        ));
    }
    Ok(out)
}
