use super::{PoolCubes, TrainError};
use crate::auxmodels::ForecastCube;
use crate::data::{prepare, PreparedData, SplitSpec, TimeSeries, WindowedDataset};
use crate::numcore::Rng;

/// A task whose pool has one member that beats every other member on every
/// sample and step.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    pub data: PreparedData,
    pub cubes: PoolCubes,
    pub dominant: usize,
}

fn cube_for(split: &WindowedDataset, data: &PreparedData, dominant: usize, rng: &mut Rng) -> Result<ForecastCube, TrainError> {
    let range = data.scaler.range(0);
    let aux: Vec<Vec<Vec<f64>>> = split
        .samples
        .iter()
        .map(|s| {
            let truth = data.scaler.invert(0, &s.target);
            (0..2)
                .map(|a| {
                    truth
                        .iter()
                        .map(|&y| {
                            let u = rng.uniform_range(-1.0, 1.0);
                            if a == dominant {
                                y + 0.002 * range * u
                            } else {
                                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                                y + sign * range * (0.15 + 0.05 * u)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ForecastCube::from_predictions(&["MSVR", "MLP"], &aux, split.horizon)?)
}

/// Two-tone periodic series with a pool where slot `dominant` (0 or 1) is
/// within 0.2% of the range everywhere and the other slot is off by
/// 10–20% of the range.
pub fn synthetic_dominance(n: usize, lags: usize, horizon: usize, dominant: usize, seed: u64) -> Result<SyntheticTask, TrainError> {
    if dominant > 1 {
        return Err(TrainError::Config {
            key: "dominant".into(),
            message: format!("slot {dominant} is not an auxiliary model"),
        });
    }
    let values: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            0.5 + 0.3 * (2.0 * std::f64::consts::PI * t / 25.0).sin() + 0.1 * (2.0 * std::f64::consts::PI * t / 7.0).sin()
        })
        .collect();
    let data = prepare(&TimeSeries::univariate("two-tone", values), lags, horizon, &SplitSpec::default())?;
    let mut rng = Rng::new(seed).split(0x53594e);
    let cubes = PoolCubes {
        train: cube_for(&data.train, &data, dominant, &mut rng)?,
        val: cube_for(&data.val, &data, dominant, &mut rng)?,
        test: cube_for(&data.test, &data, dominant, &mut rng)?,
    };
    Ok(SyntheticTask { data, cubes, dominant })
}
