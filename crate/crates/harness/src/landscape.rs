//! Empirical objective curves: per-point sample means with 95% intervals.

use std::fmt::Write as _;

use cso_core::StochasticOracle;
use rayon::prelude::*;

use crate::error::{config_error, Result};
use crate::seeds::seed_stream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeRow {
    pub x: Vec<i64>,
    pub mean: f64,
    /// `Z95 * s / sqrt(reps)` with the sample standard deviation `s`; zero for one replication.
    pub halfwidth: f64,
}

/// Independent replications at every requested point. Point `x` draws from
/// the stream labeled `("landscape", x)` so rows do not depend on the order
/// or number of points requested.
pub fn landscape_scan(
    oracle: &dyn StochasticOracle,
    points: &[Vec<i64>],
    replications: usize,
    master_seed: u64,
) -> Result<Vec<LandscapeRow>> {
    if replications == 0 {
        return config_error("landscape needs at least one replication per point");
    }
    if let Some(bad) = points.iter().find(|x| !oracle.contains(x)) {
        return config_error(format!("point {bad:?} is outside the model domain"));
    }
    Ok(points
        .par_iter()
        .map(|x| {
            let label = x
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let mut rng = seed_stream(master_seed, &["landscape", &label]);
            let ys: Vec<f64> = (0..replications)
                .map(|_| oracle.sample(x, &mut rng))
                .collect();
            let k = replications as f64;
            // Shifted by the first draw so a constant sample averages exactly.
            let mean = ys[0] + ys.iter().map(|y| y - ys[0]).sum::<f64>() / k;
            let halfwidth = if replications > 1 {
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (k - 1.0);
                Z95 * (var / k).sqrt()
            } else {
                0.0
            };
            LandscapeRow {
                x: x.clone(),
                mean,
                halfwidth,
            }
        })
        .collect())
}

/// Every point of a line `[1, n]`.
pub fn line_points(n: i64) -> Vec<Vec<i64>> {
    (1..=n).map(|x| vec![x]).collect()
}

/// CSV `x,mean,halfwidth`; multi-dimensional points join coordinates with `;`.
pub fn landscape_csv(rows: &[LandscapeRow]) -> String {
    let mut out = String::from("x,mean,halfwidth\n");
    for r in rows {
        let x =
            r.x.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
        let _ = writeln!(out, "{x},{},{}", r.mean, r.halfwidth);
    }
    out
}
