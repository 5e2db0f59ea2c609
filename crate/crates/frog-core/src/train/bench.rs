//! Micro-benchmark for the Matching-Net forward pass, used to sanity-check
//! the d³-dominated cost model: time per pair should scale polynomially in
//! the embedding width with a log-log slope between quadratic and cubic.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::pair_similarity;
use crate::numerics::{init_params, ParamSet, Tape, Tensor};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub d: usize,
    pub mean_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub t: usize,
    pub repetitions: usize,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of ln(time) against ln(d).
    pub slope: f64,
}

/// Times `t` Matching-Net forwards per repetition at each embedding width,
/// single-threaded, over fixed random parameters and embeddings. Tape and
/// leaf construction are excluded from the timed region.
pub fn bench_matching(d_list: &[usize], t: usize, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig {
            key: "bench.repetitions".into(),
            reason: "must run at least one repetition".into(),
        });
    }
    if t == 0 {
        return Err(Error::InvalidConfig { key: "bench.t".into(), reason: "need at least one modality".into() });
    }
    if d_list.len() < 3 {
        return Err(Error::InvalidConfig {
            key: "bench.d_list".into(),
            reason: format!("need at least 3 widths for a slope, got {}", d_list.len()),
        });
    }
    if d_list.windows(2).any(|w| w[0] >= w[1]) || d_list[0] == 0 {
        return Err(Error::InvalidConfig {
            key: "bench.d_list".into(),
            reason: format!("widths must be positive and strictly ascending, got {d_list:?}"),
        });
    }

    let seed = 0xF_0B1;
    let mut points = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let mut params = ParamSet::<f64>::new();
        for i in 0..t {
            for (kind, rows, cols) in [("p_src", d, 1), ("q_src", d, d), ("p_dst", d, 1), ("q_dst", d, d)] {
                let id = format!("match.m{i}.{kind}");
                params.insert(&id, init_params(rows, cols, d, rng::sub_seed(seed, &id)))?;
            }
        }
        let embeds: Vec<Tensor<f64>> = (0..2 * t)
            .map(|i| init_params(1, d, d, rng::sub_seed_n(seed, "bench-embed", (d as u64) << 8 | i as u64)))
            .collect();

        let run_once = |timed: bool| -> Result<f64> {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let leaves: Vec<_> = embeds.iter().map(|e| tape.leaf(e.clone())).collect();
            let started = Instant::now();
            for i in 0..t {
                let name = format!("m{i}");
                pair_similarity(&mut tape, &bound, &name, leaves[2 * i], leaves[2 * i + 1])?;
            }
            Ok(if timed { started.elapsed().as_secs_f64() } else { 0.0 })
        };

        run_once(false)?; // warmup: page in allocations, stabilize caches
        let mut total = 0.0;
        for _ in 0..repetitions {
            total += run_once(true)?;
        }
        points.push(BenchPoint { d, mean_secs: total / repetitions as f64 });
    }

    let slope = log_log_slope(&points);
    Ok(BenchReport { t, repetitions, points, slope })
}

fn log_log_slope(points: &[BenchPoint]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.d as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_secs.max(1e-12).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(bench_matching(&[8, 16, 32], 2, 0).is_err());
        assert!(bench_matching(&[8, 16], 2, 1).is_err());
        assert!(bench_matching(&[16, 8, 32], 2, 1).is_err());
        assert!(bench_matching(&[8, 16, 32], 0, 1).is_err());
    }

    #[test]
    fn harness_produces_positive_times_and_a_finite_slope() {
        let report = bench_matching(&[4, 8, 12], 2, 3).unwrap();
        assert_eq!(report.points.len(), 3);
        for p in &report.points {
            assert!(p.mean_secs > 0.0, "d={} timed at zero", p.d);
        }
        assert!(report.slope.is_finite());
    }
}
