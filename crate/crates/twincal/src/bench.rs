//! Wall-clock timings of both tracers and of model inference.

use std::io::Write;
use std::time::Instant;

use twincal_core::calibration::CalibModel;
use twincal_core::{Scene, Vec3};

use crate::dataset::TwinPair;
use crate::error::{Error, Result};
use crate::experiment::csv_err;

/// Users timed per repeat; each row reports the mean per user.
pub const BENCH_USERS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub target_trace_s: f64,
    pub baseline_trace_s: f64,
    pub inference_s: f64,
}

fn per_user(start: Instant, count: usize) -> f64 {
    // never report a zero duration
    (start.elapsed().as_secs_f64() / count as f64).max(f64::MIN_POSITIVE)
}

/// Times `repeat` rounds over a fixed, evenly strided sample of grid users.
/// Tracing is single-threaded so the columns are comparable.
pub fn bench(scene: &Scene, model: &mut CalibModel, repeat: usize) -> Result<Vec<TimingRow>> {
    if repeat == 0 {
        return Err(Error::Usage("--repeat must be at least 1".into()));
    }
    if model.n() != scene.antennas {
        return Err(Error::NMismatch {
            what: "model".into(),
            expected: scene.antennas,
            got: model.n(),
        });
    }
    let all = scene.enumerate_users();
    if all.is_empty() {
        return Err(Error::Usage("scene has no grid users outside buildings".into()));
    }
    let stride = (all.len() / BENCH_USERS).max(1);
    let users: Vec<Vec3> = all.iter().step_by(stride).take(BENCH_USERS).copied().collect();
    let pair = TwinPair::new(scene);
    let mut rows = Vec::with_capacity(repeat);
    for _ in 0..repeat {
        let t = Instant::now();
        let mut zb = Vec::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            std::hint::black_box(pair.target.trace_user(*u, i));
        }
        let target_trace_s = per_user(t, users.len());

        let t = Instant::now();
        for (i, u) in users.iter().enumerate() {
            zb.push(std::hint::black_box(pair.baseline.trace_user(*u, i)));
        }
        let baseline_trace_s = per_user(t, users.len());

        let weights: Vec<Vec<f64>> = zb
            .iter()
            .map(|paths| {
                let h = twincal_core::channel::synthesize_channel(paths, scene.antennas);
                twincal_core::channel::dft_weights(&h, &pair.codebook).expect("sized").0
            })
            .collect();
        let refs: Vec<&[f64]> = weights.iter().map(|w| w.as_slice()).collect();
        let t = Instant::now();
        std::hint::black_box(model.predict(&users, &refs)?);
        let inference_s = per_user(t, users.len());
        rows.push(TimingRow {
            target_trace_s,
            baseline_trace_s,
            inference_s,
        });
    }
    Ok(rows)
}

pub fn write_timing(rows: &[TimingRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["repeat", "target_trace_s", "baseline_trace_s", "inference_s"])
        .map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        out.write_record([
            i.to_string(),
            r.target_trace_s.to_string(),
            r.baseline_trace_s.to_string(),
            r.inference_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Other(e.to_string()))
}

pub fn mean_row(rows: &[TimingRow]) -> TimingRow {
    let n = rows.len().max(1) as f64;
    let sum = |f: fn(&TimingRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    TimingRow {
        target_trace_s: sum(|r| r.target_trace_s),
        baseline_trace_s: sum(|r| r.baseline_trace_s),
        inference_s: sum(|r| r.inference_s),
    }
}
