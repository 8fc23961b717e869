//! Paired-twin dataset generation over the user grid or at random
//! off-grid positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use twincal_core::calibration::DftReport;
use twincal_core::channel::{dft_weights, synthesize_channel};
use twincal_core::{DftCodebook, PathList, Scene, Tracer, Vec3};

use crate::error::{Error, Result};
use crate::formats::Dataset;

/// Target and baseline tracers for one scene, plus the shared codebook.
pub struct TwinPair {
    pub target: Tracer,
    pub baseline: Tracer,
    pub codebook: DftCodebook,
    n: usize,
}

/// Per-user facts beyond the stored record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserInfo {
    /// Line of sight in the exact (target) geometry.
    pub los: bool,
    /// Both twins produced exactly the same path list.
    pub same_paths: bool,
    pub target_paths: usize,
    pub baseline_paths: usize,
}

impl TwinPair {
    pub fn new(scene: &Scene) -> Self {
        Self {
            target: Tracer::new(scene, &scene.profiles.target),
            baseline: Tracer::new(scene, &scene.profiles.baseline),
            codebook: DftCodebook::new(scene.antennas),
            n: scene.antennas,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trace(&self, user: Vec3, index: usize) -> (PathList, PathList) {
        (self.target.trace_user(user, index), self.baseline.trace_user(user, index))
    }

    pub fn report(&self, user: Vec3, index: usize, keep_channels: bool) -> (DftReport, UserInfo) {
        let (t, b) = self.trace(user, index);
        let info = UserInfo {
            los: t.has_los(),
            same_paths: t.paths == b.paths,
            target_paths: t.paths.len(),
            baseline_paths: b.paths.len(),
        };
        let ht = synthesize_channel(&t, self.n);
        let hb = synthesize_channel(&b, self.n);
        let zt = dft_weights(&ht, &self.codebook).expect("codebook sized from scene");
        let zb = dft_weights(&hb, &self.codebook).expect("codebook sized from scene");
        let report = DftReport {
            position: user,
            z_baseline: zb.0,
            z_target: zt.0,
            h_baseline: keep_channels.then_some(hb),
            h_target: keep_channels.then_some(ht),
        };
        (report, info)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub candidates: usize,
    pub inside_buildings: usize,
    /// Users dropped because the target twin found no path at all.
    pub zero_target: usize,
    pub kept: usize,
}

fn trace_all(pair: &TwinPair, users: &[Vec3], keep_channels: bool) -> Vec<(DftReport, UserInfo)> {
    users
        .par_iter()
        .enumerate()
        .map(|(i, u)| pair.report(*u, i, keep_channels))
        .collect()
}

fn has_signal(r: &DftReport) -> bool {
    r.z_target.iter().any(|v| *v > 0.0)
}

/// Every grid user outside the buildings, in grid order, with the
/// per-user facts used by the heatmap.
pub fn grid_reports(scene: &Scene, keep_channels: bool) -> (Vec<(DftReport, UserInfo)>, GenStats) {
    let [nx, ny] = scene.grid.dims();
    let users = scene.enumerate_users();
    let pair = TwinPair::new(scene);
    let mut stats = GenStats {
        candidates: nx * ny,
        inside_buildings: nx * ny - users.len(),
        ..GenStats::default()
    };
    let all = trace_all(&pair, &users, keep_channels);
    let kept: Vec<_> = all.into_iter().filter(|(r, _)| has_signal(r)).collect();
    stats.zero_target = users.len() - kept.len();
    stats.kept = kept.len();
    if stats.zero_target > 0 {
        log::warn!("dropped {} grid users with no target path", stats.zero_target);
    }
    (kept, stats)
}

pub fn grid_dataset(scene: &Scene, keep_channels: bool) -> (Dataset, GenStats) {
    let (reports, stats) = grid_reports(scene, keep_channels);
    (
        Dataset {
            n: scene.antennas,
            records: reports.into_iter().map(|(r, _)| r).collect(),
        },
        stats,
    )
}

fn on_lattice(scene: &Scene, p: Vec3) -> bool {
    let g = &scene.grid;
    let near = |v: f64, o: f64| {
        let k = ((v - o) / g.spacing).round();
        ((v - o) - k * g.spacing).abs() < 1e-9
    };
    near(p.x, g.origin[0]) && near(p.y, g.origin[1])
}

/// `count` users drawn uniformly over the grid extent, outside buildings,
/// off the grid lattice, and reachable by the target twin.
pub fn offgrid_dataset(scene: &Scene, count: usize, seed: u64, keep_channels: bool) -> Result<(Dataset, GenStats)> {
    let g = scene.grid;
    if g.extent[0] <= 0.0 || g.extent[1] <= 0.0 {
        return Err(Error::Usage("off-grid sampling needs a grid with positive extent".into()));
    }
    let pair = TwinPair::new(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = GenStats::default();
    let mut records = Vec::with_capacity(count);
    let max_candidates = 1000 * count.max(1);
    while records.len() < count {
        if stats.candidates >= max_candidates {
            return Err(Error::Other(format!(
                "found only {} valid off-grid users after {} draws",
                records.len(),
                stats.candidates
            )));
        }
        let need = count - records.len();
        let mut batch = Vec::with_capacity(need);
        while batch.len() < need.max(16) && stats.candidates < max_candidates {
            let p = Vec3::new(
                g.origin[0] + rng.random::<f64>() * g.extent[0],
                g.origin[1] + rng.random::<f64>() * g.extent[1],
                g.user_height,
            );
            stats.candidates += 1;
            if scene.inside_any_building(p) {
                stats.inside_buildings += 1;
                continue;
            }
            if on_lattice(scene, p) {
                continue;
            }
            batch.push(p);
        }
        for (r, _) in trace_all(&pair, &batch, keep_channels) {
            if records.len() == count {
                break;
            }
            if has_signal(&r) {
                records.push(r);
            } else {
                stats.zero_target += 1;
            }
        }
    }
    stats.kept = records.len();
    Ok((
        Dataset {
            n: scene.antennas,
            records,
        },
        stats,
    ))
}
