//! Per-position beam discrepancy between the two twins.

use std::io::Write;

use rayon::prelude::*;
use twincal_core::feedback::select_top_p;
use twincal_core::metrics::{beam_discrepancy, BeamDiscrepancy};
use twincal_core::{Scene, Vec3};

use crate::dataset::{TwinPair, UserInfo};
use crate::error::{Error, Result};
use crate::experiment::csv_err;
use crate::formats::Dataset;

/// Only top-4 selections are compared.
pub const HEATMAP_P: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapRow {
    pub position: Vec3,
    pub discrepancy: BeamDiscrepancy,
    /// Present when the scene was available to retrace the user.
    pub info: Option<UserInfo>,
}

pub fn discrepancy(z_baseline: &[f64], z_target: &[f64]) -> Result<BeamDiscrepancy> {
    let sel = |z: &[f64]| select_top_p(z, HEATMAP_P).map_err(|e| Error::Other(e.to_string()));
    beam_discrepancy(&sel(z_baseline)?, &sel(z_target)?).map_err(|e| Error::Other(e.to_string()))
}

pub fn heatmap(data: &Dataset, scene: Option<&Scene>) -> Result<Vec<HeatmapRow>> {
    if data.n < HEATMAP_P {
        return Err(Error::Usage(format!("heatmap needs N >= {HEATMAP_P}, dataset has N = {}", data.n)));
    }
    if let Some(s) = scene {
        if s.antennas != data.n {
            return Err(Error::NMismatch {
                what: "scene".into(),
                expected: data.n,
                got: s.antennas,
            });
        }
    }
    let pair = scene.map(TwinPair::new);
    data.records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let info = pair.as_ref().map(|p| p.report(r.position, i, false).1);
            Ok(HeatmapRow {
                position: r.position,
                discrepancy: discrepancy(&r.z_baseline, &r.z_target)?,
                info,
            })
        })
        .collect()
}

pub fn write_heatmap(rows: &[HeatmapRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let with_info = rows.first().is_some_and(|r| r.info.is_some());
    let mut header = vec!["x", "y", "rank_metric", "set_metric"];
    if with_info {
        header.extend(["los", "same_paths"]);
    }
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut row = vec![
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.discrepancy.rank.to_string(),
            r.discrepancy.set.to_string(),
        ];
        if let Some(info) = r.info {
            row.push(u8::from(info.los).to_string());
            row.push(u8::from(info.same_paths).to_string());
        }
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Other(e.to_string()))
}

/// Mean set metric over LoS and NLoS users, `None` when a class is empty.
pub fn los_split(rows: &[HeatmapRow]) -> (Option<f64>, Option<f64>) {
    let mean = |los: bool| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.info.is_some_and(|i| i.los == los))
            .map(|r| f64::from(r.discrepancy.set))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    (mean(true), mean(false))
}
