//! Brute-force distance-tolerant metrics, independent of any dilation code.
//!
//! For each set voxel of one mask, scans the `(2d+1)^3` neighbourhood in the
//! other mask and tests the structuring-element distance directly.

use super::{check_dims, MetricReport, MetricsError, Structuring};
use crate::volume::BinaryMask3D;

fn matched(from: &BinaryMask3D, to: &BinaryMask3D, d: u32, se: Structuring) -> (u64, u64) {
    let dims = from.dims();
    let r = d as i64;
    let (mut hits, mut total) = (0u64, 0u64);
    for z in 0..dims.z {
        for y in 0..dims.y {
            for x in 0..dims.x {
                if !from.get(x, y, z) {
                    continue;
                }
                total += 1;
                let mut found = false;
                'search: for dz in -r..=r {
                    let zz = z as i64 + dz;
                    if zz < 0 || zz >= dims.z as i64 {
                        continue;
                    }
                    for dy in -r..=r {
                        let yy = y as i64 + dy;
                        if yy < 0 || yy >= dims.y as i64 {
                            continue;
                        }
                        for dx in -r..=r {
                            let xx = x as i64 + dx;
                            if xx < 0 || xx >= dims.x as i64 {
                                continue;
                            }
                            if se.within(dx, dy, dz, d) && to.get(xx as usize, yy as usize, zz as usize) {
                                found = true;
                                break 'search;
                            }
                        }
                    }
                }
                hits += found as u64;
            }
        }
    }
    (hits, total)
}

/// Same quantities as [`super::dt_prf`], computed by neighbourhood search.
pub fn brute_force_dt(
    g: &BinaryMask3D,
    s: &BinaryMask3D,
    d: u32,
    se: Structuring,
) -> Result<MetricReport, MetricsError> {
    check_dims(g, s)?;
    let (matched_pred, total_pred) = matched(s, g, d, se);
    let (matched_gt, total_gt) = matched(g, s, d, se);
    Ok(MetricReport::from_ratios(d, matched_pred, total_pred, matched_gt, total_gt))
}
