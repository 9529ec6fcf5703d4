use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AveragePyramid, PrefixSums, SampledFunction};

/// Operators exercised by the interpolation corollary. All three are linear
/// and map nonnegative functions to nonnegative functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OperatorSpec {
    Identity,
    /// Conditional expectation onto order-`m` dyadic cubes.
    DyadicAverage { order: i32 },
    /// `x ↦ |[0,x]|⁻¹ ∫_{[0,x]} f` sampled at the upper corner of each cell.
    HardyAverage,
}

impl OperatorSpec {
    pub fn name(&self) -> String {
        match self {
            OperatorSpec::Identity => "identity".to_string(),
            OperatorSpec::DyadicAverage { order } => format!("dyadic-average:{order}"),
            OperatorSpec::HardyAverage => "hardy-average".to_string(),
        }
    }

    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let w = f.window();
        match *self {
            OperatorSpec::Identity => Ok(f.clone()),
            OperatorSpec::DyadicAverage { order } => {
                if order > w.max_order() {
                    // The average over [0, 2^m)^n would be spread outside
                    // the window.
                    return Err(Error::OutsideWindow(format!(
                        "dyadic averaging at order {order} > window order {}",
                        w.max_order()
                    )));
                }
                if order < w.min_order() {
                    return Err(Error::OrderOutOfRange {
                        order,
                        min: w.min_order(),
                        max: w.max_order(),
                    });
                }
                let pyramid = AveragePyramid::new(f);
                let vals = pyramid.order(order).expect("order in range");
                let sc = pyramid.side_count(order);
                let k = (order - w.min_order()) as u32;
                SampledFunction::from_fn(w, |[i, j]| {
                    if w.dim == 1 {
                        vals[i >> k]
                    } else {
                        vals[(i >> k) * sc + (j >> k)]
                    }
                })
            }
            OperatorSpec::HardyAverage => {
                let ps = PrefixSums::new(f);
                SampledFunction::from_fn(w, |[i, j]| {
                    let hi = [i as i64 + 1, j as i64 + 1];
                    let count = if w.dim == 1 { hi[0] } else { hi[0] * hi[1] };
                    ps.rect_sum([0, 0], hi) / count as f64
                })
            }
        }
    }
}
