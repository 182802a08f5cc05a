//! Minimal 3-d complex FFT on top of rustfft, with per-thread plan caching.
//!
//! Forward transform is unnormalized; the inverse carries the 1/N. Axis
//! passes run z (contiguous), then y, then x with gather/scatter through a
//! column buffer. Serial and allocation-light: results are bitwise
//! reproducible run to run.

use crate::grid::Grid3;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plan<R>(len: usize, forward: bool, f: impl FnOnce(&Arc<dyn Fft<f64>>) -> R) -> R {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        let plan = cache
            .entry((len, forward))
            .or_insert_with(|| {
                planner.plan_fft(
                    len,
                    if forward { FftDirection::Forward } else { FftDirection::Inverse },
                )
            })
            .clone();
        drop(guard);
        f(&plan)
    })
}

fn axis_pass(grid: &Grid3, data: &mut [Complex64], axis: usize, forward: bool) {
    let [nx, ny, nz] = grid.n;
    let len = grid.n[axis];
    with_plan(len, forward, |plan| {
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        match axis {
            2 => {
                for chunk in data.chunks_exact_mut(nz) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
            }
            1 => {
                let mut col = vec![Complex64::default(); ny];
                for ix in 0..nx {
                    for iz in 0..nz {
                        let base = ix * ny * nz + iz;
                        for iy in 0..ny {
                            col[iy] = data[base + iy * nz];
                        }
                        plan.process_with_scratch(&mut col, &mut scratch);
                        for iy in 0..ny {
                            data[base + iy * nz] = col[iy];
                        }
                    }
                }
            }
            0 => {
                let stride = ny * nz;
                let mut col = vec![Complex64::default(); nx];
                for rest in 0..stride {
                    for ix in 0..nx {
                        col[ix] = data[rest + ix * stride];
                    }
                    plan.process_with_scratch(&mut col, &mut scratch);
                    for ix in 0..nx {
                        data[rest + ix * stride] = col[ix];
                    }
                }
            }
            _ => unreachable!(),
        }
    });
}

pub fn fft3(grid: &Grid3, data: &mut [Complex64]) {
    debug_assert_eq!(data.len(), grid.len());
    for axis in [2, 1, 0] {
        axis_pass(grid, data, axis, true);
    }
}

pub fn ifft3(grid: &Grid3, data: &mut [Complex64]) {
    debug_assert_eq!(data.len(), grid.len());
    for axis in [2, 1, 0] {
        axis_pass(grid, data, axis, false);
    }
    let scale = 1.0 / grid.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}
