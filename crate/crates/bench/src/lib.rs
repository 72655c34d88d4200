//! Shared fixtures for the criterion benches.

use basket_core::engines::{pca_subproblems, Discretised};
use basket_core::presets::set_a;
use basket_core::ExerciseStyle;

/// Discretised first correction plane of Set A (a two-axis problem) on an
/// `m x m` grid.
pub fn set_a_plane(m: usize, style: ExerciseStyle) -> Discretised {
    let subs = pca_subproblems(&set_a(style)).expect("Set A is valid");
    let plane = subs.iter().find(|s| s.axes.len() == 2).expect("Set A has a correction plane");
    plane.discretise(m, None).expect("grid")
}
