//! Lattice functions, the nonlocal generator and discrete Hölder seminorms.

mod generator;
mod grid;
mod hoelder;

pub use generator::{apply_generator, apply_generator_component, RadialGrid};
pub use grid::{Callback, Extension, GridFunction, Lattice};
pub use hoelder::{
    gradient_field, hoelder_report, hoelder_seminorm, interpolation_diagnostic, norm_one_plus, shift_constant,
    shift_difference_check, HoelderReport, ShiftDifferenceReport, EXACT_PAIR_LIMIT,
};
