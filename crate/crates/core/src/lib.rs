//! Lightlike Cartan geometries through the standard tractor bundle.
//!
//! Geometries are given on a single chart by a degenerate metric `h` and a
//! radical field `Z`. Screen forms, tractor sections, connections and
//! curvature are all built from closed-form expressions so that every
//! identity can be checked by evaluating residuals at sample points.

// Index loops mirror the tensor notation; `!(x < tol)` is meant to fail on NaN.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::redundant_guards
)]

pub mod calculus;
pub mod report;
pub mod algebra;
pub mod screen;
pub mod tractor;
pub mod models;
pub mod normalize;
