//! Metric graphs compiled to interval exchange transformations, Rauzy–Veech
//! induction with cocycle bookkeeping, the dispersing moving-points
//! simulation and the saturation-time bounds built on top of them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod experiments;
pub mod export;
pub mod graph;
pub mod iet;
pub mod radical;
pub mod rauzy;
pub mod reduction;
pub mod saturation;
pub mod selfsimilar;
pub mod spectra;
