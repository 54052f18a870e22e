//! Command-line front end for running time-varying averaged-operator
//! experiments: scenario configs in, trajectory CSVs, reports and SVG
//! charts out.

pub mod commands;
pub mod records;
pub mod svg;
