//! Command-line front end for the revpark planner: scenario files in, CSV
//! tables, SVG drawings and run reports out.

pub mod commands;
pub mod csv;
pub mod svg;
