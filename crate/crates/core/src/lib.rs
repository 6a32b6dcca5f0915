//! Exact joint function placement, multi-path routing and latency-bounded
//! resource allocation for NFV network slicing.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod formulation;
pub mod harness;
pub mod instancegen;
pub mod lp;
pub mod lp_format;
pub mod mblp;
pub mod net_model;
pub mod solution;
