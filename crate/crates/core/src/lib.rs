//! KKM-style fixed-point search and the geometric and fair-division solvers
//! built on top of it.

pub mod engine;
pub mod error;
pub mod fair;
pub mod delta;
pub mod interval;
pub mod lines;
pub mod mass;
pub mod planar;
pub mod session;
pub mod simplex;

pub use engine::{
    solve_colorful_kkm, solve_dual_kkm, solve_kkm, verify_cover, CoverOracle, EngineState, Mode, PendingQuery,
    RainbowCell, Schedule, SolveOptions, SolveStatus, Strategy,
};
pub use error::{Error, Result};
pub use simplex::{owner_of, BarycentricPoint, Cell, Grid, GridVertex};
