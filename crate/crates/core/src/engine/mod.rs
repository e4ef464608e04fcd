//! Rainbow-cell search for KKM, colorful KKM and dual KKM covers.

pub mod oracle;
pub mod search;
pub mod state;
pub mod verify;

pub use oracle::{choose_label, ArgmaxOracle, ArgminOracle, CoverOracle, FnOracle, Mode, DEFAULT_SLACK};
pub use search::{
    solve, solve_colorful_kkm, solve_dual_kkm, solve_kkm, RainbowCell, Schedule, SolveOptions, Strategy,
    DEFAULT_MAX_RESOLUTION,
};
pub use state::{answer_key, AnsweredQuery, EngineState, PendingQuery, SolveStatus, ENGINE_STATE_SCHEMA};
pub use verify::{admissible, verify_cover, CoverReport, Violation};
