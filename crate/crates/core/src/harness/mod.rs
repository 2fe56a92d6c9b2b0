//! Analysis, scenario runs and the quick self-test behind the CLI.

pub mod analysis;
pub mod scenario;
pub mod selftest;

pub use analysis::{
    default_range, histogram, peak_summary, theoretical_qber, AnalysisError, GroupStats, Histogram, PeakGroup,
    PeakSummary, DEFAULT_BIN_WIDTH,
};
pub use scenario::{
    evaluate_scenario, parse_values, run_scenario, run_sweep, sweep, HarnessError, ScenarioConfig, ScenarioOutput,
    SweepPoint,
};
pub use selftest::{selftest, Check};
