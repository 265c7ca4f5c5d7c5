//! Scenario files, the subcommands run on them and their outputs.

mod commands;
mod scenario;

pub use commands::{
    avoidance_of, check, error_exit_code, evaluate_hypotheses, identity_report, parse_values, radial, run_scenario,
    simulate, sweep, sweep_to_dir, verify_identities, write_snapshots, write_sweep_csv, write_trace_csv, CheckReport,
    Headline, RadialReport, RunReport, SweepRow, ThresholdMonitor, EXIT_CHECK_FAILED, EXIT_HYPOTHESES_UNMET,
    EXIT_NUMERICAL_FAILURE, EXIT_OK, EXIT_SINGULAR, THRESHOLD_SLACK,
};
pub use scenario::{
    parse_scenario, parse_scenario_str, parse_scenario_value, set_number, Checks, IdentityBlock, InitialCurve,
    RadialBlock, Scenario,
};
