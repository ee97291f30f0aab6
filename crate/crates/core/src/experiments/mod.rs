//! Scenario configuration, Monte Carlo sweeps and result persistence.
//!
//! A [`ScenarioConfig`] is read from JSON. Example:
//!
//! ```json
//! {
//!   "id": "grid",
//!   "model": {"kind": "swing39", "data": "ieee39.csv", "initial_speed_sd": 0.5},
//!   "rank_rule": "pooled",
//!   "amplitude": 0.25,
//!   "noise_variances": [1e-3, 1e-4, 1e-5],
//!   "pairs": {"sample": 100},
//!   "passive": {"fractions": [0, 0.05, 0.1, 0.25, 0.4]},
//!   "active": {"rates": [0, 10, 100, 200, 500], "noise_variances": [3.16e-5]},
//!   "trials": 20,
//!   "seed": 1
//! }
//! ```
//!
//! `pairs` is `"all"`, `{"sample": k}` or `{"list": [[tx, rx], ...]}` with
//! one-based node ids. Relative data paths resolve against `$GLS_DATA_DIR`
//! or the crate's `data` directory. Unknown keys are rejected.

mod config;
mod model;
mod plot;
mod run;
mod table;

pub use config::{
    data_dir, resolve_data_path, ActiveConfig, ModeChoice, ModelConfig, NaturalConfig, PairSelection, PassiveConfig,
    ScenarioConfig, DATA_DIR_ENV,
};
pub use model::Scenario;
pub use plot::{emit_plot_data, figure_series, Figure, Series};
pub use run::{plans_for, run_scenario};
pub use table::{
    bucket_fractions, eve_role, jam_role, parse_eve_role, ResultRow, ResultTable, Sweep, BUCKET_EDGES, HEADER,
    LEGITIMATE,
};
