//! Evaluation of multi-target, multi-camera trackers.
//!
//! Two families of measures are computed from ground-truth and tracker
//! detections:
//!
//! * identity measures (IDP, IDR, IDF1) from a global min-cost bijection
//!   between truth and computed trajectories, see [`id_measures`];
//! * event measures (CLEAR MOT, MT/ML/FRG, MCTA) from per-frame matching and
//!   mismatch events, see [`event_measures`].
//!
//! [`diagnostics`] explains where the two disagree around camera handovers,
//! [`synth`] generates controlled scenarios and [`io`] reads and writes the
//! CSV format used by the `mtmc-eval` binary.
//!
//! ```
//! use mtmc_eval::synth::{make_switch_case, SwitchCase};
//! use mtmc_eval::id_measures::{id_scores, match_truth_to_result};
//!
//! let scenario = make_switch_case(SwitchCase::A);
//! let m = match_truth_to_result(&scenario).unwrap();
//! let s = id_scores(&m);
//! assert!((s.idf1 - 2.0 / 3.0).abs() < 1e-12);
//! ```

pub mod assignment;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod event_measures;
pub mod geometry;
pub mod id_measures;
pub mod io;
pub mod model;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use model::{build_scenario, Detection, OverlapMode, Scenario, Site};
pub use report::{evaluate, EvalOptions, ReportDocument};
