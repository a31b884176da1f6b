pub mod bayesopt;
pub mod bench;
pub mod clustering;
pub mod cv;
pub mod error;
pub mod gp;
pub mod gridsearch;
pub mod io;
pub mod lightcurve;
pub mod pi;
pub mod readout;
pub mod scr;
pub mod series;
pub mod seriesgen;

pub use cv::{cv_objective, CvConfig, CvEvaluator, Task};
pub use error::{Error, Result};
pub use readout::{fit_readout, nmse, predict, Readout};
pub use scr::{build_scr, run_reservoir, ScrModel, ScrParams, StateMatrix};
pub use series::{split, standardize, SplitSpec, TimeSeries};
