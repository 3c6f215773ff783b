//! Classification metrics, Platt calibration and result tables.

mod calibrate;
mod metrics;
mod report;

pub use calibrate::{fit_platt, logit, sigmoid, PlattCalibrator, PlattParams};
pub use metrics::{
    auprc, auroc, binary_auprc, binary_auroc, confusion_and_f1, evaluate, log_loss, F1Parts, MetricReport,
};
pub use report::{render_metric_table, render_per_class_table, ResultRow};
