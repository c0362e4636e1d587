//! Correlation statistics, quantum-contribution metrics, hybrid-versus-
//! baseline comparisons and the proxy-epoch correlation scan.

mod compare;
mod contribution;
mod scan;
mod stats;

pub use compare::{
    compare_baseline, compare_specs, write_curves_csv, write_histories_csv, write_history_csv, Arm,
    Comparison, CurvePoint, MeanStd, SeedRun,
};
pub use contribution::{
    contribution_report, feature_orthogonality, interclass_cosine, layer_features,
    write_cosine_matrix_csv, ContributionReport, InterclassCosine, LayerFeatures, Orthogonality,
};
pub use scan::{
    correlation_rows, epoch_correlation_scan, sample_architectures, write_scan_csv,
    CorrelationScan, ScanArchitecture, ScanRow, CORRELATION_THRESHOLD,
};
pub use stats::{average_ranks, cosine, mean, pearson, sample_std, spearman, std_dev};
