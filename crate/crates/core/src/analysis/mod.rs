//! Tomography, fidelity, readout-error mitigation and report generation.

mod density;
mod mitigation;
mod report;
mod tomography;

pub use density::{fidelity, DensityMatrix1Q, PauliExpectations, DENSITY_TOL};
pub use mitigation::{
    build_confusion_matrix, mitigate, mitigate_inverse, project_simplex, solve_constrained, tvd, MitigationMatrix,
    QuasiHistogram, MAX_ITERATIONS,
};
pub use report::{
    binomial_zscore, compare_to_expected, ComparisonReport, ComparisonRow, FidelityEntry, FidelityReport, Z_PASS,
};
pub use tomography::{
    estimate_expectations, exact_expectations, reconstruct_rho, run_tomography, theoretical_rho, tomography_circuits,
    tomography_settings, y_plus, Reconstruction, TomoSetting, TomographyRun, BLOCH_SLACK,
};
