//! Trace statistics, cyclic spectral analysis, PCA and FID.

mod cyclic;
mod features;
mod pca;
pub mod report;
mod spectrogram;

pub use cyclic::{
    csc, csd, csd_of, direct_csd, exceedance_stats, max_coeff_distribution, CyclicGrid,
    CyclicSpectrum, MASK_FRACTION,
};
pub use features::{
    autocorr, autocorr_of, basis_rows, feature_table, feature_vector, features_of, FeatureVector,
    BASIS_DIM, DEFAULT_PEAK_THRESH,
};
pub use pca::{
    column_means, covariance, fid, fid_in_space, matrix_from_rows, pca_fit, pca_project, FidSpace,
    PcaModel, Standardizer,
};
pub use report::{auto_nfft, evaluate, EvalConfig, EvalReport};
pub use spectrogram::{spectrogram, Spectrogram};
