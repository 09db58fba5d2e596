//! Binaural signal matching: LS / MagLS filter design over a diffuse grid,
//! crossover assembly, head-rotation compensation and STFT-domain rendering.

mod bank;
mod design;
mod linalg;
mod render;
mod solve;

pub use bank::{
    assemble_filterbank, magls_start_bin, BankMeta, BsmFilterBank, EarDesigns, FilterMethod, MaglsStats,
    BANK_FORMAT, BANK_VERSION,
};
pub use design::{
    build_job_filters, filter_designs, BsmConfig, BsmDesigner, BsmMaglsDesign, FilterDesign, LsDesign,
    MaglsDesign, RenderConfiguration, RenderJob,
};
pub use linalg::Cholesky;
pub use render::render_binaural;
pub use solve::{
    compute_ls_filters, compute_magls_filters, ls_objective, magls_objective, magnitude_residual,
    DesignSystems, MaglsBin, MaglsInit, MaglsOrigin, MaglsSettings,
};
