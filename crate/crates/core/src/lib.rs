pub mod error;
pub mod estimator;
pub mod filterbank;
pub mod io;
pub mod linalg;
pub mod moment_space;
pub mod numerics;
pub mod simulate;
pub mod spectral_factor;
