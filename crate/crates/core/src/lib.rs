pub mod error;
pub mod jets;
pub mod scalar;
pub mod modelspec;
pub mod stochlin;
pub mod par;
pub mod normalize;
pub mod kseries;
pub mod blowup;
pub mod rlct;
pub mod fenergy;
pub mod cli;
