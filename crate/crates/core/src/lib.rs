pub mod cli;
pub mod error;
pub mod filterbank;
pub mod grid;
pub mod norms;
pub mod paradiff;
pub mod quadrature;
pub mod testfn;
pub mod verify;
