pub mod analysis;
pub mod data;
pub mod fixture;
pub mod modelling;
