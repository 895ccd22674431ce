pub mod averaging;
pub mod correlation;
pub mod functions;
pub mod patterns;
pub mod pretense;
pub mod runner;
pub mod sieve;
pub mod smoothness;
pub mod straighten;
pub mod sweep;
