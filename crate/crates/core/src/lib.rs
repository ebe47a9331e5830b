pub mod certificate;
pub mod checker;
pub mod dpo;
pub mod graph;
pub mod morphism;
pub mod prover;
pub mod sample;
pub mod semiring;
pub mod signature;
pub mod system;
pub mod wtg;
