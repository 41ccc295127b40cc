pub mod blockmap;
pub mod density_lower;
pub mod density_upper;
pub mod dsl;
pub mod lattice;
pub mod logic;
pub mod sft;
pub mod topology;
