pub mod cluster;
pub mod estimate;
pub mod simulate;
