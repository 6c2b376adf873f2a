pub mod estimate;
pub mod kinetics;
pub mod simulate;
pub mod synth;
