pub mod benchmark;
pub mod detect;
pub mod evaluate;
pub mod simulate;
pub mod theory;
