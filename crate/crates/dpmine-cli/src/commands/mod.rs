pub mod estimate;
pub mod gendemo;
pub mod report;
