pub mod autodiff;
pub mod error;
pub mod harness;
pub mod losses;
pub mod memory_task;
pub mod pca;
pub mod rng;
pub mod scene_task;
pub mod students;
