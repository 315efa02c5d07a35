pub mod evaluate;
pub mod optimize;
pub mod reconstruct;
pub mod theory;
pub mod tune_lr;
