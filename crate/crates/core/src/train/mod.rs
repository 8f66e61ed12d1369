//! Loss, optimizer, epoch loop and the finite-difference gradient check.

mod adam;
mod gradcheck;
mod loss;
mod trainer;

pub use adam::{clip_grad_norm, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_fn, relative_error, CheckReport, FD_STEP, REL_ERR_FLOOR};
pub use loss::mse_loss;
pub use trainer::{
    evaluate_loss, predict_windows, train, train_with_hook, EpochRecord, TrainReport, TrainSchedule,
};
