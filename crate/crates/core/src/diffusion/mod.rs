//! Noise schedules, forward noising, denoisers and ancestral sampling.

mod checkpoint;
mod denoiser;
pub(crate) mod process;
mod schedule;
mod tiny;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint,
    CHECKPOINT_VERSION,
};
pub use denoiser::{
    DenoiseMode, Denoiser, GaussianMixtureDenoiser, MemorizedShapeDenoiser, MixtureComponent,
    PointKdeDenoiser,
};
pub use process::{denoise_estimate, forward_noise, sample};
pub use schedule::{linear_schedule, NoiseSchedule, ScheduleParams, DEFAULT_SIGMA_MAX, DEFAULT_STEPS};
pub use tiny::{train_tiny_denoiser, LossCurve, TinyArch, TinyDenoiser, TrainConfig};
