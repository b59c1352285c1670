//! Time-domain NMR data: synthesis, envelopes, relaxation fits, bootstrap
//! amplitude estimation and enhancement intervals.

mod biexp;
mod bootstrap;
mod echo;
mod enhancement;
mod fid;
mod t1;

pub use biexp::{fit_biexponential, BiexpFit, BiexpOptions, Biexponential};
pub use bootstrap::{bootstrap_amplitude, BootstrapResult, DatasetStore};
pub use echo::{
    echo_times, synthesize_echo_train, EchoParams, EchoTrain, DEFAULT_PHASE_CYCLE,
};
pub use enhancement::{enhancement_with_ci, CiMode, EnhancementReport, RELATIVE_WIDTH_THRESHOLD};
pub use fid::{
    fit_scaling_factor, moving_average, synthesize_fid, DecayModel, FidRecord, ScaleChannel,
    ScaleFit,
};
pub use t1::{fit_t1_small_flip, simulate_small_flip, SmallFlipT1};
