//! Depth estimators: template matching, difference of Gaussians and a small
//! trainable patch classifier, plus the heteroscedastic loss and optimizer.

mod adam;
mod dog;
mod dots;
mod estimate;
mod features;
mod loss;
mod patch_model;
mod phase;
mod template;
mod train;

pub use adam::Adam;
pub use dog::{dog_segment, dog_segment_with, dog_sigmas, Cleanup, DogEstimator, DogSegmentation, DOG_RATIO};
pub use dots::{detect_dots, nearest_site_labels, Dot, DotDetector};
pub use estimate::{DepthEstimate, DepthEstimator};
pub use features::{argmax, extract_features, FeatureExtractor, FeatureSpec};
pub use loss::{hetero_loss, hetero_loss_grad, hetero_loss_grad_values, hetero_loss_values, huber, huber_grad};
pub use patch_model::{infer_patch_model, PatchEstimator, PatchModel, Prediction, INIT_GAIN};
pub use phase::{phase_correlate, Fft2, PhaseMatch};
pub use template::{tm_depth, CellMatch, GridSpec, TemplateMatcher, TmResult, LOGVAR_EPS};
pub use train::{build_samples, mean_loss, samples_from_image, samples_from_pair, split_samples, train_patch_model, Sample, TraceRow, TrainConfig, TrainReport, TRACE_HEADER};
