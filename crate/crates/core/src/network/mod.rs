//! Two-stream residual 3D CNN: construction, training, feature extraction and
//! class activation maps.

mod cam;
pub mod config;
mod forward;
mod io;
pub mod params;
mod train;

pub use cam::{relevance_map, relevance_map_native, upsample_trilinear};
pub use config::{parse_scale, NetConfig, DEFAULT_INPUT_DIMS, NUM_BLOCKS};
pub use forward::{
    backward_batch, batch_loss, forward, forward_batch, train_step, update_running_stats, BatchForward, NetCache,
};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use params::{build_network, ConvBn, NetworkParams, ParamMut, ParamRef, Projection, ResBlock, Stream};
pub use train::{
    lr_at_step, predict_ad_probability, select_checkpoint, train, Checkpoint, LabeledPair, LogEntry, TrainOutcome,
    TrainSchedule,
};

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::Result;
use crate::layers::Mode;
use crate::tensor::Volume;

/// Class index of the AD output in the two-logit head (NC is 0).
pub const AD_CLASS: usize = 1;

/// Concatenated `[left GAP, right GAP]` descriptor of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f32>,
}

/// Infer-mode features for one subject. Volumes must be intensity-normalized.
pub fn extract_features(params: &NetworkParams<f32>, id: &str, left: &Volume, right: &Volume) -> Result<FeatureVector> {
    // infer mode never touches the RNG
    let mut rng = Xoshiro256StarStar::seed_from_u64(0);
    let (_, cache) = forward(params, left, right, Mode::Infer, &mut rng)?;
    Ok(FeatureVector {
        id: id.to_string(),
        values: cache.features()[0].clone(),
    })
}

/// Infer-mode class probabilities `softmax(logits)` for one subject.
pub fn predict_proba(params: &NetworkParams<f32>, left: &Volume, right: &Volume) -> Result<Vec<f64>> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(0);
    let (logits, _) = forward(params, left, right, Mode::Infer, &mut rng)?;
    let l: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    Ok(crate::layers::softmax(&l))
}
