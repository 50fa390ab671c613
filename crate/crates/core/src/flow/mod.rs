//! Flow-matching action-chunk head.
//!
//! Chunks interpolate between noise and data as
//! `A(tau) = tau * A + (1 - tau) * eps`, and the network regresses
//! `v = eps - A`. Along the interpolant `dA(tau)/dtau = A - eps = -v`, so the
//! sampler starts from `eps ~ N(0, I)` at `tau = 0` and takes Euler steps
//! `A <- A - dtau * v(A, tau)` up to `tau = 1`. Everything runs in normalised
//! action space; command channels are clamped after denormalising.
//!
//! The network input is `[A(tau), normalised state, one-hot task, tau,
//! sin 2 pi tau, cos 2 pi tau]`. A one-hot task input feeding a dense layer
//! is a learned task embedding.

mod chunk;
mod model;
mod objective;
mod train;

pub use chunk::{proprio_state, ActionChunk, FlowDataset, Normalizer, BASE_FEATURES, CHUNK_LEN, COMMAND_CHANNELS};
pub use model::{integrate, sample_chunk, tau_features, FlowCodec, FlowHead, FlowModel, VelocityField};
pub use objective::{fm_loss, fm_loss_from, noise_batch, noised_chunk, NoisedBatch};
pub use train::{
    checkpoint_dir, load_checkpoint, save_checkpoint, train_flow, train_flow_from, train_step, write_loss_csv, FlowConfig, FlowTrainState,
};

#[cfg(test)]
pub(crate) mod tests {
    use crate::eval::TrackingMetrics;
    use crate::geometry::{Pose, PoseError};
    use crate::pipeline::{RetargetedEpisode, RetargetedStep, WholeBodyAction, TRIPLET_SCHEMA_VERSION};
    use crate::sim::{BaseState, LowerBodyCommand};

    /// One episode of `n` identical actions (joints at `q`).
    pub(crate) fn constant_episodes(n: usize, q: f64) -> Vec<RetargetedEpisode> {
        let step = |k: usize| RetargetedStep {
            t: k as f64 * 0.05,
            action: WholeBodyAction {
                left_arm: vec![q; 7],
                right_arm: vec![-q; 7],
                left_hand: vec![0.5; 7],
                right_hand: vec![0.2; 7],
                command: LowerBodyCommand::new(0.1, 0.0, -0.05, 0.8),
            },
            base: BaseState::at_rest(0.8),
            goal: [Pose::identity(); 2],
            realized: [Pose::identity(); 2],
            residual: [PoseError::default(); 2],
        };
        vec![RetargetedEpisode {
            schema_version: TRIPLET_SCHEMA_VERSION,
            episode_id: "const".into(),
            task: "hold".into(),
            instruction: "hold still".into(),
            vision_refs: vec![],
            source_embodiment: "dual-arm".into(),
            target_embodiment: "humanoid".into(),
            frequency: 20.0,
            steps: (0..n).map(step).collect(),
            summary: TrackingMetrics::default(),
        }]
    }

    pub(crate) fn constant_dataset(n: usize, q: f64) -> super::FlowDataset {
        super::FlowDataset::from_episodes(&constant_episodes(n, q)).unwrap()
    }
}
