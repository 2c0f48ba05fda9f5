//! Feed-forward classifiers with hand-written gradients and the adversarial,
//! cross-gradient and noisy-input training procedures built on them.

mod attacker;
mod cape;
mod cgt;
mod checkpoint;
mod layers;
mod network;
mod train;

pub use attacker::{Attacker, AttackerTopology, Labeled};
pub use cape::{ldp_perturb_rows, train_cape};
pub use cgt::{cross_gradient_inputs, train_cgt};
pub use checkpoint::{from_text, load_network, save_network, to_text};
pub use layers::{softmax, Dense, Mlp, MlpCache, MlpGrads};
pub use network::{argmax_rows, Gradients, HeadSpec, Network, DEFAULT_HEAD_HIDDEN, DEFAULT_TRUNK};
pub use train::{
    joint_gradients, train_joint, train_plain, JointData, JointGradients, JointMode, LossCurve, LossPoint,
    TrainConfig,
};
