//! Desk-scale dexterous-manipulation pipeline.
//!
//! The crate retargets human hand keypoint trajectories onto a configurable
//! robot hand, trains state-based policies with trajectory-guided rewards in
//! a built-in rigid-body simulator, and distills successful rollouts into
//! point-cloud-conditioned visual policies (behavior cloning and diffusion).
//!
//! The numeric core is generic over the scalar type (see [`scalar::Real`]);
//! the pipeline itself runs at f64 through the aliases below.

pub mod augment;
pub mod kinematics;
pub mod math;
pub mod nn;
pub mod pipeline;
pub mod retarget;
pub mod reward;
pub mod rl;
pub mod scalar;
pub mod simenv;
pub mod tasks;
pub mod visual;

use thiserror::Error;

/// Working precision of the shipped pipeline.
pub type Scalar = f64;

pub type Vec3 = math::Vec3<Scalar>;
pub type Mat3 = math::Mat3<Scalar>;
pub type Quat = math::Quat<Scalar>;
pub type RigidTransform = math::RigidTransform<Scalar>;
pub type KinematicChain = kinematics::KinematicChain<Scalar>;
pub type JointConfig = kinematics::JointConfig<Scalar>;


#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("camera sees no geometry")]
    DegenerateCamera,
    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn stage(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code for the CLI: validation errors exit 2, stage
    /// failures exit 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<V> = std::result::Result<V, Error>;

/// Mixes a base seed with tags into an independent stream seed so that
/// unrelated consumers (env resets, policy noise, camera sampling) never
/// share randomness.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        h ^= t.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = splitmix64(h);
    }
    splitmix64(h)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
