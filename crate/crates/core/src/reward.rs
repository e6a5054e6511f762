//! Trajectory-guided rewards, stage handling, and task metrics.
//!
//! An episode is rewarded against a time-indexed reference trajectory in two
//! stages. During pre-grasp the hand earns a sharp exponential bonus for
//! tracking the reference fingertip path; after the transition the reward
//! jointly tracks hand and object motion and adds contact and lift bonuses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{JointConfig, KinematicChain};
use crate::math::{Quat, RigidTransform, Vec3};
use crate::scalar::{c, to_f64, Real};
use crate::simenv::BodyShape;
use crate::{Error, Result};

/// One frame of a reference trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReferenceFrame<T: Real> {
    pub q: JointConfig<T>,
    /// Fingertip positions, consistent with `q` under the hand's kinematics.
    pub tips: Vec<Vec3<T>>,
    pub obj_pos: Vec3<T>,
    pub obj_quat: Quat<T>,
}

/// Time-indexed reference: hand joints, fingertip targets, and object poses,
/// split into a pre-grasp prefix and a manipulation suffix.
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory<T: Real> {
    pub frames: Vec<ReferenceFrame<T>>,
    /// Number of leading pre-grasp frames.
    pub pre_grasp_len: usize,
    pub target_pos: Vec3<T>,
    pub target_quat: Quat<T>,
}

impl<T: Real> ReferenceTrajectory<T> {
    pub fn new(
        frames: Vec<ReferenceFrame<T>>,
        pre_grasp_len: usize,
        target_pos: Vec3<T>,
        target_quat: Quat<T>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("reference trajectory has no frames"));
        }
        if pre_grasp_len == 0 || pre_grasp_len >= frames.len() {
            return Err(Error::invalid(format!(
                "pre-grasp length {} must be in (0, {})",
                pre_grasp_len,
                frames.len()
            )));
        }
        for (t, f) in frames.iter().enumerate() {
            let finite = f.q.values.iter().all(|v| v.is_finite())
                && f.tips.iter().all(|p| p.is_finite())
                && f.obj_pos.is_finite()
                && f.obj_quat.is_finite();
            if !finite {
                return Err(Error::NonFinite(format!("reference frame {t}")));
            }
        }
        Ok(Self {
            frames,
            pre_grasp_len,
            target_pos,
            target_quat,
        })
    }

    /// Builds the reference from joint configurations and object poses,
    /// deriving fingertip targets through forward kinematics.
    pub fn from_joint_path(
        chain: &KinematicChain<T>,
        path: &[JointConfig<T>],
        object: &[(Vec3<T>, Quat<T>)],
        pre_grasp_len: usize,
    ) -> Result<Self> {
        if path.len() != object.len() {
            return Err(Error::DimensionMismatch {
                expected: path.len(),
                got: object.len(),
            });
        }
        let mut frames = Vec::with_capacity(path.len());
        for (q, &(obj_pos, obj_quat)) in path.iter().zip(object) {
            let tips = chain.fingertip_positions(q)?;
            frames.push(ReferenceFrame {
                q: q.clone(),
                tips,
                obj_pos,
                obj_quat,
            });
        }
        let last = frames.last().expect("non-empty");
        let (target_pos, target_quat) = (last.obj_pos, last.obj_quat);
        Self::new(frames, pre_grasp_len, target_pos, target_quat)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Reference frame for a cursor value, frozen at the final frame.
    pub fn frame_at(&self, cursor: usize) -> &ReferenceFrame<T> {
        &self.frames[cursor.min(self.frames.len() - 1)]
    }
}

/// Reward weights. The lift bonus weight has no published value and defaults
/// to 2.0; the contact term defaults to counting fingertips in contact
/// rather than a 0/1 indicator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct RewardCoefficients<T: Real> {
    pub lambda1: T,
    pub lambda2: T,
    pub lambda3: T,
    pub lambda4: T,
    pub alpha1: T,
    pub alpha2: T,
    /// Scale of the pre-grasp exponential bonus.
    pub pregrasp_scale: T,
    /// Sharpness of the fingertip-tracking exponential.
    pub pregrasp_sharpness: T,
    /// Count fingertips in contact (true) or use a 0/1 indicator (false).
    pub contact_as_count: bool,
}

impl<T: Real> Default for RewardCoefficients<T> {
    fn default() -> Self {
        Self {
            lambda1: c(4.0),
            lambda2: c(10.0),
            lambda3: c(0.5),
            lambda4: c(2.0),
            alpha1: c(50.0),
            alpha2: c(0.1),
            pregrasp_scale: c(10.0),
            pregrasp_sharpness: c(10.0),
            contact_as_count: true,
        }
    }
}

fn stacked_sq_error<T: Real>(tips: &[Vec3<T>], ref_tips: &[Vec3<T>]) -> Result<T> {
    if tips.len() != ref_tips.len() {
        return Err(Error::DimensionMismatch {
            expected: ref_tips.len(),
            got: tips.len(),
        });
    }
    Ok(tips
        .iter()
        .zip(ref_tips)
        .map(|(a, b)| (*a - *b).norm_sq())
        .fold(T::zero(), |s, x| s + x))
}

/// Mean per-tip distance, used for stage transitions and the hand metric.
pub fn mean_tip_error<T: Real>(tips: &[Vec3<T>], ref_tips: &[Vec3<T>]) -> Result<T> {
    if tips.len() != ref_tips.len() {
        return Err(Error::DimensionMismatch {
            expected: ref_tips.len(),
            got: tips.len(),
        });
    }
    let sum = tips
        .iter()
        .zip(ref_tips)
        .map(|(a, b)| (*a - *b).norm())
        .fold(T::zero(), |s, x| s + x);
    Ok(sum / c(tips.len() as f64))
}

/// Pre-grasp tracking bonus: `scale * exp(-sharpness * |tips - ref|^2)`,
/// in (0, scale].
pub fn pregrasp_step_reward<T: Real>(
    tips: &[Vec3<T>],
    ref_tips: &[Vec3<T>],
    coeffs: &RewardCoefficients<T>,
) -> Result<T> {
    let err = stacked_sq_error(tips, ref_tips)?;
    Ok(coeffs.pregrasp_scale * (-coeffs.pregrasp_sharpness * err).exp())
}

/// Angular distance between two unit quaternions, `2 acos(|<a,b>|)`,
/// in [0, pi].
pub fn angular_distance<T: Real>(a: Quat<T>, b: Quat<T>) -> Result<T> {
    let tol = c(1e-6);
    if !a.is_unit(tol) || !b.is_unit(tol) {
        return Err(Error::invalid("angular distance needs unit quaternions"));
    }
    Ok(a.angular_distance(b))
}

/// Object tracking term `exp(-a1 (|x - x_ref|^2 + a2 phi(q, q_ref)))`,
/// in (0, 1].
pub fn object_term<T: Real>(
    obj_pos: Vec3<T>,
    obj_quat: Quat<T>,
    ref_pos: Vec3<T>,
    ref_quat: Quat<T>,
    alpha1: T,
    alpha2: T,
) -> Result<T> {
    let pos_err = (obj_pos - ref_pos).norm_sq();
    let ang = angular_distance(obj_quat, ref_quat)?;
    Ok((-alpha1 * (pos_err + alpha2 * ang)).exp())
}

/// What the manipulation reward needs to see of the world.
#[derive(Clone, Debug)]
pub struct ManipulationSnapshot<T: Real> {
    pub tips: Vec<Vec3<T>>,
    pub obj_pos: Vec3<T>,
    pub obj_quat: Quat<T>,
    pub fingertips_in_contact: usize,
    pub lifted: bool,
}

/// Which reward terms are active; used for reward-ablation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    /// Object-distance pre-grasp, hand term kept in manipulation.
    NoPregraspHand,
    /// Fingertip-tracking pre-grasp, object/lift-only manipulation.
    NoManipulationHand,
    /// Hand rewards at both stages.
    Full,
}

impl RewardVariant {
    pub fn manipulation_hand_term(self) -> bool {
        !matches!(self, RewardVariant::NoManipulationHand)
    }

    pub fn manipulation_contact_term(self) -> bool {
        !matches!(self, RewardVariant::NoManipulationHand)
    }

    pub fn pregrasp_tracks_reference(self) -> bool {
        !matches!(self, RewardVariant::NoPregraspHand)
    }
}

/// Manipulation-stage reward: weighted hand tracking, object tracking,
/// contact count, and lift bonus.
pub fn manipulation_step_reward<T: Real>(
    snap: &ManipulationSnapshot<T>,
    ref_frame: &ReferenceFrame<T>,
    coeffs: &RewardCoefficients<T>,
) -> Result<T> {
    manipulation_step_reward_variant(snap, ref_frame, coeffs, RewardVariant::Full)
}

pub fn manipulation_step_reward_variant<T: Real>(
    snap: &ManipulationSnapshot<T>,
    ref_frame: &ReferenceFrame<T>,
    coeffs: &RewardCoefficients<T>,
    variant: RewardVariant,
) -> Result<T> {
    let mut r = T::zero();
    if variant.manipulation_hand_term() {
        // Same exponential form as pre-grasp, normalized to (0, 1].
        let err = stacked_sq_error(&snap.tips, &ref_frame.tips)?;
        r += coeffs.lambda1 * (-coeffs.pregrasp_sharpness * err).exp();
    }
    r += coeffs.lambda2
        * object_term(
            snap.obj_pos,
            snap.obj_quat,
            ref_frame.obj_pos,
            ref_frame.obj_quat,
            coeffs.alpha1,
            coeffs.alpha2,
        )?;
    if variant.manipulation_contact_term() {
        let contact = if coeffs.contact_as_count {
            c(snap.fingertips_in_contact as f64)
        } else if snap.fingertips_in_contact > 0 {
            T::one()
        } else {
            T::zero()
        };
        r += coeffs.lambda3 * contact;
    }
    if snap.lifted {
        r += coeffs.lambda4;
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    PreGrasp,
    Manipulation,
}

/// Per-episode stage tracker. The cursor advances one reference frame per
/// policy step and freezes at the end of the reference; the stage switches
/// to manipulation exactly once.
#[derive(Clone, Debug)]
pub struct RewardStageMachine<T: Real> {
    pub stage: Stage,
    /// Mean fingertip error below which the pre-grasp counts as reached.
    pub transition_threshold: T,
    /// Steps past the pre-grasp end after which the transition is forced.
    pub grace_window: usize,
    /// Policy steps taken this episode; keeps counting past the reference.
    ticks: usize,
    pre_grasp_len: usize,
    horizon: usize,
}

impl<T: Real> RewardStageMachine<T> {
    pub fn new(ref_traj: &ReferenceTrajectory<T>, threshold: T, grace_window: usize) -> Self {
        Self {
            stage: Stage::PreGrasp,
            transition_threshold: threshold,
            grace_window,
            ticks: 0,
            pre_grasp_len: ref_traj.pre_grasp_len,
            horizon: ref_traj.len(),
        }
    }

    /// Reference frame cursor, frozen at the end of the reference.
    pub fn cursor(&self) -> usize {
        self.ticks.min(self.horizon)
    }

    /// Advances the cursor and applies the stage-transition rule given the
    /// current fingertip positions.
    pub fn step(&mut self, tips: &[Vec3<T>], ref_traj: &ReferenceTrajectory<T>) -> Result<()> {
        self.ticks += 1;
        if self.stage == Stage::PreGrasp && self.ticks >= self.pre_grasp_len {
            let gate = ref_traj.frame_at(self.pre_grasp_len);
            let err = mean_tip_error(tips, &gate.tips)?;
            let forced = self.ticks >= self.pre_grasp_len + self.grace_window;
            if err < self.transition_threshold || forced {
                self.stage = Stage::Manipulation;
            }
        }
        Ok(())
    }
}

/// Per-episode trajectory-matching metrics.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Mean object position error over time (m).
    pub obj_err_mean: f64,
    /// Mean fingertip position error over time (m).
    pub hand_err_mean: f64,
    /// Fraction of timesteps with object error below 1 cm.
    pub obj_track_rate: f64,
    /// Fraction of timesteps with fingertip error below 5 cm.
    pub hand_track_rate: f64,
}

/// Computes tracking metrics for an achieved `(object position, fingertips)`
/// sequence against the reference, aligned by step index.
pub fn episode_metrics<T: Real>(
    achieved: &[(Vec3<T>, Vec<Vec3<T>>)],
    ref_traj: &ReferenceTrajectory<T>,
) -> Result<EpisodeMetrics> {
    if achieved.is_empty() {
        return Err(Error::invalid("empty achieved trajectory"));
    }
    let mut obj_sum = 0.0;
    let mut hand_sum = 0.0;
    let mut obj_ok = 0usize;
    let mut hand_ok = 0usize;
    for (t, (obj_pos, tips)) in achieved.iter().enumerate() {
        let rf = ref_traj.frame_at(t + 1);
        let eo = to_f64((*obj_pos - rf.obj_pos).norm());
        let eh = to_f64(mean_tip_error(tips, &rf.tips)?);
        obj_sum += eo;
        hand_sum += eh;
        if eo < 0.01 {
            obj_ok += 1;
        }
        if eh < 0.05 {
            hand_ok += 1;
        }
    }
    let n = achieved.len() as f64;
    Ok(EpisodeMetrics {
        obj_err_mean: obj_sum / n,
        hand_err_mean: hand_sum / n,
        obj_track_rate: obj_ok as f64 / n,
        hand_track_rate: hand_ok as f64 / n,
    })
}

/// Relocation success at the 10 cm and 3 cm final-distance thresholds.
pub fn relocate_success<T: Real>(final_pos: Vec3<T>, target: Vec3<T>) -> (bool, bool) {
    let d = to_f64((final_pos - target).norm());
    (d < 0.10, d < 0.03)
}

/// Monte-Carlo fraction of the object volume lying inside the container
/// volume. Seeded and deterministic.
pub fn containment_fraction<T: Real>(
    object: &BodyShape<T>,
    object_pose: &RigidTransform<T>,
    container: &BodyShape<T>,
    container_pose: &RigidTransform<T>,
    samples: usize,
    seed: u64,
) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let container_inv = container_pose.inverse();
    let mut inside = 0usize;
    for _ in 0..samples {
        let p_local = sample_in_shape(object, &mut rng);
        let p_world = object_pose.apply(p_local);
        if container.contains_local(container_inv.apply(p_world)) {
            inside += 1;
        }
    }
    c::<T>(inside as f64) / c(samples as f64)
}

/// Uniform sample inside the shape volume by rejection from its local AABB.
fn sample_in_shape<T: Real>(shape: &BodyShape<T>, rng: &mut ChaCha8Rng) -> Vec3<T> {
    let half = shape.local_half_extents();
    loop {
        let p = Vec3::new(
            c::<T>(rng.gen_range(-1.0..1.0)) * half.x,
            c::<T>(rng.gen_range(-1.0..1.0)) * half.y,
            c::<T>(rng.gen_range(-1.0..1.0)) * half.z,
        );
        if shape.contains_local(p) {
            return p;
        }
    }
}
