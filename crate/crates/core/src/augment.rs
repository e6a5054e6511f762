//! Reference-trajectory augmentation: rigid in-plane relocation of a whole
//! trajectory and interpolation of its tail toward a new target pose.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{JointType, KinematicChain};
use crate::math::{Quat, RigidTransform, Vec3};
use crate::reward::{ReferenceFrame, ReferenceTrajectory};
use crate::scalar::{c, to_f64, Real};
use crate::{Error, Result};

/// Sampling ranges for trajectory augmentation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct AugmentSpec<T: Real> {
    pub translation_x: (T, T),
    pub translation_y: (T, T),
    pub z_rotation: (T, T),
    /// Half-width of the uniform target displacement per horizontal axis;
    /// zero disables target interpolation.
    pub target_displacement: T,
    /// Frames appended when interpolating toward a new target.
    pub interpolation_frames: usize,
}

impl<T: Real> Default for AugmentSpec<T> {
    fn default() -> Self {
        Self {
            translation_x: (c(-0.1), c(0.1)),
            translation_y: (c(-0.1), c(0.1)),
            z_rotation: (c(-std::f64::consts::PI), c(std::f64::consts::PI)),
            target_displacement: T::zero(),
            interpolation_frames: 10,
        }
    }
}

impl<T: Real> AugmentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.translation_x, self.translation_y, self.z_rotation] {
            if lo > hi {
                return Err(Error::invalid("augmentation range has lower > upper"));
            }
        }
        if self.target_displacement < T::zero() {
            return Err(Error::invalid("target displacement must be non-negative"));
        }
        if self.interpolation_frames == 0 {
            return Err(Error::invalid("interpolation frame count must be at least 1"));
        }
        Ok(())
    }

    /// Identity augmentation: all ranges collapsed to zero.
    pub fn identity() -> Self {
        Self {
            translation_x: (T::zero(), T::zero()),
            translation_y: (T::zero(), T::zero()),
            z_rotation: (T::zero(), T::zero()),
            target_displacement: T::zero(),
            interpolation_frames: 1,
        }
    }
}

/// Planar relocation of a trajectory: yaw about the vertical axis through
/// the initial object position, then a horizontal shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PoseDelta<T: Real> {
    pub dx: T,
    pub dy: T,
    pub yaw: T,
}

impl<T: Real> PoseDelta<T> {
    pub fn identity() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            yaw: T::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.dx == T::zero() && self.dy == T::zero() && self.yaw == T::zero()
    }

    /// The world transform this delta applies, given the rotation pivot.
    pub fn world_transform(&self, pivot: Vec3<T>) -> RigidTransform<T> {
        let rot = Quat::from_axis_angle(Vec3::unit_z(), self.yaw);
        let spin = RigidTransform::from_translation(pivot)
            .compose(&RigidTransform::from_rotation(rot))
            .compose(&RigidTransform::from_translation(-pivot));
        RigidTransform::from_translation(Vec3::new(self.dx, self.dy, T::zero())).compose(&spin)
    }
}

fn free_base_dof<T: Real>(chain: &KinematicChain<T>) -> Option<(usize, RigidTransform<T>)> {
    chain.links.iter().enumerate().find_map(|(i, l)| {
        (l.joint == JointType::FreeBase).then(|| (chain.dof_offset(i), l.offset))
    })
}

/// Re-derives free-base joint values after premultiplying the base pose by a
/// world transform; finger joints are untouched.
fn carry_hand_frame<T: Real>(
    frame: &ReferenceFrame<T>,
    g: &RigidTransform<T>,
    base: Option<(usize, RigidTransform<T>)>,
) -> crate::kinematics::JointConfig<T> {
    let mut q = frame.q.clone();
    if let Some((off, offset)) = base {
        let t = Vec3::new(q.values[off], q.values[off + 1], q.values[off + 2]);
        let w = Vec3::new(q.values[off + 3], q.values[off + 4], q.values[off + 5]);
        let motion = RigidTransform::new(Quat::from_rotvec(w), t);
        let pose = offset.compose(&motion);
        let moved = g.compose(&pose);
        let new_motion = offset.inverse().compose(&moved);
        let nt = new_motion.translation;
        let nw = new_motion.rotation.to_rotvec();
        for (k, v) in [nt.x, nt.y, nt.z, nw.x, nw.y, nw.z].into_iter().enumerate() {
            q.values[off + k] = v;
        }
    }
    q
}

/// Applies a rigid relocation to every frame of the reference: object poses,
/// fingertip targets, and the hand's free-base coordinates all move together.
pub fn transform_reference<T: Real>(
    chain: &KinematicChain<T>,
    reference: &ReferenceTrajectory<T>,
    delta: &PoseDelta<T>,
) -> ReferenceTrajectory<T> {
    if delta.is_identity() {
        return reference.clone();
    }
    let pivot = reference.frames[0].obj_pos;
    let g = delta.world_transform(pivot);
    let base = free_base_dof(chain);
    let frames = reference
        .frames
        .iter()
        .map(|f| ReferenceFrame {
            q: carry_hand_frame(f, &g, base),
            tips: f.tips.iter().map(|&p| g.apply(p)).collect(),
            obj_pos: g.apply(f.obj_pos),
            obj_quat: (g.rotation * f.obj_quat).normalized(),
        })
        .collect();
    ReferenceTrajectory {
        frames,
        pre_grasp_len: reference.pre_grasp_len,
        target_pos: g.apply(reference.target_pos),
        target_quat: (g.rotation * reference.target_quat).normalized(),
    }
}

/// Appends `k` frames interpolating the object from its final reference pose
/// to `new_target`, carrying the hand rigidly with the object so the grasp
/// geometry is preserved.
pub fn interpolate_target<T: Real>(
    chain: &KinematicChain<T>,
    reference: &ReferenceTrajectory<T>,
    new_target_pos: Vec3<T>,
    new_target_quat: Quat<T>,
    k: usize,
) -> Result<ReferenceTrajectory<T>> {
    if k == 0 {
        return Err(Error::invalid("interpolation needs at least one frame"));
    }
    let last = reference.frames.last().expect("validated non-empty").clone();
    let last_pose = RigidTransform::new(last.obj_quat, last.obj_pos);
    let base = free_base_dof(chain);
    let mut frames = reference.frames.clone();
    for i in 1..=k {
        let s = c::<T>(i as f64) / c(k as f64);
        let pos = last.obj_pos.lerp(new_target_pos, s);
        let quat = last.obj_quat.slerp(new_target_quat, s);
        // World transform that carries the final object pose to this
        // interpolated pose; the hand rides along rigidly.
        let carry = RigidTransform::new(quat, pos).compose(&last_pose.inverse());
        frames.push(ReferenceFrame {
            q: carry_hand_frame(&last, &carry, base),
            tips: last.tips.iter().map(|&p| carry.apply(p)).collect(),
            obj_pos: pos,
            obj_quat: quat,
        });
    }
    ReferenceTrajectory::new(
        frames,
        reference.pre_grasp_len,
        new_target_pos,
        new_target_quat,
    )
}

/// One sampled augmentation: a relocation delta and, when the spec enables
/// it, a displaced target pose to interpolate toward.
#[derive(Clone, Copy, Debug)]
pub struct SampledAugmentation<T: Real> {
    pub delta: PoseDelta<T>,
    pub new_target: Option<(Vec3<T>, Quat<T>)>,
}

/// Draws an augmentation uniformly from the spec's ranges. The target
/// displacement is applied to the reference target after relocation.
pub fn sample_augmentation<T: Real>(
    spec: &AugmentSpec<T>,
    reference: &ReferenceTrajectory<T>,
    rng: &mut ChaCha8Rng,
) -> SampledAugmentation<T> {
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (T, T)| -> T {
        if lo == hi {
            lo
        } else {
            c::<T>(rng.gen_range(to_f64(lo)..to_f64(hi)))
        }
    };
    let delta = PoseDelta {
        dx: uniform(rng, spec.translation_x),
        dy: uniform(rng, spec.translation_y),
        yaw: uniform(rng, spec.z_rotation),
    };
    let new_target = if spec.target_displacement > T::zero() {
        let d = to_f64(spec.target_displacement);
        let g = delta.world_transform(reference.frames[0].obj_pos);
        let base_target = g.apply(reference.target_pos);
        let shift = Vec3::new(
            c(rng.gen_range(-d..d)),
            c(rng.gen_range(-d..d)),
            T::zero(),
        );
        Some((base_target + shift, (g.rotation * reference.target_quat).normalized()))
    } else {
        None
    };
    SampledAugmentation { delta, new_target }
}

/// Relocates the reference and, when sampled, extends it toward the new
/// target.
pub fn apply_augmentation<T: Real>(
    chain: &KinematicChain<T>,
    reference: &ReferenceTrajectory<T>,
    sample: &SampledAugmentation<T>,
    interpolation_frames: usize,
) -> Result<ReferenceTrajectory<T>> {
    let moved = transform_reference(chain, reference, &sample.delta);
    match sample.new_target {
        Some((pos, quat)) => interpolate_target(chain, &moved, pos, quat, interpolation_frames),
        None => Ok(moved),
    }
}
