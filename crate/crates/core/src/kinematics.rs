//! Configurable kinematic hand model.
//!
//! A chain is an ordered list of links, each attached to an earlier link by a
//! fixed offset and a joint. Free-base joints contribute six degrees of
//! freedom ordered as three translations followed by three exponential-map
//! rotation parameters. Hand topology is data: chains load from a JSON
//! description, and [`desk_hand`] ships a default 18-DoF four-finger hand.

use serde::{Deserialize, Serialize};

use crate::math::{DMat, Mat3, Quat, RigidTransform, Vec3};
use crate::scalar::{c, Real};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    Revolute,
    Prismatic,
    /// Six-DoF floating attachment: translation (x, y, z) then an
    /// exponential-map rotation vector.
    FreeBase,
    /// Zero-DoF attachment used for named frames such as fingertips.
    Fixed,
}

impl JointType {
    pub fn dof(self) -> usize {
        match self {
            JointType::Revolute | JointType::Prismatic => 1,
            JointType::FreeBase => 6,
            JointType::Fixed => 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Link<T: Real> {
    pub name: String,
    /// Index of the parent link; `None` only for the first link.
    pub parent: Option<usize>,
    /// Fixed transform from the parent frame to this link's joint frame.
    pub offset: RigidTransform<T>,
    /// Joint axis in the joint frame (unit). Ignored for free-base/fixed.
    pub axis: Vec3<T>,
    pub joint: JointType,
}

/// Per-DoF limits; components may be infinite for unbounded DoF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limit<T: Real> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> Limit<T> {
    pub fn unbounded() -> Self {
        Self {
            lower: T::neg_infinity(),
            upper: T::infinity(),
        }
    }
}

/// Joint configuration: one value per actuated DoF, radians or meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointConfig<T: Real> {
    pub values: Vec<T>,
}

impl<T: Real> JointConfig<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dof: usize) -> Self {
        Self {
            values: vec![T::zero(); dof],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

#[derive(Clone, Debug)]
pub struct KinematicChain<T: Real> {
    pub links: Vec<Link<T>>,
    /// One entry per DoF, ordered by link then by DoF within the joint.
    pub limits: Vec<Limit<T>>,
    pub palm: usize,
    pub fingertips: Vec<usize>,
    /// First DoF index of each link's joint.
    dof_offsets: Vec<usize>,
    dof: usize,
}

impl<T: Real> KinematicChain<T> {
    pub fn new(
        links: Vec<Link<T>>,
        limits: Vec<Limit<T>>,
        palm: usize,
        fingertips: Vec<usize>,
    ) -> Result<Self> {
        let mut dof_offsets = Vec::with_capacity(links.len());
        let mut dof = 0;
        for (i, link) in links.iter().enumerate() {
            match link.parent {
                None if i != 0 => {
                    return Err(Error::invalid(format!(
                        "link '{}' has no parent but is not the root",
                        link.name
                    )))
                }
                Some(p) if p >= i => {
                    return Err(Error::invalid(format!(
                        "link '{}' parent {} is not earlier in the list",
                        link.name, p
                    )))
                }
                _ => {}
            }
            if link.joint != JointType::FreeBase && link.joint != JointType::Fixed {
                let n = link.axis.norm();
                if !(n.is_finite() && (n - T::one()).abs() < c(1e-6)) {
                    return Err(Error::invalid(format!(
                        "link '{}' joint axis is not unit length",
                        link.name
                    )));
                }
            }
            dof_offsets.push(dof);
            dof += link.joint.dof();
        }
        if limits.len() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                got: limits.len(),
            });
        }
        for (i, l) in limits.iter().enumerate() {
            if l.lower > l.upper {
                return Err(Error::invalid(format!("limit {i} has lower > upper")));
            }
        }
        if palm >= links.len() {
            return Err(Error::invalid("palm link id out of range"));
        }
        if fingertips.is_empty() {
            return Err(Error::invalid("chain needs at least one fingertip"));
        }
        if fingertips.iter().any(|&f| f >= links.len()) {
            return Err(Error::invalid("fingertip link id out of range"));
        }
        Ok(Self {
            links,
            limits,
            palm,
            fingertips,
            dof_offsets,
            dof,
        })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Number of fingertips `j`.
    pub fn num_fingertips(&self) -> usize {
        self.fingertips.len()
    }

    pub fn dof_offset(&self, link: usize) -> usize {
        self.dof_offsets[link]
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    fn check_dof(&self, q: &JointConfig<T>) -> Result<()> {
        if q.len() != self.dof {
            return Err(Error::DimensionMismatch {
                expected: self.dof,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Joint motion transform for one link at the given DoF slice.
    fn joint_motion(&self, link: &Link<T>, q: &[T]) -> RigidTransform<T> {
        match link.joint {
            JointType::Revolute => {
                RigidTransform::from_rotation(Quat::from_axis_angle(link.axis, q[0]))
            }
            JointType::Prismatic => RigidTransform::from_translation(link.axis * q[0]),
            JointType::FreeBase => RigidTransform::new(
                Quat::from_rotvec(Vec3::new(q[3], q[4], q[5])),
                Vec3::new(q[0], q[1], q[2]),
            ),
            JointType::Fixed => RigidTransform::identity(),
        }
    }

    /// World pose of every link.
    pub fn forward_kinematics(&self, q: &JointConfig<T>) -> Result<Vec<RigidTransform<T>>> {
        self.check_dof(q)?;
        let mut poses: Vec<RigidTransform<T>> = Vec::with_capacity(self.links.len());
        for (i, link) in self.links.iter().enumerate() {
            let off = self.dof_offsets[i];
            let motion = self.joint_motion(link, &q.values[off..off + link.joint.dof()]);
            let local = link.offset.compose(&motion);
            let pose = match link.parent {
                Some(p) => poses[p].compose(&local),
                None => local,
            };
            poses.push(pose);
        }
        Ok(poses)
    }

    /// World positions of the fingertip frames.
    pub fn fingertip_positions(&self, q: &JointConfig<T>) -> Result<Vec<Vec3<T>>> {
        let poses = self.forward_kinematics(q)?;
        Ok(self.fingertips.iter().map(|&i| poses[i].translation).collect())
    }

    /// Componentwise clamp into the joint limits. Idempotent.
    pub fn clamp_to_limits(&self, q: &JointConfig<T>) -> JointConfig<T> {
        let values = q
            .values
            .iter()
            .zip(&self.limits)
            .map(|(&v, l)| v.max(l.lower).min(l.upper))
            .collect();
        JointConfig::new(values)
    }

    /// Midpoint of the motion limits per DoF; unbounded DoF map to zero.
    pub fn mean_pose(&self) -> JointConfig<T> {
        let values = self
            .limits
            .iter()
            .map(|l| {
                if l.lower.is_finite() && l.upper.is_finite() {
                    (l.lower + l.upper) * c(0.5)
                } else {
                    T::zero()
                }
            })
            .collect();
        JointConfig::new(values)
    }

    /// Positional Jacobian of the world point `point` carried by `link`:
    /// a 3 x dof matrix of `d point / d q`.
    pub fn point_jacobian(
        &self,
        q: &JointConfig<T>,
        poses: &[RigidTransform<T>],
        link: usize,
        point: Vec3<T>,
    ) -> DMat<T> {
        self.point_jacobian_impl(q, poses, link, point, false)
    }

    /// Like [`point_jacobian`](Self::point_jacobian), but free-base rotation
    /// columns map world angular velocity instead of exponential-map
    /// parameter rates. This is the Jacobian matching a simulator that
    /// integrates the base on the rotation group.
    pub fn point_velocity_jacobian(
        &self,
        q: &JointConfig<T>,
        poses: &[RigidTransform<T>],
        link: usize,
        point: Vec3<T>,
    ) -> DMat<T> {
        self.point_jacobian_impl(q, poses, link, point, true)
    }

    fn point_jacobian_impl(
        &self,
        q: &JointConfig<T>,
        poses: &[RigidTransform<T>],
        link: usize,
        point: Vec3<T>,
        velocity_coords: bool,
    ) -> DMat<T> {
        let mut jac = DMat::zeros(3, self.dof);
        let mut cur = Some(link);
        while let Some(i) = cur {
            let l = &self.links[i];
            let off = self.dof_offsets[i];
            // Pose of the joint frame before its own motion.
            let pre = match l.parent {
                Some(p) => poses[p].compose(&l.offset),
                None => l.offset,
            };
            match l.joint {
                JointType::Revolute => {
                    let axis_w = pre.apply_vector(l.axis);
                    let col = axis_w.cross(point - poses[i].translation);
                    set_col(&mut jac, off, col);
                }
                JointType::Prismatic => {
                    set_col(&mut jac, off, pre.apply_vector(l.axis));
                }
                JointType::FreeBase => {
                    let r = pre.rotation.to_matrix();
                    for k in 0..3 {
                        set_col(&mut jac, off + k, Vec3::new(r.rows[0][k], r.rows[1][k], r.rows[2][k]));
                    }
                    let lever = point - poses[i].translation;
                    if velocity_coords {
                        for k in 0..3 {
                            let mut e = Vec3::zero();
                            e[k] = T::one();
                            set_col(&mut jac, off + 3 + k, pre.apply_vector(e).cross(lever));
                        }
                    } else {
                        let w = Vec3::new(q.values[off + 3], q.values[off + 4], q.values[off + 5]);
                        let jl = so3_left_jacobian(w);
                        for k in 0..3 {
                            let e = Vec3::new(jl.rows[0][k], jl.rows[1][k], jl.rows[2][k]);
                            let col = pre.apply_vector(e).cross(lever);
                            set_col(&mut jac, off + 3 + k, col);
                        }
                    }
                }
                JointType::Fixed => {}
            }
            cur = l.parent;
        }
        jac
    }
}

fn set_col<T: Real>(m: &mut DMat<T>, col: usize, v: Vec3<T>) {
    *m.at_mut(0, col) = v.x;
    *m.at_mut(1, col) = v.y;
    *m.at_mut(2, col) = v.z;
}

/// Left Jacobian of SO(3): maps perturbations of the rotation vector to
/// world-frame angular displacements, `exp(w + d) ≈ exp((J_l d)^) exp(w)`.
fn so3_left_jacobian<T: Real>(w: Vec3<T>) -> Mat3<T> {
    let theta = w.norm();
    let sk = Mat3::skew(w);
    let sk2 = sk.mul_mat(&sk);
    if theta < c(1e-5) {
        let half = c::<T>(0.5);
        let sixth = T::one() / c(6.0);
        return Mat3::identity().add(&sk.scale(half)).add(&sk2.scale(sixth));
    }
    let t2 = theta * theta;
    let a = (T::one() - theta.cos()) / t2;
    let b = (theta - theta.sin()) / (t2 * theta);
    Mat3::identity().add(&sk.scale(a)).add(&sk2.scale(b))
}

// ---------------------------------------------------------------------------
// Chain description files

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct OffsetSpec<T: Real> {
    translation: [T; 3],
    /// (w, x, y, z)
    quaternion: [T; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct LinkSpec<T: Real> {
    name: String,
    parent: Option<usize>,
    offset: OffsetSpec<T>,
    #[serde(default)]
    axis: Option<[T; 3]>,
    joint: JointType,
    /// One `[lower, upper]` entry per DoF; `null` means unbounded.
    #[serde(default)]
    limits: Vec<Option<[T; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ChainSpec<T: Real> {
    links: Vec<LinkSpec<T>>,
    palm: String,
    fingertips: Vec<String>,
}

/// Parses a chain description. Rejects cyclic or misordered parents,
/// malformed limits, and unknown palm/fingertip names.
pub fn chain_from_json<T: Real>(json: &str) -> Result<KinematicChain<T>> {
    let spec: ChainSpec<T> =
        serde_json::from_str(json).map_err(|e| Error::parse("chain description", e))?;
    let mut links = Vec::with_capacity(spec.links.len());
    let mut limits = Vec::new();
    for ls in &spec.links {
        let rotation = Quat::from_array(ls.offset.quaternion);
        if !rotation.is_unit(c(1e-6)) {
            return Err(Error::invalid(format!(
                "link '{}' offset quaternion is not unit length",
                ls.name
            )));
        }
        let axis = ls
            .axis
            .map(|a| Vec3::from_slice(&a))
            .unwrap_or_else(Vec3::unit_z);
        let joint = ls.joint;
        let ndof = joint.dof();
        if ls.limits.len() != ndof {
            return Err(Error::invalid(format!(
                "link '{}' declares {} limit entries for a {}-DoF joint",
                ls.name,
                ls.limits.len(),
                ndof
            )));
        }
        for lim in &ls.limits {
            limits.push(match lim {
                Some([lo, hi]) => Limit {
                    lower: *lo,
                    upper: *hi,
                },
                None => Limit::unbounded(),
            });
        }
        links.push(Link {
            name: ls.name.clone(),
            parent: ls.parent,
            offset: RigidTransform::new(rotation, Vec3::from_slice(&ls.offset.translation)),
            axis,
            joint,
        });
    }
    let palm_matches: Vec<usize> = links
        .iter()
        .enumerate()
        .filter(|(_, l)| l.name == spec.palm)
        .map(|(i, _)| i)
        .collect();
    if palm_matches.len() != 1 {
        return Err(Error::invalid(format!(
            "chain must name exactly one palm link, found {} matches for '{}'",
            palm_matches.len(),
            spec.palm
        )));
    }
    let mut tips = Vec::with_capacity(spec.fingertips.len());
    for name in &spec.fingertips {
        let idx = links
            .iter()
            .position(|l| &l.name == name)
            .ok_or_else(|| Error::invalid(format!("fingertip link '{name}' not found")))?;
        tips.push(idx);
    }
    KinematicChain::new(links, limits, palm_matches[0], tips)
}

pub fn chain_from_file<T: Real>(path: &std::path::Path) -> Result<KinematicChain<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    chain_from_json(&text)
}

const DESK_HAND_JSON: &str = include_str!("../assets/desk_hand.json");

/// Default hand: 6-DoF free base plus four fingers of three revolute joints
/// each (18 DoF, 4 fingertips). Three fingers oppose a thumb across the palm.
pub fn desk_hand<T: Real>() -> KinematicChain<T> {
    chain_from_json(DESK_HAND_JSON).expect("built-in desk hand is valid")
}
