//! Deterministic rigid-body world: a table plane, one free rigid object, and
//! a joint-position-controlled hand.
//!
//! Contacts use a point-penalty spring-damper with Coulomb-capped tangential
//! force. Hand link geometry is a set of collision spheres per link; contact
//! reactions map into joint space through point Jacobians, so the force pair
//! between hand and object is exactly equal and opposite.
//!
//! The free base integrates geometrically: its velocity coordinates are the
//! world-frame linear and angular velocity, and its rotation advances on the
//! rotation group before being logged back into the exponential-map joint
//! coordinates. This keeps the dynamics equivariant under world rotations
//! about the vertical axis.

mod camera;
mod shapes;

pub use camera::{render_point_cloud, CameraSpec};
pub use shapes::BodyShape;

use serde::{Deserialize, Serialize};

use crate::kinematics::{JointConfig, JointType, KinematicChain};
use crate::math::{Mat3, Quat, RigidTransform, Vec3};
use crate::scalar::{c, to_f64, Real};
use crate::{Error, Result};

/// A collision sphere attached to a hand link.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CollisionSphere<T: Real> {
    pub link: String,
    pub offset: Vec3<T>,
    pub radius: T,
}

/// Simulation parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct SimConfig<T: Real> {
    pub timestep: T,
    /// Physics sub-steps per policy step.
    pub decimation: usize,
    pub gravity: Vec3<T>,
    pub contact_stiffness: T,
    pub contact_damping: T,
    pub friction: T,
    pub object_mass: T,
    pub object_shape: BodyShape<T>,
    pub table_height: T,
    /// Lift detection margin above the table.
    pub lift_epsilon: T,
    /// PD gains per DoF group: (base linear, base angular, finger).
    pub kp: (T, T, T),
    pub kd: (T, T, T),
    /// Effective inertia per DoF group.
    pub joint_inertia: (T, T, T),
    pub hand_collision: Vec<CollisionSphere<T>>,
    pub hand_table_collision: bool,
    pub camera: CameraSpec<T>,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            timestep: c(0.002),
            decimation: 10,
            gravity: Vec3::new(T::zero(), T::zero(), c(-9.81)),
            contact_stiffness: c(5e3),
            contact_damping: c(5.0),
            friction: c(1.0),
            object_mass: c(0.1),
            object_shape: BodyShape::box_shape(Vec3::new(c(0.022), c(0.022), c(0.045))),
            table_height: T::zero(),
            lift_epsilon: c(0.02),
            kp: (c(300.0), c(10.0), c(2.0)),
            kd: (c(25.0), c(0.8), c(0.15)),
            joint_inertia: (c(0.5), c(0.01), c(0.004)),
            hand_collision: Vec::new(),
            hand_table_collision: true,
            camera: CameraSpec::default(),
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.timestep > T::zero()) {
            return Err(Error::invalid("timestep must be positive"));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation must be at least 1"));
        }
        if !(self.contact_stiffness > T::zero() && self.contact_damping > T::zero()) {
            return Err(Error::invalid("contact parameters must be positive"));
        }
        if !(self.object_mass > T::zero()) {
            return Err(Error::invalid("object mass must be positive"));
        }
        if !self.object_shape.validate() {
            return Err(Error::invalid("object shape has non-positive dimensions"));
        }
        for s in &self.hand_collision {
            if !(s.radius > T::zero()) {
                return Err(Error::invalid(format!(
                    "collision sphere on '{}' has non-positive radius",
                    s.link
                )));
            }
        }
        self.camera.validate()
    }

    /// Collision spheres for the default desk hand.
    pub fn desk_hand_collision() -> Vec<CollisionSphere<T>> {
        let mut spheres = Vec::new();
        for dy in [-0.03, 0.0, 0.03] {
            spheres.push(CollisionSphere {
                link: "palm".into(),
                offset: Vec3::new(T::zero(), c(dy), T::zero()),
                radius: c(0.03),
            });
        }
        for finger in ["f0", "f1", "f2", "th"] {
            let lens = if finger == "th" {
                [0.050, 0.040, 0.030]
            } else {
                [0.045, 0.035, 0.030]
            };
            for (seg, len) in ["prox", "mid", "dist"].iter().zip(lens) {
                for frac in [0.35, 0.8] {
                    spheres.push(CollisionSphere {
                        link: format!("{finger}_{seg}"),
                        offset: Vec3::new(T::zero(), T::zero(), c(-len * frac)),
                        radius: if *seg == "dist" { c(0.010) } else { c(0.011) },
                    });
                }
            }
            spheres.push(CollisionSphere {
                link: format!("{finger}_tip"),
                offset: Vec3::zero(),
                radius: c(0.010),
            });
        }
        spheres
    }
}

/// A single penalty contact.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ContactPoint<T: Real> {
    /// Hand link name, or "object" for object-table contacts.
    pub link: String,
    pub position: Vec3<T>,
    pub depth: T,
    /// Unit normal pointing from the other body toward the named body.
    pub normal: Vec3<T>,
    /// True when the contact is against the free object (as opposed to the
    /// table plane).
    pub against_object: bool,
}

/// Snapshot of the world.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WorldState<T: Real> {
    pub q: JointConfig<T>,
    /// Per-DoF velocities. For the free base these are the world-frame
    /// linear and angular velocity, not coordinate time-derivatives.
    pub qd: Vec<T>,
    pub object_pose: RigidTransform<T>,
    pub object_linvel: Vec3<T>,
    pub object_angvel: Vec3<T>,
    pub contacts: Vec<ContactPoint<T>>,
    pub time_index: usize,
}

/// Owns the immutable scene description; states are passed in and out.
#[derive(Clone, Debug)]
pub struct Simulator<T: Real> {
    pub chain: KinematicChain<T>,
    pub config: SimConfig<T>,
    /// (link index, local offset, radius) per collision sphere.
    spheres: Vec<(usize, Vec3<T>, T)>,
    free_base_offset: Option<usize>,
    inertia_body: Vec3<T>,
    dof_inertia: Vec<T>,
    dof_kp: Vec<T>,
    dof_kd: Vec<T>,
}

struct Forces<T: Real> {
    object_force: Vec3<T>,
    object_torque: Vec3<T>,
    joint_torque: Vec<T>,
    /// Total contact force applied to hand links by the object.
    hand_from_object: Vec3<T>,
    /// Total contact force applied to the object by hand links.
    object_from_hand: Vec3<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(chain: KinematicChain<T>, config: SimConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut spheres = Vec::with_capacity(config.hand_collision.len());
        for s in &config.hand_collision {
            let link = chain
                .link_index(&s.link)
                .ok_or_else(|| Error::invalid(format!("collision link '{}' not in chain", s.link)))?;
            spheres.push((link, s.offset, s.radius));
        }
        let inertia_body = config.object_shape.inertia_diagonal(config.object_mass);
        let mut free_base_offset = None;
        for (i, link) in chain.links.iter().enumerate() {
            if link.joint == JointType::FreeBase {
                if free_base_offset.is_some() {
                    return Err(Error::invalid("at most one free-base joint is supported"));
                }
                let rot_err = link.offset.rotation.angular_distance(Quat::identity());
                if rot_err > c(1e-9) {
                    return Err(Error::invalid(
                        "free-base link offsets must not rotate; the base integrates in the world frame",
                    ));
                }
                free_base_offset = Some(chain.dof_offset(i));
            }
        }
        let mut dof_inertia = Vec::with_capacity(chain.dof());
        let mut dof_kp = Vec::with_capacity(chain.dof());
        let mut dof_kd = Vec::with_capacity(chain.dof());
        for (i, link) in chain.links.iter().enumerate() {
            let _ = i;
            match link.joint {
                JointType::FreeBase => {
                    for k in 0..6 {
                        let lin = k < 3;
                        dof_inertia.push(if lin {
                            config.joint_inertia.0
                        } else {
                            config.joint_inertia.1
                        });
                        dof_kp.push(if lin { config.kp.0 } else { config.kp.1 });
                        dof_kd.push(if lin { config.kd.0 } else { config.kd.1 });
                    }
                }
                JointType::Revolute | JointType::Prismatic => {
                    dof_inertia.push(config.joint_inertia.2);
                    dof_kp.push(config.kp.2);
                    dof_kd.push(config.kd.2);
                }
                JointType::Fixed => {}
            }
        }
        Ok(Self {
            chain,
            config,
            spheres,
            free_base_offset,
            inertia_body,
            dof_inertia,
            dof_kp,
            dof_kd,
        })
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    /// Initializes a world. The object must not start more than 1 mm inside
    /// the table.
    pub fn reset(&self, object_pose: RigidTransform<T>, hand_q: &JointConfig<T>) -> Result<WorldState<T>> {
        if hand_q.len() != self.chain.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.chain.dof(),
                got: hand_q.len(),
            });
        }
        if !object_pose.is_finite() || !hand_q.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("reset state".into()));
        }
        let rot = object_pose.rotation.to_matrix();
        let lowest = self
            .config
            .object_shape
            .lowest_point_z(&rot, object_pose.translation);
        if lowest < self.config.table_height - c(1e-3) {
            return Err(Error::invalid(format!(
                "object starts {} m inside the table",
                to_f64(self.config.table_height - lowest)
            )));
        }
        let q = self.chain.clamp_to_limits(hand_q);
        let mut state = WorldState {
            qd: vec![T::zero(); self.chain.dof()],
            q,
            object_pose: RigidTransform::new(object_pose.rotation, object_pose.translation),
            object_linvel: Vec3::zero(),
            object_angvel: Vec3::zero(),
            contacts: Vec::new(),
            time_index: 0,
        };
        state.contacts = self.collect_contacts(&state);
        Ok(state)
    }

    /// Advances one policy step (`decimation` physics sub-steps) toward the
    /// PD targets in `action`.
    pub fn step(&self, state: &WorldState<T>, action: &[T]) -> Result<WorldState<T>> {
        if action.len() != self.chain.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.chain.dof(),
                got: action.len(),
            });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action".into()));
        }
        let target = self
            .chain
            .clamp_to_limits(&JointConfig::new(action.to_vec()));
        let mut next = state.clone();
        for _ in 0..self.config.decimation {
            self.substep(&mut next, &target);
        }
        next.contacts = self.collect_contacts(&next);
        next.time_index = state.time_index + 1;
        Ok(next)
    }

    fn substep(&self, state: &mut WorldState<T>, target: &JointConfig<T>) {
        let dt = self.config.timestep;
        let forces = self.compute_forces(state, target);

        // Object: semi-implicit Euler with gyroscopic torque.
        let m = self.config.object_mass;
        let r = state.object_pose.rotation.to_matrix();
        let i_world = r
            .mul_mat(&Mat3::diagonal(self.inertia_body))
            .mul_mat(&r.transpose());
        let ang_mom = i_world.mul_vec(state.object_angvel);
        let gyro = state.object_angvel.cross(ang_mom);
        let ang_acc = i_world.inverse().mul_vec(forces.object_torque - gyro);
        state.object_linvel += forces.object_force / m * dt;
        state.object_angvel += ang_acc * dt;
        state.object_pose.translation += state.object_linvel * dt;
        let dq = Quat::from_rotvec(state.object_angvel * dt);
        state.object_pose.rotation = (dq * state.object_pose.rotation).normalized();

        // Hand joints: per-DoF semi-implicit Euler; the free-base rotation
        // advances on the group.
        let free_base = self.free_base_offset;
        for d in 0..self.chain.dof() {
            let acc = forces.joint_torque[d] / self.dof_inertia[d];
            state.qd[d] += acc * dt;
        }
        for d in 0..self.chain.dof() {
            let is_base_rot = free_base.map_or(false, |off| d >= off + 3 && d < off + 6);
            if !is_base_rot {
                state.q.values[d] += state.qd[d] * dt;
            }
        }
        if let Some(off) = free_base {
            let w = Vec3::new(
                state.q.values[off + 3],
                state.q.values[off + 4],
                state.q.values[off + 5],
            );
            let omega = Vec3::new(state.qd[off + 3], state.qd[off + 4], state.qd[off + 5]);
            let rot = (Quat::from_rotvec(omega * dt) * Quat::from_rotvec(w)).normalized();
            let w_new = rot.to_rotvec();
            state.q.values[off + 3] = w_new.x;
            state.q.values[off + 4] = w_new.y;
            state.q.values[off + 5] = w_new.z;
        }
        // Joint limits act as hard stops: clamp and kill outward velocity.
        for d in 0..self.chain.dof() {
            let l = &self.chain.limits[d];
            if state.q.values[d] < l.lower {
                state.q.values[d] = l.lower;
                state.qd[d] = state.qd[d].max(T::zero());
            } else if state.q.values[d] > l.upper {
                state.q.values[d] = l.upper;
                state.qd[d] = state.qd[d].min(T::zero());
            }
        }
    }

    /// Velocity of the material point of `link` at world position `p`.
    fn link_point_velocity(
        &self,
        state: &WorldState<T>,
        poses: &[RigidTransform<T>],
        link: usize,
        p: Vec3<T>,
    ) -> Vec3<T> {
        let jac = self.chain.point_velocity_jacobian(&state.q, poses, link, p);
        let mut v = Vec3::zero();
        for d in 0..self.chain.dof() {
            v.x += jac.at(0, d) * state.qd[d];
            v.y += jac.at(1, d) * state.qd[d];
            v.z += jac.at(2, d) * state.qd[d];
        }
        v
    }

    fn object_point_velocity(&self, state: &WorldState<T>, p: Vec3<T>) -> Vec3<T> {
        state.object_linvel + state.object_angvel.cross(p - state.object_pose.translation)
    }

    /// Spring-damper normal force with Coulomb-capped tangential friction.
    /// `normal` points from the surface toward the probing body; `v_rel` is
    /// the probing body's velocity relative to the surface point.
    fn penalty_force(&self, depth: T, normal: Vec3<T>, v_rel: Vec3<T>) -> Vec3<T> {
        let k = self.config.contact_stiffness;
        let cd = self.config.contact_damping;
        let vn = v_rel.dot(normal);
        let fn_mag = (k * depth - cd * vn).max(T::zero());
        let mut force = normal * fn_mag;
        let vt = v_rel - normal * vn;
        let vt_norm = vt.norm();
        if vt_norm > c(1e-9) {
            let cap = self.config.friction * fn_mag;
            let mag = (cd * vt_norm).min(cap);
            force -= vt * (mag / vt_norm);
        }
        force
    }

    fn compute_forces(&self, state: &WorldState<T>, target: &JointConfig<T>) -> Forces<T> {
        let poses = self
            .chain
            .forward_kinematics(&state.q)
            .expect("state q has chain dof");
        let mut joint_torque = vec![T::zero(); self.chain.dof()];
        for d in 0..self.chain.dof() {
            joint_torque[d] = self.dof_kp[d] * (target.values[d] - state.q.values[d])
                - self.dof_kd[d] * state.qd[d];
        }
        // The base rotation error lives on the rotation group, not in
        // coordinate differences.
        if let Some(off) = self.free_base_offset {
            let w = Vec3::new(
                state.q.values[off + 3],
                state.q.values[off + 4],
                state.q.values[off + 5],
            );
            let wt = Vec3::new(
                target.values[off + 3],
                target.values[off + 4],
                target.values[off + 5],
            );
            let err = (Quat::from_rotvec(wt) * Quat::from_rotvec(w).conjugate())
                .normalized()
                .to_rotvec();
            for k in 0..3 {
                joint_torque[off + 3 + k] =
                    self.dof_kp[off + 3 + k] * err[k] - self.dof_kd[off + 3 + k] * state.qd[off + 3 + k];
            }
        }

        let mut object_force = self.config.gravity * self.config.object_mass;
        let mut object_torque = Vec3::zero();
        let mut hand_from_object = Vec3::zero();
        let mut object_from_hand = Vec3::zero();
        let obj_inv = state.object_pose.inverse();

        for &(link, offset, radius) in &self.spheres {
            let center = poses[link].apply(offset);
            // Hand sphere vs object.
            let local = obj_inv.apply(center);
            let (dist, n_local) = self.config.object_shape.signed_distance_local(local);
            let depth = radius - dist;
            if depth > T::zero() {
                let normal = state.object_pose.apply_vector(n_local);
                let contact_pt = center - normal * dist;
                let v_hand = self.link_point_velocity(state, &poses, link, contact_pt);
                let v_obj = self.object_point_velocity(state, contact_pt);
                let f_hand = self.penalty_force(depth, normal, v_hand - v_obj);
                hand_from_object += f_hand;
                object_from_hand -= f_hand;
                object_force -= f_hand;
                object_torque -= (contact_pt - state.object_pose.translation).cross(f_hand);
                let jac = self.chain.point_velocity_jacobian(&state.q, &poses, link, contact_pt);
                for d in 0..self.chain.dof() {
                    joint_torque[d] += jac.at(0, d) * f_hand.x
                        + jac.at(1, d) * f_hand.y
                        + jac.at(2, d) * f_hand.z;
                }
            }
            // Hand sphere vs table.
            if self.config.hand_table_collision {
                let depth = self.config.table_height - (center.z - radius);
                if depth > T::zero() {
                    let normal = Vec3::unit_z();
                    let contact_pt = Vec3::new(center.x, center.y, self.config.table_height);
                    let v_hand = self.link_point_velocity(state, &poses, link, contact_pt);
                    let f_hand = self.penalty_force(depth, normal, v_hand);
                    let jac = self.chain.point_velocity_jacobian(&state.q, &poses, link, contact_pt);
                    for d in 0..self.chain.dof() {
                        joint_torque[d] += jac.at(0, d) * f_hand.x
                            + jac.at(1, d) * f_hand.y
                            + jac.at(2, d) * f_hand.z;
                    }
                }
            }
        }

        // Object vs table.
        for (local, pad) in self.config.object_shape.table_support_points() {
            let p = state.object_pose.apply(local);
            let depth = self.config.table_height - (p.z - pad);
            if depth > T::zero() {
                let normal = Vec3::unit_z();
                let contact_pt = Vec3::new(p.x, p.y, self.config.table_height);
                let v_obj = self.object_point_velocity(state, contact_pt);
                let f_obj = self.penalty_force(depth, normal, v_obj);
                object_force += f_obj;
                object_torque += (contact_pt - state.object_pose.translation).cross(f_obj);
            }
        }

        Forces {
            object_force,
            object_torque,
            joint_torque,
            hand_from_object,
            object_from_hand,
        }
    }

    /// Diagnostic: total hand<->object contact force pair at a state. The two
    /// components sum to zero by construction of the penalty model.
    pub fn contact_force_pair(&self, state: &WorldState<T>) -> (Vec3<T>, Vec3<T>) {
        let target = state.q.clone();
        let f = self.compute_forces(state, &target);
        (f.object_from_hand, f.hand_from_object)
    }

    /// Contacts at a state, for reward queries and inspection.
    pub fn collect_contacts(&self, state: &WorldState<T>) -> Vec<ContactPoint<T>> {
        let poses = self
            .chain
            .forward_kinematics(&state.q)
            .expect("state q has chain dof");
        let mut contacts = Vec::new();
        let obj_inv = state.object_pose.inverse();
        for &(link, offset, radius) in &self.spheres {
            let center = poses[link].apply(offset);
            let local = obj_inv.apply(center);
            let (dist, n_local) = self.config.object_shape.signed_distance_local(local);
            let depth = radius - dist;
            if depth > T::zero() {
                let normal = state.object_pose.apply_vector(n_local);
                contacts.push(ContactPoint {
                    link: self.chain.links[link].name.clone(),
                    position: center - normal * dist,
                    depth,
                    normal,
                    against_object: true,
                });
            }
            if self.config.hand_table_collision {
                let depth = self.config.table_height - (center.z - radius);
                if depth > T::zero() {
                    contacts.push(ContactPoint {
                        link: self.chain.links[link].name.clone(),
                        position: Vec3::new(center.x, center.y, self.config.table_height),
                        depth,
                        normal: Vec3::unit_z(),
                        against_object: false,
                    });
                }
            }
        }
        for (local, pad) in self.config.object_shape.table_support_points() {
            let p = state.object_pose.apply(local);
            let depth = self.config.table_height - (p.z - pad);
            if depth > T::zero() {
                contacts.push(ContactPoint {
                    link: "object".into(),
                    position: Vec3::new(p.x, p.y, self.config.table_height),
                    depth,
                    normal: Vec3::unit_z(),
                    against_object: false,
                });
            }
        }
        contacts
    }

    /// Number of fingertip links with at least one contact against the
    /// object, in `[0, j]`.
    pub fn fingertips_in_contact(&self, state: &WorldState<T>) -> usize {
        self.chain
            .fingertips
            .iter()
            .filter(|&&tip| {
                let name = &self.chain.links[tip].name;
                state
                    .contacts
                    .iter()
                    .any(|ct| ct.against_object && &ct.link == name)
            })
            .count()
    }

    /// True iff the object's lowest point clears the table by more than the
    /// configured margin (strict inequality).
    pub fn is_lifted(&self, state: &WorldState<T>) -> bool {
        let rot = state.object_pose.rotation.to_matrix();
        let lowest = self
            .config
            .object_shape
            .lowest_point_z(&rot, state.object_pose.translation);
        lowest > self.config.table_height + self.config.lift_epsilon
    }

    /// World-frame point cloud from the configured depth camera.
    pub fn render_point_cloud(
        &self,
        state: &WorldState<T>,
        camera: &CameraSpec<T>,
        n_points: usize,
        seed: u64,
    ) -> Result<Vec<Vec3<T>>> {
        let poses = self.chain.forward_kinematics(&state.q)?;
        let mut primitives: Vec<(BodyShape<T>, RigidTransform<T>)> = Vec::new();
        for &(link, offset, radius) in &self.spheres {
            let center = poses[link].apply(offset);
            primitives.push((
                BodyShape::sphere(radius),
                RigidTransform::from_translation(center),
            ));
        }
        primitives.push((self.config.object_shape, state.object_pose));
        camera::render_point_cloud(camera, &primitives, n_points, seed)
    }
}
