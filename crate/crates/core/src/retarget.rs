//! Hand motion retargeting: maps a human hand keypoint trajectory onto robot
//! joint angles by sequential damped Gauss-Newton solves of a regularized
//! least-squares objective
//!
//! ```text
//!   f(q_t) = sum_j |x_j(q_t) - psi_j|^2 + alpha |q_t - q_{t-1}|^2
//! ```
//!
//! where the sum runs over mapped (human keypoint, robot link) pairs and the
//! second term damps frame-to-frame jumps.

use serde::{Deserialize, Serialize};

use crate::kinematics::{JointConfig, KinematicChain};
use crate::math::{solve_damped_normal, DMat, Vec3};
use crate::scalar::{c, Real};
use crate::{Error, Result};

/// Number of keypoints in the 21-joint hand convention
/// (wrist + 4 joints x 5 fingers).
pub const HAND_KEYPOINTS: usize = 21;

/// Human hand keypoint trajectory in world coordinates.
#[derive(Clone, Debug)]
pub struct HumanHandTrajectory<T: Real> {
    pub frames: Vec<Vec<Vec3<T>>>,
}

impl<T: Real> HumanHandTrajectory<T> {
    /// Validates frame shape, finiteness, and a wrist-motion sanity bound of
    /// 0.5 m between consecutive frames.
    pub fn new(frames: Vec<Vec<Vec3<T>>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("keypoint trajectory has no frames"));
        }
        for (t, f) in frames.iter().enumerate() {
            if f.len() != HAND_KEYPOINTS {
                return Err(Error::DimensionMismatch {
                    expected: HAND_KEYPOINTS,
                    got: f.len(),
                });
            }
            if f.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!("keypoint frame {t}")));
            }
        }
        for t in 1..frames.len() {
            let d = (frames[t][0] - frames[t - 1][0]).norm();
            if d >= c(0.5) {
                return Err(Error::invalid(format!(
                    "wrist jumps {} m between frames {} and {}",
                    d,
                    t - 1,
                    t
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverConfig<T: Real> {
    pub max_iters: usize,
    pub grad_tol: T,
    pub initial_damping: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: c(1e-8),
            initial_damping: c(1e-6),
        }
    }
}

/// Retargeting configuration: keypoint-to-link mapping plus solver knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RetargetConfig<T: Real> {
    /// (human keypoint index, robot link name) pairs.
    pub mapping: Vec<(usize, String)>,
    /// Temporal-regularization weight.
    pub alpha: T,
    #[serde(default)]
    pub solver: SolverConfig<T>,
}

impl<T: Real> Default for RetargetConfig<T> {
    fn default() -> Self {
        Self {
            mapping: default_mapping(),
            alpha: c(4e-3),
            solver: SolverConfig::default(),
        }
    }
}

/// Default pairing for the desk hand: human thumb/index/middle/ring tips and
/// their distal interphalangeal joints onto the four robot fingertip and
/// distal links. The pinky has no robot counterpart and is dropped.
pub fn default_mapping() -> Vec<(usize, String)> {
    vec![
        (4, "th_tip".into()),
        (3, "th_dist".into()),
        (8, "f0_tip".into()),
        (7, "f0_dist".into()),
        (12, "f1_tip".into()),
        (11, "f1_dist".into()),
        (16, "f2_tip".into()),
        (15, "f2_dist".into()),
    ]
}

/// One solved frame of a retargeted trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RetargetedFrame<T: Real> {
    pub q: JointConfig<T>,
    pub residual: T,
    pub converged: bool,
}

/// Robot joint-angle trajectory produced by retargeting.
#[derive(Clone, Debug)]
pub struct RobotTrajectory<T: Real> {
    pub frames: Vec<RetargetedFrame<T>>,
}

impl<T: Real> RobotTrajectory<T> {
    pub fn all_converged(&self) -> bool {
        self.frames.iter().all(|f| f.converged)
    }
}

fn resolve_mapping<T: Real>(
    chain: &KinematicChain<T>,
    mapping: &[(usize, String)],
) -> Result<Vec<(usize, usize)>> {
    mapping
        .iter()
        .map(|(kp, name)| {
            if *kp >= HAND_KEYPOINTS {
                return Err(Error::invalid(format!("keypoint index {kp} out of range")));
            }
            let link = chain
                .link_index(name)
                .ok_or_else(|| Error::invalid(format!("mapped link '{name}' not in chain")))?;
            Ok((*kp, link))
        })
        .collect()
}

/// Least-squares objective for one frame.
pub fn objective<T: Real>(
    chain: &KinematicChain<T>,
    q: &JointConfig<T>,
    q_prev: &JointConfig<T>,
    mapped_links: &[usize],
    targets: &[Vec3<T>],
    alpha: T,
) -> Result<T> {
    if targets.len() != mapped_links.len() {
        return Err(Error::DimensionMismatch {
            expected: mapped_links.len(),
            got: targets.len(),
        });
    }
    let poses = chain.forward_kinematics(q)?;
    let mut f = T::zero();
    for (&link, &target) in mapped_links.iter().zip(targets) {
        f += (poses[link].translation - target).norm_sq();
    }
    let mut reg = T::zero();
    for (a, b) in q.values.iter().zip(&q_prev.values) {
        let d = *a - *b;
        reg += d * d;
    }
    Ok(f + alpha * reg)
}

/// Analytic gradient of [`objective`] via the chain's point Jacobians.
pub fn objective_gradient<T: Real>(
    chain: &KinematicChain<T>,
    q: &JointConfig<T>,
    q_prev: &JointConfig<T>,
    mapped_links: &[usize],
    targets: &[Vec3<T>],
    alpha: T,
) -> Result<Vec<T>> {
    let poses = chain.forward_kinematics(q)?;
    let two = c::<T>(2.0);
    let mut grad = vec![T::zero(); chain.dof()];
    for (&link, &target) in mapped_links.iter().zip(targets) {
        let err = poses[link].translation - target;
        let jac = chain.point_jacobian(q, &poses, link, poses[link].translation);
        for d in 0..chain.dof() {
            grad[d] += two * (jac.at(0, d) * err.x + jac.at(1, d) * err.y + jac.at(2, d) * err.z);
        }
    }
    for ((g, a), b) in grad.iter_mut().zip(&q.values).zip(&q_prev.values) {
        *g += two * alpha * (*a - *b);
    }
    Ok(grad)
}

/// Half-gradient and Gauss-Newton normal matrix at `q`.
fn normal_equations<T: Real>(
    chain: &KinematicChain<T>,
    q: &JointConfig<T>,
    q_prev: &JointConfig<T>,
    mapped_links: &[usize],
    targets: &[Vec3<T>],
    alpha: T,
) -> (DMat<T>, Vec<T>, T) {
    let n = chain.dof();
    let poses = chain.forward_kinematics(q).expect("dof checked by caller");
    let mut h = DMat::zeros(n, n);
    let mut g = vec![T::zero(); n];
    let mut f = T::zero();
    for (&link, &target) in mapped_links.iter().zip(targets) {
        let err = poses[link].translation - target;
        f += err.norm_sq();
        let jac = chain.point_jacobian(q, &poses, link, poses[link].translation);
        for r in 0..3 {
            let row = jac.row(r);
            let e = err[r];
            for i in 0..n {
                g[i] += row[i] * e;
                let ri = row[i];
                for j in i..n {
                    *h.at_mut(i, j) += ri * row[j];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            *h.at_mut(i, j) = h.at(j, i);
        }
        *h.at_mut(i, i) += alpha;
        let d = q.values[i] - q_prev.values[i];
        g[i] += alpha * d;
        let dd = d;
        f += alpha * dd * dd;
    }
    (h, g, f)
}

/// Norm of the limit-projected gradient: zero iff `q` is stationary for the
/// box-constrained problem.
fn projected_gradient_norm<T: Real>(
    chain: &KinematicChain<T>,
    q: &JointConfig<T>,
    grad: &[T],
) -> T {
    let mut s = T::zero();
    for ((&g, &v), l) in grad.iter().zip(&q.values).zip(&chain.limits) {
        let stepped = (v - g).max(l.lower).min(l.upper);
        let p = v - stepped;
        s += p * p;
    }
    s.sqrt()
}

/// Solves one frame starting from `q_prev`. Accepts only improving steps, so
/// the returned residual never exceeds the objective at `q_prev`.
pub fn retarget_frame<T: Real>(
    chain: &KinematicChain<T>,
    q_prev: &JointConfig<T>,
    targets: &[Vec3<T>],
    config: &RetargetConfig<T>,
) -> Result<RetargetedFrame<T>> {
    let mapped = resolve_mapping(chain, &config.mapping)?;
    let links: Vec<usize> = mapped.iter().map(|&(_, l)| l).collect();
    Ok(solve_frame(chain, q_prev, &links, targets, config))
}

fn solve_frame<T: Real>(
    chain: &KinematicChain<T>,
    q_prev: &JointConfig<T>,
    mapped_links: &[usize],
    targets: &[Vec3<T>],
    config: &RetargetConfig<T>,
) -> RetargetedFrame<T> {
    let alpha = config.alpha;
    let mut q = chain.clamp_to_limits(q_prev);
    let mut damping = config.solver.initial_damping;
    let cond_limit = c::<T>(1e8);
    let mut converged = false;
    let mut f_cur = T::zero();
    for iter in 0..config.solver.max_iters {
        let (h, g, f) = normal_equations(chain, &q, q_prev, mapped_links, targets, alpha);
        f_cur = f;
        let full_grad: Vec<T> = g.iter().map(|&x| x * c(2.0)).collect();
        if projected_gradient_norm(chain, &q, &full_grad) < config.solver.grad_tol {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..25 {
            let neg_g: Vec<T> = g.iter().map(|&x| -x).collect();
            let gn = solve_damped_normal(&h, &neg_g, damping);
            let step = match gn {
                Some((delta, cond)) if cond <= cond_limit => Some(delta),
                _ => None,
            };
            let delta = match step {
                Some(d) => d,
                None => {
                    // Ill-conditioned normal equations: fall back to plain
                    // gradient descent with backtracking.
                    break;
                }
            };
            let mut q_new = q.clone();
            for (v, d) in q_new.values.iter_mut().zip(&delta) {
                *v += *d;
            }
            q_new = chain.clamp_to_limits(&q_new);
            let f_new =
                objective(chain, &q_new, q_prev, mapped_links, targets, alpha).unwrap_or(T::infinity());
            if f_new < f {
                q = q_new;
                f_cur = f_new;
                damping = (damping * c(0.5)).max(c(1e-12));
                improved = true;
                break;
            }
            damping *= c(10.0);
        }
        if !improved {
            // Backtracking gradient descent rescue.
            let mut eta = c::<T>(1.0) / (T::one() + full_grad.iter().map(|&x| x * x).sum::<T>().sqrt());
            let mut rescued = false;
            for _ in 0..40 {
                let mut q_new = q.clone();
                for (v, gr) in q_new.values.iter_mut().zip(&full_grad) {
                    *v -= eta * *gr;
                }
                q_new = chain.clamp_to_limits(&q_new);
                let f_new = objective(chain, &q_new, q_prev, mapped_links, targets, alpha)
                    .unwrap_or(T::infinity());
                if f_new < f {
                    q = q_new;
                    f_cur = f_new;
                    rescued = true;
                    break;
                }
                eta *= c(0.5);
            }
            if !rescued {
                // No descent direction makes progress: numerically stationary.
                converged = true;
                break;
            }
        }
        if iter + 1 == config.solver.max_iters {
            converged = false;
        }
    }
    RetargetedFrame {
        q,
        residual: f_cur,
        converged,
    }
}

/// Retargets a whole trajectory with sequential per-frame solves. The first
/// frame starts from the chain's mean pose.
pub fn retarget_trajectory<T: Real>(
    chain: &KinematicChain<T>,
    traj: &HumanHandTrajectory<T>,
    config: &RetargetConfig<T>,
) -> Result<RobotTrajectory<T>> {
    let mapped = resolve_mapping(chain, &config.mapping)?;
    let links: Vec<usize> = mapped.iter().map(|&(_, l)| l).collect();
    let mut q_prev = chain.mean_pose();
    let mut frames = Vec::with_capacity(traj.len());
    for frame in &traj.frames {
        let targets: Vec<Vec3<T>> = mapped.iter().map(|&(kp, _)| frame[kp]).collect();
        let solved = solve_frame(chain, &q_prev, &links, &targets, config);
        q_prev = solved.q.clone();
        frames.push(solved);
    }
    Ok(RobotTrajectory { frames })
}

// ---------------------------------------------------------------------------
// JSON-lines I/O

#[derive(Serialize, Deserialize)]
struct KeypointLine {
    t: usize,
    keypoints: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct RobotLine {
    t: usize,
    q: Vec<f64>,
    residual: f64,
    converged: bool,
}

/// Reads a keypoint trajectory: one JSON object per line with fields
/// `t` and `keypoints` (21 x 3).
pub fn read_keypoints_jsonl<T: Real>(path: &std::path::Path) -> Result<HumanHandTrajectory<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut frames = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: KeypointLine = serde_json::from_str(line)
            .map_err(|e| Error::parse(path.display().to_string(), format!("line {}: {e}", ln + 1)))?;
        frames.push(
            rec.keypoints
                .iter()
                .map(|p| Vec3::new(c(p[0]), c(p[1]), c(p[2])))
                .collect(),
        );
    }
    HumanHandTrajectory::new(frames)
}

/// Writes a retargeted trajectory: one JSON object per line with fields
/// `t`, `q`, `residual`, `converged`.
pub fn write_robot_trajectory_jsonl<T: Real>(
    traj: &RobotTrajectory<T>,
    path: &std::path::Path,
) -> Result<()> {
    let mut out = String::new();
    for (t, frame) in traj.frames.iter().enumerate() {
        let line = RobotLine {
            t,
            q: frame.q.values.iter().map(|&v| crate::scalar::to_f64(v)).collect(),
            residual: crate::scalar::to_f64(frame.residual),
            converged: frame.converged,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{desk_hand, JointType, Limit, Link};
    use crate::math::RigidTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Chain = KinematicChain<f64>;

    fn chain_and_mapping() -> (Chain, RetargetConfig<f64>) {
        (desk_hand::<f64>(), RetargetConfig::default())
    }

    fn mapped_links(chain: &Chain, config: &RetargetConfig<f64>) -> Vec<usize> {
        config
            .mapping
            .iter()
            .map(|(_, name)| chain.link_index(name).unwrap())
            .collect()
    }

    fn fk_targets(chain: &Chain, links: &[usize], q: &JointConfig<f64>) -> Vec<crate::Vec3> {
        let poses = chain.forward_kinematics(q).unwrap();
        links.iter().map(|&l| poses[l].translation).collect()
    }

    #[test]
    fn objective_zero_at_exact_match() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let q = chain.mean_pose();
        let targets = fk_targets(&chain, &links, &q);
        let f = objective(&chain, &q, &q, &links, &targets, config.alpha).unwrap();
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn objective_single_offset_target() {
        let (chain, _) = chain_and_mapping();
        let links = vec![chain.link_index("f0_tip").unwrap()];
        let q = chain.mean_pose();
        let mut targets = fk_targets(&chain, &links, &q);
        targets[0].x += 0.1;
        let f = objective(&chain, &q, &q, &links, &targets, 0.0).unwrap();
        assert!((f - 0.01).abs() < 1e-12);
    }

    #[test]
    fn objective_regularizer_weight() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let q = chain.mean_pose();
        let targets = fk_targets(&chain, &links, &q);
        let mut q_prev = q.clone();
        // Unit-norm perturbation spread over two DoF.
        q_prev.values[0] += (0.5f64).sqrt();
        q_prev.values[1] -= (0.5f64).sqrt();
        let f = objective(&chain, &q, &q_prev, &links, &targets, 4e-3).unwrap();
        assert!((f - 0.004).abs() < 1e-12, "f = {f}");
    }

    #[test]
    fn gradient_zero_at_stationary_point() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let q = chain.mean_pose();
        let targets = fk_targets(&chain, &links, &q);
        let g = objective_gradient(&chain, &q, &q, &links, &targets, config.alpha).unwrap();
        let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-8);
    }

    #[test]
    fn gradient_of_pure_regularizer() {
        let (chain, _) = chain_and_mapping();
        let q = chain.mean_pose();
        let mut q_prev = q.clone();
        for (i, v) in q_prev.values.iter_mut().enumerate() {
            *v += 0.01 * (i as f64 + 1.0);
        }
        let alpha = 4e-3;
        let g = objective_gradient(&chain, &q, &q_prev, &[], &[], alpha).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let expect = 2.0 * alpha * (q.values[i] - q_prev.values[i]);
            assert!((gi - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-6;
        for _ in 0..100 {
            let q = JointConfig::new(
                (0..chain.dof()).map(|_| rng.gen_range(-0.8..0.8)).collect(),
            );
            let q_prev = JointConfig::new(
                (0..chain.dof()).map(|_| rng.gen_range(-0.8..0.8)).collect(),
            );
            let q_t = JointConfig::new(
                (0..chain.dof()).map(|_| rng.gen_range(-0.8..0.8)).collect(),
            );
            let targets = fk_targets(&chain, &links, &q);
            let grad =
                objective_gradient(&chain, &q_t, &q_prev, &links, &targets, config.alpha).unwrap();
            for d in 0..chain.dof() {
                let mut qp = q_t.clone();
                qp.values[d] += h;
                let mut qm = q_t.clone();
                qm.values[d] -= h;
                let fp = objective(&chain, &qp, &q_prev, &links, &targets, config.alpha).unwrap();
                let fm = objective(&chain, &qm, &q_prev, &links, &targets, config.alpha).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let scale = grad[d].abs().max(fd.abs()).max(1.0);
                assert!(
                    (grad[d] - fd).abs() / scale < 1e-5,
                    "dof {d}: {} vs {}",
                    grad[d],
                    fd
                );
            }
        }
    }

    #[test]
    fn frame_recovers_fk_generated_targets() {
        let (chain, mut config) = chain_and_mapping();
        config.alpha = 0.0;
        let links = mapped_links(&chain, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mean = chain.mean_pose();
        for _ in 0..5 {
            let q_star = JointConfig::new(
                mean.values
                    .iter()
                    .map(|&m| m + rng.gen_range(-0.05..0.05))
                    .collect(),
            );
            let q_star = chain.clamp_to_limits(&q_star);
            let targets = fk_targets(&chain, &links, &q_star);
            let start = JointConfig::new(
                q_star
                    .values
                    .iter()
                    .map(|&v| v + rng.gen_range(-0.02..0.02))
                    .collect(),
            );
            let start = chain.clamp_to_limits(&start);
            let solved = retarget_frame(&chain, &start, &targets, &config).unwrap();
            assert!(solved.residual <= 1e-6, "residual {}", solved.residual);
            for (a, b) in solved.q.values.iter().zip(&q_star.values) {
                assert!((a - b).abs() < 1e-3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn repeated_solve_reaches_fixed_point() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let mean = chain.mean_pose();
        let goal = JointConfig::new(
            mean.values
                .iter()
                .enumerate()
                .map(|(i, &m)| m + if i < 6 { 0.05 } else { 0.1 })
                .collect(),
        );
        let goal = chain.clamp_to_limits(&goal);
        let targets = fk_targets(&chain, &links, &goal);
        let mut q = chain.mean_pose();
        let mut last_step = f64::INFINITY;
        for _ in 0..3000 {
            let solved = retarget_frame(&chain, &q, &targets, &config).unwrap();
            last_step = solved
                .q
                .values
                .iter()
                .zip(&q.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            q = solved.q;
            if last_step < 1e-6 {
                break;
            }
        }
        assert!(last_step < 1e-6, "still moving by {last_step}");
    }

    #[test]
    fn unreachable_target_matches_grid_search() {
        // 2-DoF planar arm, target far outside the workspace.
        let links = vec![
            Link {
                name: "l0".into(),
                parent: None,
                offset: RigidTransform::identity(),
                axis: crate::Vec3::unit_z(),
                joint: JointType::Revolute,
            },
            Link {
                name: "l1".into(),
                parent: Some(0),
                offset: RigidTransform::from_translation(crate::Vec3::unit_x()),
                axis: crate::Vec3::unit_z(),
                joint: JointType::Revolute,
            },
            Link {
                name: "tip".into(),
                parent: Some(1),
                offset: RigidTransform::from_translation(crate::Vec3::unit_x()),
                axis: crate::Vec3::unit_z(),
                joint: JointType::Fixed,
            },
        ];
        let limits = vec![
            Limit {
                lower: -std::f64::consts::PI,
                upper: std::f64::consts::PI,
            };
            2
        ];
        let chain = KinematicChain::new(links, limits, 0, vec![2]).unwrap();
        let config = RetargetConfig {
            mapping: vec![(0, "tip".into())],
            alpha: 0.0,
            solver: SolverConfig::default(),
        };
        let target = crate::Vec3::new(10.0, 0.0, 0.0);
        let start = JointConfig::new(vec![0.3, -0.4]);
        let solved = retarget_frame(&chain, &start, &[target], &config).unwrap();
        assert!(solved.converged);

        // Dense grid-search oracle over both joints.
        let tip = chain.link_index("tip").unwrap();
        let mut best = f64::INFINITY;
        let n = 400;
        for i in 0..n {
            for j in 0..n {
                let a = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64) / n as f64;
                let b = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64) / n as f64;
                let q = JointConfig::new(vec![a, b]);
                let f = objective(&chain, &q, &q, &[tip], &[target], 0.0).unwrap();
                best = best.min(f);
            }
        }
        // Workspace radius is 2, so the optimum is (10 - 2)^2 = 64.
        assert!((solved.residual - 64.0).abs() < 1e-6, "{}", solved.residual);
        assert!(solved.residual <= best + 1e-3);
    }

    /// Smooth joint path starting at the mean pose. Amplitudes shrink toward
    /// the distal joints, whose small levers make them the slowest directions
    /// for the regularized solve to follow.
    fn synthetic_path(chain: &Chain, len: usize) -> Vec<JointConfig<f64>> {
        let mean = chain.mean_pose();
        let amp = |d: usize| -> f64 {
            if d < 6 {
                0.03
            } else {
                match (d - 6) % 3 {
                    0 => 0.04,
                    1 => 0.025,
                    _ => 0.012,
                }
            }
        };
        (0..len)
            .map(|t| {
                let s = t as f64 / len as f64;
                let ramp = s * s * (3.0 - 2.0 * s);
                let values = mean
                    .values
                    .iter()
                    .enumerate()
                    .map(|(d, &m)| {
                        m + amp(d) * (std::f64::consts::PI * s + d as f64 * 0.7).sin() * ramp
                    })
                    .collect();
                chain.clamp_to_limits(&JointConfig::new(values))
            })
            .collect()
    }

    fn keypoints_from_path(
        chain: &Chain,
        config: &RetargetConfig<f64>,
        path: &[JointConfig<f64>],
    ) -> HumanHandTrajectory<f64> {
        let frames = path
            .iter()
            .map(|q| {
                let poses = chain.forward_kinematics(q).unwrap();
                let mut frame = vec![crate::Vec3::zero(); HAND_KEYPOINTS];
                for (kp, name) in &config.mapping {
                    frame[*kp] = poses[chain.link_index(name).unwrap()].translation;
                }
                frame
            })
            .collect();
        HumanHandTrajectory::new(frames).unwrap()
    }

    #[test]
    fn trajectory_tracks_smooth_fk_path() {
        let (chain, config) = chain_and_mapping();
        let path = synthetic_path(&chain, 60);
        let traj = keypoints_from_path(&chain, &config, &path);
        let solved = retarget_trajectory(&chain, &traj, &config).unwrap();
        assert_eq!(solved.frames.len(), 60);
        for (frame, truth) in solved.frames.iter().zip(&path) {
            for (a, b) in frame.q.values.iter().zip(&truth.values) {
                assert!((a - b).abs() < 1e-2, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn single_frame_trajectory_equals_frame_solve() {
        let (chain, config) = chain_and_mapping();
        let path = synthetic_path(&chain, 1);
        let traj = keypoints_from_path(&chain, &config, &path);
        let full = retarget_trajectory(&chain, &traj, &config).unwrap();
        let links = mapped_links(&chain, &config);
        let targets: Vec<crate::Vec3> = config
            .mapping
            .iter()
            .map(|(kp, _)| traj.frames[0][*kp])
            .collect();
        let single = solve_frame(&chain, &chain.mean_pose(), &links, &targets, &config);
        assert_eq!(full.frames[0].q.values, single.q.values);
    }

    #[test]
    fn huge_alpha_freezes_at_mean_pose() {
        let (chain, mut config) = chain_and_mapping();
        config.alpha = 1e3;
        let path = synthetic_path(&chain, 10);
        let traj = keypoints_from_path(&chain, &config, &path);
        let solved = retarget_trajectory(&chain, &traj, &config).unwrap();
        let mean = chain.mean_pose();
        for frame in &solved.frames {
            for (a, m) in frame.q.values.iter().zip(&mean.values) {
                assert!((a - m).abs() < 1e-2, "{a} vs {m}");
            }
        }
    }

    #[test]
    fn monotone_improvement_over_previous_config() {
        let (chain, config) = chain_and_mapping();
        let links = mapped_links(&chain, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let q_prev = chain.clamp_to_limits(&JointConfig::new(
                (0..chain.dof()).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            ));
            let targets: Vec<crate::Vec3> = (0..links.len())
                .map(|_| {
                    crate::Vec3::new(
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(0.0..0.4),
                    )
                })
                .collect();
            let f_prev = objective(&chain, &q_prev, &q_prev, &links, &targets, config.alpha).unwrap();
            let solved = retarget_frame(&chain, &q_prev, &targets, &config).unwrap();
            assert!(solved.residual <= f_prev + 1e-12);
        }
    }

    #[test]
    fn smoothing_total_variation_nonincreasing_in_alpha() {
        let (chain, base) = chain_and_mapping();
        let path = synthetic_path(&chain, 15);
        let traj = keypoints_from_path(&chain, &base, &path);
        let mut tvs = Vec::new();
        for alpha in [0.0, 4e-3, 1.0] {
            let config = RetargetConfig {
                alpha,
                ..RetargetConfig::default()
            };
            let solved = retarget_trajectory(&chain, &traj, &config).unwrap();
            let mut tv = 0.0;
            for w in solved.frames.windows(2) {
                tv += w[1]
                    .q
                    .values
                    .iter()
                    .zip(&w[0].q.values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
            }
            tvs.push(tv);
        }
        assert!(tvs[1] <= tvs[0] + 1e-9, "{tvs:?}");
        assert!(tvs[2] <= tvs[1] + 1e-9, "{tvs:?}");
    }

    #[test]
    fn translation_equivariance_through_free_base() {
        let (chain, config) = chain_and_mapping();
        let path = synthetic_path(&chain, 5);
        let traj = keypoints_from_path(&chain, &config, &path);
        let d = crate::Vec3::new(0.07, -0.04, 0.05);
        let shifted_frames: Vec<Vec<crate::Vec3>> = traj
            .frames
            .iter()
            .map(|f| f.iter().map(|&p| p + d).collect())
            .collect();
        let shifted_traj = HumanHandTrajectory::new(shifted_frames).unwrap();
        let mut shifted_chain = chain.clone();
        shifted_chain.links[0].offset =
            RigidTransform::from_translation(d).compose(&shifted_chain.links[0].offset);
        let a = retarget_trajectory(&chain, &traj, &config).unwrap();
        let b = retarget_trajectory(&shifted_chain, &shifted_traj, &config).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (x, y) in fa.q.values.iter().zip(&fb.q.values) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kp.jsonl");
        let mut lines = String::new();
        for t in 0..3 {
            let kp: Vec<[f64; 3]> = (0..HAND_KEYPOINTS)
                .map(|k| [0.01 * t as f64, 0.001 * k as f64, 0.1])
                .collect();
            lines.push_str(&serde_json::to_string(&KeypointLine { t, keypoints: kp }).unwrap());
            lines.push('\n');
        }
        std::fs::write(&path, lines).unwrap();
        let traj: HumanHandTrajectory<f64> = read_keypoints_jsonl(&path).unwrap();
        assert_eq!(traj.len(), 3);
        assert!((traj.frames[2][5].y - 0.005).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrist_teleport() {
        let mut frames = vec![vec![crate::Vec3::zero(); HAND_KEYPOINTS]; 2];
        frames[1][0] = crate::Vec3::new(0.6, 0.0, 0.0);
        assert!(HumanHandTrajectory::<f64>::new(frames).is_err());
    }
}
