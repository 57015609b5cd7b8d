//! Damped least-squares inverse kinematics on the current frame's targets.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Prediction, Reconstructor};
use crate::error::{Error, Result};
use crate::sensor_sim::TRACKED_JOINT_NAMES;
use crate::skeleton::{forward_kinematics_unchecked, skew, Mat3, MotionClip, Pose, Rotation, Skeleton, Vec3};
use crate::sync::FusedFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IkConfig {
    /// Levenberg-Marquardt damping; the normal equations get `damping²` on the diagonal.
    pub damping: f64,
    /// Weight of the headset/controller orientation constraints.
    pub w_rot: f64,
    pub max_iterations: usize,
    /// Stop once the RMS position residual falls below this (m).
    pub tolerance_m: f64,
    /// Keep the root where it starts; only rotations are solved.
    pub fix_root_translation: bool,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self { damping: 0.01, w_rot: 0.5, max_iterations: 100, tolerance_m: 1e-4, fix_root_translation: false }
    }
}

impl IkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping.is_finite() && self.damping > 0.0) {
            return Err(Error::Parameter(format!("IK damping must be positive, got {}", self.damping)));
        }
        if !(self.w_rot.is_finite() && self.w_rot >= 0.0) {
            return Err(Error::Parameter(format!("w_rot must be >= 0, got {}", self.w_rot)));
        }
        if !(self.tolerance_m.is_finite() && self.tolerance_m >= 0.0) {
            return Err(Error::Parameter("IK tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Targets for one solve. Invalid position targets are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct IkTargets {
    pub positions: Vec<Vec3>,
    pub valid: Vec<bool>,
    /// `(joint, global orientation)` soft constraints.
    pub orientations: Vec<(usize, Rotation)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub pose: Pose,
    pub iterations: usize,
    /// Objective of every accepted iterate, starting with the initial pose.
    pub objective_trace: Vec<f64>,
    pub rms_residual_m: f64,
    pub held: bool,
}

/// Solver bound to one skeleton. Joint ancestry is precomputed.
#[derive(Debug, Clone)]
pub struct IkSolver {
    skeleton: Arc<Skeleton>,
    config: IkConfig,
    /// Strict ancestors of each joint.
    ancestors: Vec<Vec<usize>>,
}

const ROOT: usize = 0;

/// An accepted step that lowers the objective by less than this fraction ends the solve.
pub const STALL_RELATIVE_DECREASE: f64 = 1e-6;

/// Gauss-Newton normal equations in 3×3 blocks: one block per joint
/// rotation, the root translation last. Two joint blocks couple only when
/// one is an ancestor of the other, so eliminating joints children-first
/// (descending index on a topologically sorted tree) creates no fill-in.
#[derive(Debug, Clone)]
struct BlockSystem {
    blocks: usize,
    a: Vec<Mat3>,
    g: Vec<Vec3>,
    work: Vec<Mat3>,
}

impl BlockSystem {
    fn new(joints: usize) -> Self {
        let blocks = joints + 1;
        Self { blocks, a: vec![Mat3::zeros(); blocks * blocks], g: vec![Vec3::zeros(); blocks], work: vec![] }
    }

    fn translation(&self) -> usize {
        self.blocks - 1
    }

    fn clear(&mut self) {
        self.a.fill(Mat3::zeros());
        self.g.fill(Vec3::zeros());
    }

    /// Adds `JᵀJ` and `Jᵀe` for one 3-vector residual `e` whose Jacobian
    /// is the block row `jac`.
    fn add(&mut self, jac: &[(usize, Mat3)], e: &Vec3) {
        for (ci, bi) in jac {
            let bt = bi.transpose();
            self.g[*ci] += bt * e;
            for (cj, bj) in jac {
                self.a[ci * self.blocks + cj] += bt * bj;
            }
        }
    }

    /// Solves `(A + μI) δ = g`. `ancestors[j]` lists the strict ancestors
    /// of joint `j`. None when the damped matrix is not positive definite.
    fn solve(&mut self, mu: f64, ancestors: &[Vec<usize>]) -> Option<Vec<Vec3>> {
        let nb = self.blocks;
        let t = self.translation();
        let w = &mut self.work;
        w.clear();
        w.extend_from_slice(&self.a);
        for b in 0..nb {
            w[b * nb + b] += Mat3::identity() * mu;
        }
        let mut coupled: Vec<usize> = Vec::with_capacity(16);
        for i in (0..t).rev() {
            coupled.clear();
            coupled.extend_from_slice(&ancestors[i]);
            coupled.push(t);
            let l = w[i * nb + i].cholesky()?.l();
            let l_inv_t = l.try_inverse()?.transpose();
            w[i * nb + i] = l;
            for &p in &coupled {
                w[p * nb + i] *= l_inv_t;
            }
            for &p in &coupled {
                for &q in &coupled {
                    let u = w[p * nb + i] * w[q * nb + i].transpose();
                    w[p * nb + q] -= u;
                }
            }
        }
        w[t * nb + t] = w[t * nb + t].cholesky()?.l();

        let mut y = self.g.clone();
        for i in (0..t).rev() {
            y[i] = w[i * nb + i].solve_lower_triangular(&y[i])?;
            for &p in ancestors[i].iter().chain([&t]) {
                let u = w[p * nb + i] * y[i];
                y[p] -= u;
            }
        }
        y[t] = w[t * nb + t].solve_lower_triangular(&y[t])?;

        let mut x = vec![Vec3::zeros(); nb];
        x[t] = w[t * nb + t].tr_solve_lower_triangular(&y[t])?;
        for i in 0..t {
            let mut r = y[i];
            for &p in ancestors[i].iter().chain([&t]) {
                r -= w[p * nb + i].tr_mul(&x[p]);
            }
            x[i] = w[i * nb + i].tr_solve_lower_triangular(&r)?;
        }
        Some(x)
    }
}

impl IkSolver {
    pub fn new(skeleton: Arc<Skeleton>, config: IkConfig) -> Result<Self> {
        config.validate()?;
        let ancestors = (0..skeleton.len()).map(|j| skeleton.ancestry(j).skip(1).collect()).collect();
        Ok(Self { skeleton, config, ancestors })
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        &self.skeleton
    }

    pub fn config(&self) -> &IkConfig {
        &self.config
    }

    fn residuals(&self, pose: &Pose, targets: &IkTargets) -> (f64, f64, usize) {
        let g = forward_kinematics_unchecked(&self.skeleton, pose);
        let mut pos = 0.0;
        let mut n = 0;
        for (j, p) in g.positions.iter().enumerate() {
            if targets.valid[j] {
                pos += (targets.positions[j] - p).norm_squared();
                n += 1;
            }
        }
        let mut rot = 0.0;
        for (j, t) in &targets.orientations {
            rot += (self.config.w_rot * t.mul(&g.rotations[*j].inverse()).to_rotation_vector()).norm_squared();
        }
        (pos + rot, pos, n)
    }

    /// Levenberg-Marquardt over root translation and world-frame rotation
    /// increments of every joint. A trial step is kept only when it lowers
    /// the objective, so the objective never increases.
    pub fn solve(&self, initial: &Pose, targets: &IkTargets) -> Result<IkSolution> {
        let n = self.skeleton.len();
        initial.check(&self.skeleton)?;
        if targets.positions.len() != n || targets.valid.len() != n {
            return Err(Error::Structure(format!("IK targets cover {} joints, skeleton has {n}", targets.positions.len())));
        }
        if targets.orientations.iter().any(|(j, _)| *j >= n) {
            return Err(Error::Structure("orientation target on a joint outside the skeleton".into()));
        }
        if !targets.valid.iter().any(|v| *v) {
            return Ok(IkSolution {
                pose: initial.clone(),
                iterations: 0,
                objective_trace: vec![],
                rms_residual_m: f64::NAN,
                held: true,
            });
        }

        let mu0 = self.config.damping * self.config.damping;
        let mut mu = mu0;
        let mut nu = 2.0;
        let mut pose = initial.clone();
        let (mut f, mut pos_sq, count) = self.residuals(&pose, targets);
        let mut trace = vec![f];
        let mut iterations = 0;
        let mut converged = false;
        let mut system = BlockSystem::new(n);

        while !converged && iterations < self.config.max_iterations && (pos_sq / count as f64).sqrt() >= self.config.tolerance_m {
            iterations += 1;
            let fk = forward_kinematics_unchecked(&self.skeleton, &pose);
            self.normal_equations(&fk.positions, &fk.rotations, targets, &mut system);
            let mut accepted = false;
            while !accepted && mu < 1e12 {
                let Some(delta) = system.solve(mu, &self.ancestors) else {
                    mu *= nu;
                    nu *= 2.0;
                    continue;
                };
                let trial = self.apply_step(&pose, &fk.rotations, &delta);
                let (ft, pt, _) = self.residuals(&trial, targets);
                if ft < f {
                    // gain ratio against the linear model's predicted decrease
                    let predicted: f64 = delta.iter().zip(&system.g).map(|(d, g)| d.dot(&(g + d * mu))).sum();
                    let rho = (f - ft) / predicted.max(f64::MIN_POSITIVE);
                    let step_sq: f64 = delta.iter().map(Vec3::norm_squared).sum();
                    converged = f - ft <= STALL_RELATIVE_DECREASE * f || step_sq < 1e-20;
                    trace.push(ft);
                    pose = trial;
                    f = ft;
                    pos_sq = pt;
                    mu = (mu * (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3))).max(mu0);
                    nu = 2.0;
                    accepted = true;
                } else {
                    mu *= nu;
                    nu *= 2.0;
                }
            }
            if !accepted {
                break;
            }
        }
        Ok(IkSolution {
            pose,
            iterations,
            objective_trace: trace,
            rms_residual_m: (pos_sq / count as f64).sqrt(),
            held: false,
        })
    }

    fn normal_equations(&self, positions: &[Vec3], rotations: &[Rotation], targets: &IkTargets, system: &mut BlockSystem) {
        system.clear();
        let translation = system.translation();
        let fix_root = self.config.fix_root_translation;
        let mut jac: Vec<(usize, Mat3)> = Vec::with_capacity(16);
        for (j, p) in positions.iter().enumerate() {
            if !targets.valid[j] {
                continue;
            }
            jac.clear();
            if !fix_root {
                jac.push((translation, Mat3::identity()));
            }
            for &anc in &self.ancestors[j] {
                jac.push((anc, -skew(&(p - positions[anc]))));
            }
            system.add(&jac, &(targets.positions[j] - p));
        }
        let w = self.config.w_rot;
        if w > 0.0 {
            for (j, t) in &targets.orientations {
                let e = w * t.mul(&rotations[*j].inverse()).to_rotation_vector();
                jac.clear();
                jac.push((*j, Mat3::identity() * w));
                for &anc in &self.ancestors[*j] {
                    jac.push((anc, Mat3::identity() * w));
                }
                system.add(&jac, &e);
            }
        }
    }

    fn apply_step(&self, pose: &Pose, rotations: &[Rotation], delta: &[Vec3]) -> Pose {
        let n = self.skeleton.len();
        let mut out = pose.clone();
        if !self.config.fix_root_translation {
            out.root_translation += delta[n];
        }
        for j in 0..n {
            let omega = delta[j];
            let local = match self.skeleton.parent(j) {
                Some(p) => rotations[p].inverse().rotate(&omega),
                None => omega,
            };
            out.local_rotations[j] = Rotation::from_rotation_vector(&local).mul(&pose.local_rotations[j]);
        }
        out
    }
}

/// Geometric reconstructor: per-frame IK onto the current Cartesian targets
/// plus the tracked orientations, warm-started from the previous solution.
#[derive(Debug, Clone)]
pub struct IkReconstructor {
    solver: IkSolver,
    tracked: Option<[usize; 3]>,
}

impl IkReconstructor {
    pub fn new(skeleton: Arc<Skeleton>, config: IkConfig) -> Result<Self> {
        let mut tracked = [0; 3];
        let mut found = true;
        for (slot, name) in tracked.iter_mut().zip(TRACKED_JOINT_NAMES) {
            match skeleton.index_of(name) {
                Some(i) => *slot = i,
                None => found = false,
            }
        }
        Ok(Self { solver: IkSolver::new(skeleton, config)?, tracked: found.then_some(tracked) })
    }

    pub fn solver(&self) -> &IkSolver {
        &self.solver
    }

    pub fn targets(&self, frame: &FusedFrame) -> IkTargets {
        let orientations = match self.tracked {
            Some(idx) => idx.iter().zip(&frame.sparse.tracked).map(|(j, s)| (*j, s.orientation)).collect(),
            None => vec![],
        };
        IkTargets { positions: frame.cartesian.positions.clone(), valid: frame.cartesian.valid.clone(), orientations }
    }
}

impl Reconstructor for IkReconstructor {
    fn name(&self) -> &'static str {
        "ik"
    }

    fn window_length(&self) -> usize {
        1
    }

    fn fit(&mut self, _clips: &[MotionClip]) -> Result<()> {
        Ok(())
    }

    fn predict(&self, window: &[&FusedFrame], previous: Option<&Pose>) -> Result<Prediction> {
        let frame = window.last().ok_or_else(|| Error::Structure("empty window".into()))?;
        let targets = self.targets(frame);
        let initial = match previous {
            Some(p) => p.clone(),
            None => {
                // first frame: rest pose placed at the pelvis target when it is seen
                let mut p = Pose::identity(self.solver.skeleton.len());
                if targets.valid[ROOT] {
                    p.root_translation = targets.positions[ROOT];
                }
                p
            }
        };
        let solution = self.solver.solve(&initial, &targets)?;
        Ok(Prediction { pose: solution.pose, held: solution.held })
    }
}
