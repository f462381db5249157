//! Attitude-stabilizer synthesis: linearized tilt model and LQR gain via a
//! continuous algebraic Riccati equation (CARE) solver.
//!
//! The stabilizing states are x_s = [φ, φ̇, ψ, ψ̇]. Linearized about the
//! centered equilibrium, each tilt is a double integrator driven by wheel
//! torque differences, so A is the two-block double-integrator matrix and B
//! carries the torque moment arms (which scale with bore diameter — gains
//! are re-synthesized per segment).

use super::ControlError;
use crate::dynamics::RobotParams;
use nalgebra::{Complex, SMatrix, SVector};

pub type Mat4 = SMatrix<f64, 4, 4>;
pub type Mat4x3 = SMatrix<f64, 4, 3>;
pub type Mat3x4 = SMatrix<f64, 3, 4>;
pub type Mat2x4 = SMatrix<f64, 2, 4>;

/// Linear tilt model ẋ_s = A·x_s + B·u with u the three wheel torques.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: Mat4,
    pub b: Mat4x3,
    /// Reporting output map (tilt angles) — the controller itself uses full
    /// state feedback from the estimator.
    pub c: Mat2x4,
    /// Bore diameter the model was linearized at, m.
    pub diameter: f64,
}

/// Linearized tilt model at a given bore diameter.
///
/// Moment arms use the linkage constraint L·cos θ = D/2 directly, so the
/// model stays defined for bores beyond full arm extension; the bare body
/// inertias are used (the gear-train reflection the nonlinear plant carries
/// is treated as plant-side modeling error the LQR margins absorb).
pub fn linearize(p: &RobotParams, diameter: f64) -> Result<LinearModel, ControlError> {
    if !(diameter > 0.0 && diameter.is_finite()) {
        return Err(ControlError::GeometryError { diameter });
    }
    let d = diameter;
    let r = p.wheel_radius;
    let s3 = 3.0_f64.sqrt();

    let mut a = Mat4::zeros();
    a[(0, 1)] = 1.0;
    a[(2, 3)] = 1.0;

    let mut b = Mat4x3::zeros();
    let phi_arm = s3 * d / (4.0 * r * p.i_yy);
    b[(1, 1)] = -phi_arm;
    b[(1, 2)] = phi_arm;
    b[(3, 0)] = -d / (2.0 * r * p.i_zz);
    b[(3, 1)] = d / (4.0 * r * p.i_zz);
    b[(3, 2)] = d / (4.0 * r * p.i_zz);

    let mut c = Mat2x4::zeros();
    c[(0, 1)] = 1.0;
    c[(1, 2)] = 1.0;

    Ok(LinearModel {
        a,
        b,
        c,
        diameter: d,
    })
}

/// Diagonal LQR weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q: [f64; 4],
    pub r: [f64; 3],
}

impl Default for LqrWeights {
    fn default() -> Self {
        LqrWeights {
            q: [200.0, 10.0, 200.0, 10.0],
            r: [1.0, 1.0, 1.0],
        }
    }
}

/// Synthesized stabilizer gain.
#[derive(Debug, Clone)]
pub struct LqrGain {
    /// u = −K·x_s, torques.
    pub k: Mat3x4,
    /// Stabilizing Riccati solution.
    pub p: Mat4,
    /// ‖AᵀP + PA − P·B·R⁻¹·Bᵀ·P + Q‖_F of the returned solution.
    pub care_residual: f64,
    pub closed_loop_eigenvalues: [Complex<f64>; 4],
}

/// Frobenius norm of the CARE residual for a candidate P.
fn care_residual(a: &Mat4, s: &Mat4, q: &Mat4, p: &Mat4) -> f64 {
    (a.transpose() * p + p * a - p * s * p + q).norm()
}

/// Solve the CARE `AᵀP + PA − P·B·R⁻¹·Bᵀ·P + Q = 0` for its stabilizing
/// solution and the gain K = R⁻¹·Bᵀ·P.
///
/// Route: integrate the differential Riccati equation from P = 0 until it
/// flattens (this converges to the stabilizing solution and needs no
/// eigenstructure machinery), then polish with Newton–Kleinman iterations,
/// each a 16×16 Kronecker-product Lyapunov solve, for full precision.
pub fn solve_care(model: &LinearModel, w: &LqrWeights) -> Result<LqrGain, ControlError> {
    if w.q.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(ControlError::InvalidWeights(
            "state weights must be nonnegative and finite",
        ));
    }
    if w.r.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(ControlError::InvalidWeights(
            "input weights must be positive and finite",
        ));
    }

    let a = model.a;
    let b = model.b;
    let q = Mat4::from_diagonal(&SVector::from(w.q));
    let r_inv = SMatrix::<f64, 3, 3>::from_diagonal(&SVector::from([
        1.0 / w.r[0],
        1.0 / w.r[1],
        1.0 / w.r[2],
    ]));
    let s = b * r_inv * b.transpose();

    // Controllability rank. The open-loop A is a pair of pure integrator
    // chains (every mode on the imaginary axis), so any uncontrollable
    // direction is an unstabilizable one.
    let mut ctrb = SMatrix::<f64, 4, 12>::zeros();
    let mut ab = b;
    for blk in 0..4 {
        ctrb.fixed_view_mut::<4, 3>(0, 3 * blk).copy_from(&ab);
        ab = a * ab;
    }
    let scale = ctrb.norm();
    if scale == 0.0 || ctrb.rank(1e-9 * scale) < 4 {
        return Err(ControlError::NotStabilizable);
    }

    // Differential-Riccati warm start from P = 0. Fixed-step RK4 on
    // Ṗ = AᵀP + PA − P·S·P + Q; the transient's stiffness is bounded by the
    // converged closed-loop spectrum, well inside stability at this step.
    let dre_rhs = |p: &Mat4| a.transpose() * p + p * a - p * s * p + q;
    let mut p = Mat4::zeros();
    let dt = 5e-4;
    let mut converged = false;
    for step in 0..60_000 {
        let k1 = dre_rhs(&p);
        let k2 = dre_rhs(&(p + k1 * (0.5 * dt)));
        let k3 = dre_rhs(&(p + k2 * (0.5 * dt)));
        let k4 = dre_rhs(&(p + k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        p = (p + p.transpose()) * 0.5;
        if step % 16 == 0 && k1.norm() < 1e-6 * (1.0 + p.norm()) {
            converged = true;
            break;
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(ControlError::NoConvergence {
                residual: f64::INFINITY,
            });
        }
    }
    if !converged {
        return Err(ControlError::NoConvergence {
            residual: care_residual(&a, &s, &q, &p),
        });
    }

    // Newton–Kleinman polish: with K_j from P_j, solve the Lyapunov equation
    // (A−BK)ᵀP + P(A−BK) = −(Q + KᵀRK) exactly and iterate to quadratic
    // convergence.
    let r_mat = SMatrix::<f64, 3, 3>::from_diagonal(&SVector::from(w.r));
    for _ in 0..30 {
        let k = r_inv * b.transpose() * p;
        let acl = a - b * k;
        let rhs = -(q + k.transpose() * r_mat * k);
        p = match solve_lyapunov(&acl, &rhs) {
            Some(sol) => (sol + sol.transpose()) * 0.5,
            None => break,
        };
        if care_residual(&a, &s, &q, &p) < 1e-12 * (1.0 + p.norm()) {
            break;
        }
    }

    let residual = care_residual(&a, &s, &q, &p);
    let k = r_inv * b.transpose() * p;
    let acl = a - b * k;
    let eig_vec = acl.complex_eigenvalues();
    let eigs = [eig_vec[0], eig_vec[1], eig_vec[2], eig_vec[3]];
    let hurwitz = eigs.iter().all(|l| l.re < 0.0);
    if residual >= 1e-8 || !hurwitz || !p.iter().all(|x| x.is_finite()) {
        return Err(ControlError::NoConvergence { residual });
    }

    Ok(LqrGain {
        k,
        p,
        care_residual: residual,
        closed_loop_eigenvalues: eigs,
    })
}

/// Solve AᵀX + XA = RHS for X by the Kronecker-product expansion
/// (I⊗Aᵀ + Aᵀ⊗I)·vec(X) = vec(RHS), a dense 16×16 LU solve.
fn solve_lyapunov(a: &Mat4, rhs: &Mat4) -> Option<Mat4> {
    let at = a.transpose();
    let mut m = SMatrix::<f64, 16, 16>::zeros();
    // Column-major vec: vec(AᵀX) = (I⊗Aᵀ)vec(X), vec(XA) = (Aᵀ⊗I)vec(X).
    for col_blk in 0..4 {
        for rb in 0..4 {
            for cb in 0..4 {
                m[(4 * col_blk + rb, 4 * col_blk + cb)] += at[(rb, cb)];
            }
        }
    }
    for rb in 0..4 {
        for cb in 0..4 {
            let coef = at[(rb, cb)];
            for i in 0..4 {
                m[(4 * rb + i, 4 * cb + i)] += coef;
            }
        }
    }
    let mut v = SVector::<f64, 16>::zeros();
    for c in 0..4 {
        for r in 0..4 {
            v[4 * c + r] = rhs[(r, c)];
        }
    }
    let sol = m.lu().solve(&v)?;
    let mut x = Mat4::zeros();
    for c in 0..4 {
        for r in 0..4 {
            x[(r, c)] = sol[4 * c + r];
        }
    }
    Some(x)
}

/// Stabilizer control law u = −K·x_s (wheel torques, N·m).
pub fn stabilizer_control(gain: &LqrGain, x_s: [f64; 4]) -> [f64; 3] {
    let u = -gain.k * SVector::from(x_s);
    [u[0], u[1], u[2]]
}

/// A previously tabulated gain for the 0.18 m bore, kept as a cross-check
/// reference. Its generating weights are not recorded, so synthesis treats
/// the freshly computed gain as authoritative and documents deviations from
/// this table in the [`GainReport`] instead of assuming it can be reproduced.
pub const REFERENCE_GAIN_D018: [[f64; 4]; 3] = [
    [-4.92, -1.12, -13.26, -2.98],
    [-9.37, -2.11, 3.48, 0.78],
    [-9.37, -2.11, 3.48, 0.78],
];

/// Synthesis summary: the authoritative computed gain, solution quality, and
/// an element-by-element comparison against a reference table.
#[derive(Debug, Clone)]
pub struct GainReport {
    pub gain: LqrGain,
    pub reference: [[f64; 4]; 3],
    /// |k − ref| / max(|ref|, floor) per element.
    pub relative_deviation: [[f64; 4]; 3],
    pub max_relative_deviation: f64,
}

impl GainReport {
    pub fn against_reference(gain: LqrGain, reference: [[f64; 4]; 3]) -> Self {
        let mut relative_deviation = [[0.0; 4]; 3];
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                let dev =
                    (gain.k[(i, j)] - reference[i][j]).abs() / reference[i][j].abs().max(1e-6);
                relative_deviation[i][j] = dev;
                max_dev = max_dev.max(dev);
            }
        }
        GainReport {
            gain,
            reference,
            relative_deviation,
            max_relative_deviation: max_dev,
        }
    }

    /// Every element within the given relative tolerance of the reference.
    pub fn within(&self, tol: f64) -> bool {
        self.max_relative_deviation <= tol
    }
}

impl std::fmt::Display for GainReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "synthesized gain K (u = -K x_s):")?;
        for i in 0..3 {
            writeln!(
                f,
                "  [{:>10.4} {:>10.4} {:>10.4} {:>10.4}]",
                self.gain.k[(i, 0)],
                self.gain.k[(i, 1)],
                self.gain.k[(i, 2)],
                self.gain.k[(i, 3)]
            )?;
        }
        writeln!(f, "CARE residual: {:.3e}", self.gain.care_residual)?;
        write!(f, "closed-loop eigenvalues:")?;
        for l in &self.gain.closed_loop_eigenvalues {
            write!(f, " {:.3}{:+.3}i", l.re, l.im)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "deviation from reference table (authoritative: synthesized):"
        )?;
        for i in 0..3 {
            for j in 0..4 {
                let dev = self.relative_deviation[i][j];
                if dev > 0.15 {
                    writeln!(
                        f,
                        "  k[{i}][{j}] = {:.4} vs reference {:.4} ({:.0}% off)",
                        self.gain.k[(i, j)],
                        self.reference[i][j],
                        dev * 100.0
                    )?;
                }
            }
        }
        writeln!(
            f,
            "max elementwise deviation: {:.1}%",
            self.max_relative_deviation * 100.0
        )
    }
}
