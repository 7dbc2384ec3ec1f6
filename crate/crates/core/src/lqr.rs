//! Linearization about a rotating equilibrium and LQR gain synthesis.
//!
//! The 18-dimensional state is expressed in the control frame C:
//! `[x_p, v_p, x_1, v_1, x_2, v_2]` with positions measured from the frame
//! origin and velocities relative to the spinning frame. The input is the two
//! C-frame thrust vectors, applied without lag. The Jacobians come from
//! central differences of the exact rotating-frame dynamics, so Coriolis and
//! centrifugal terms appear in `A` without being derived by hand.
//!
//! The Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved by
//! Kleinman–Newton iteration: starting from a stabilizing gain (Bass's
//! pole-shifted Lyapunov construction) each step solves one Lyapunov equation
//! for the current closed loop.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Schur};
use sha2::{Digest, Sha256};

use crate::dynamics::body_accelerations;
use crate::equilibrium::EquilibriumSpec;
use crate::error::{Error, Result};
use crate::model::{SystemParams, Vec3};

pub const STATE_DIM: usize = 18;
pub const INPUT_DIM: usize = 6;

/// Position weight per axis and thrust weights per vehicle.
pub const POSITION_WEIGHT: f64 = 5.0;
pub const VELOCITY_WEIGHT: f64 = 0.0;
pub const THRUST_WEIGHTS: [f64; 3] = [1.2, 1.2, 1.0];

/// Above this the operating point is not an equilibrium of the model.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-6;
/// Kleinman–Newton stops once the CARE residual drops below this.
pub const CARE_TOLERANCE: f64 = 1e-10;
/// A synthesized gain is only accepted with a residual below this.
pub const CARE_ACCEPT: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const DEFAULT_FD_STEP: f64 = 1e-6;

fn vec3_at(v: &DVector<f64>, k: usize) -> Vec3 {
    Vec3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2])
}

/// Time derivative of the C-frame state for a frame spinning at a constant
/// `omega` about `3_C`, with thrusts `u` given in C.
pub fn rotating_frame_derivative(
    s: &DVector<f64>,
    u: &DVector<f64>,
    omega: f64,
    params: &SystemParams,
) -> Result<DVector<f64>> {
    let spin = Vec3::new(0.0, 0.0, omega);
    let x = [vec3_at(s, 0), vec3_at(s, 2), vec3_at(s, 4)];
    let v_rel = [vec3_at(s, 1), vec3_at(s, 3), vec3_at(s, 5)];
    // inertial velocity in C components; the origin does not move
    let v_inertial = [0, 1, 2].map(|i| v_rel[i] + spin.cross(&x[i]));
    let thrusts = [vec3_at(u, 0), vec3_at(u, 1)];

    // Forces are invariant under rotation about the vertical, so the E-frame
    // model can be evaluated directly on C components.
    let acc = body_accelerations(&x, &v_inertial, &thrusts, params)?;
    let a_inertial = [acc.payload, acc.vehicles[0], acc.vehicles[1]];

    let mut out = DVector::zeros(STATE_DIM);
    for i in 0..3 {
        let a_rel = a_inertial[i] - 2.0 * spin.cross(&v_rel[i]) - spin.cross(&spin.cross(&x[i]));
        out.fixed_rows_mut::<3>(6 * i).copy_from(&v_rel[i]);
        out.fixed_rows_mut::<3>(6 * i + 3).copy_from(&a_rel);
    }
    Ok(out)
}

/// Linearized rotating-frame model about one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub s_bar: DVector<f64>,
    pub u_bar: DVector<f64>,
    pub omega_c: f64,
}

/// Equilibrium state and feedforward input of `eq` in C coordinates.
pub fn equilibrium_vectors(eq: &EquilibriumSpec) -> (DVector<f64>, DVector<f64>) {
    let [r1, r2] = eq.offsets();
    let mut s = DVector::zeros(STATE_DIM);
    s.fixed_rows_mut::<3>(6).copy_from(&r1);
    s.fixed_rows_mut::<3>(12).copy_from(&r2);
    let mut u = DVector::zeros(INPUT_DIM);
    u.fixed_rows_mut::<3>(0).copy_from(&eq.thrust_1);
    u.fixed_rows_mut::<3>(3).copy_from(&eq.thrust_2);
    (s, u)
}

pub fn linearize(eq: &EquilibriumSpec, params: &SystemParams) -> Result<LinearModel> {
    linearize_with_step(eq, params, DEFAULT_FD_STEP)
}

/// Central-difference Jacobians with perturbation `h` (m, m/s and N alike).
pub fn linearize_with_step(eq: &EquilibriumSpec, params: &SystemParams, h: f64) -> Result<LinearModel> {
    let (s_bar, u_bar) = equilibrium_vectors(eq);
    let omega = eq.omega_c;
    // Linearize the smooth spring model; the slack clamp is inactive on a
    // taut equilibrium but would put a kink in the difference stencil.
    let smooth = SystemParams {
        slack_clamp: false,
        ..*params
    };
    let f = |s: &DVector<f64>, u: &DVector<f64>| rotating_frame_derivative(s, u, omega, &smooth);

    let residual = f(&s_bar, &u_bar)?.norm();
    if !(residual < EQUILIBRIUM_TOLERANCE) {
        return Err(Error::EquilibriumResidual { residual });
    }

    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    for j in 0..STATE_DIM {
        let mut plus = s_bar.clone();
        let mut minus = s_bar.clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (f(&plus, &u_bar)? - f(&minus, &u_bar)?) / (2.0 * h);
        a.set_column(j, &col);
    }
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    for j in 0..INPUT_DIM {
        let mut plus = u_bar.clone();
        let mut minus = u_bar.clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (f(&s_bar, &plus)? - f(&s_bar, &minus)?) / (2.0 * h);
        b.set_column(j, &col);
    }
    Ok(LinearModel {
        a,
        b,
        s_bar,
        u_bar,
        omega_c: omega,
    })
}

/// Solves `Mᵀ X + X M = −W` by a direct solve of the Kronecker-vectorized
/// system `(I ⊗ Mᵀ + Mᵀ ⊗ I) vec X = −vec W`.
pub fn solve_lyapunov(m: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = DVector::from_column_slice((-w).as_slice());
    let sol = op.lu().solve(&rhs).ok_or_else(|| Error::Synthesis {
        reason: "Lyapunov operator is singular (closed loop has eigenvalues λ_i + λ_j = 0)".into(),
        residuals: Vec::new(),
    })?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Largest real part of the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or_else(|| Error::Synthesis {
        reason: "Schur decomposition did not converge".into(),
        residuals: Vec::new(),
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

fn synthesis_error(reason: impl Into<String>, residuals: &[f64]) -> Error {
    Error::Synthesis {
        reason: reason.into(),
        residuals: residuals.to_vec(),
    }
}

/// Bass's construction: for `σ` beyond the leftmost eigenvalue of `A`, the
/// solution `Z` of `(A+σI)Z + Z(A+σI)ᵀ = 2BBᵀ` is positive definite for a
/// controllable pair and `K = BᵀZ⁻¹` places every closed-loop eigenvalue on
/// `Re λ = −σ`.
fn initial_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if spectral_abscissa(a)? < 0.0 {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| synthesis_error("Schur decomposition did not converge", &[]))?;
    let leftmost = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let sigma = (-leftmost).max(0.0) + 1.0;
    let shifted = a + DMatrix::identity(n, n) * sigma;
    let z = solve_lyapunov(&(-shifted.transpose()), &(b * b.transpose() * 2.0))?;
    let chol = z
        .cholesky()
        .ok_or_else(|| synthesis_error("(A, B) is not controllable: bootstrap Gramian is not positive definite", &[]))?;
    Ok(b.transpose() * chol.inverse())
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(synthesis_error("dimension mismatch between A, B, Q and R", &[]));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| synthesis_error("R is not positive definite", &[]))?;
    let bt = b.transpose();

    let mut k = initial_gain(a, b)?;
    let mut history = Vec::new();
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>, f64)> = None;
    for iteration in 1..=MAX_NEWTON_ITERATIONS {
        let closed = a - b * &k;
        let w = q + k.transpose() * r * &k;
        let p = solve_lyapunov(&closed, &w)?;
        k = r_chol.solve(&(&bt * &p));
        let residual = care_residual(a, b, q, r, &p);
        history.push(residual);
        if !residual.is_finite() {
            return Err(synthesis_error("Newton iteration diverged", &history));
        }
        let improved = best.as_ref().is_none_or(|(_, _, r)| residual < *r);
        if improved {
            best = Some((p, k.clone(), residual));
        }
        if residual < CARE_TOLERANCE {
            break;
        }
        // Once quadratic convergence has stalled at rounding level there is
        // nothing left to gain.
        let stalled = history.len() > 3 && history[history.len() - 3..].iter().all(|&h| h >= 0.5 * history[history.len() - 4]);
        if stalled && residual < CARE_ACCEPT {
            break;
        }
        if iteration == MAX_NEWTON_ITERATIONS && residual >= CARE_ACCEPT {
            return Err(synthesis_error("Newton iteration did not converge", &history));
        }
    }
    let (p, k, residual) = best.expect("at least one iteration ran");
    if residual >= CARE_ACCEPT {
        return Err(synthesis_error(format!("residual {residual:e} above {CARE_ACCEPT:e}"), &history));
    }
    if spectral_abscissa(&(a - b * &k))? >= 0.0 {
        return Err(synthesis_error("(A, B) is not stabilizable: closed loop is not Hurwitz", &history));
    }
    Ok(CareSolution {
        p,
        k,
        residual,
        iterations: history.len(),
        residual_history: history,
    })
}

/// `Q = diag(Q_p, Q_1, Q_2)` with each block `diag(5,5,5, 0,0,0)` (plus
/// `q_eps I`) and `R = diag(1.2, 1.2, 1, 1.2, 1.2, 1)`.
pub fn lqr_weights(params: &SystemParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let q_diag: Vec<f64> = (0..STATE_DIM)
        .map(|i| {
            let w = if i % 6 < 3 { POSITION_WEIGHT } else { VELOCITY_WEIGHT };
            w + params.q_eps
        })
        .collect();
    let r_diag: Vec<f64> = (0..INPUT_DIM).map(|i| THRUST_WEIGHTS[i % 3]).collect();
    (
        DMatrix::from_diagonal(&DVector::from_vec(q_diag)),
        DMatrix::from_diagonal(&DVector::from_vec(r_diag)),
    )
}

/// Everything the controller needs about one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub beta: f64,
    pub omega_c: f64,
    pub model: LinearModel,
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub care_residual: f64,
    pub spectral_abscissa: f64,
}

pub fn synthesize(eq: &EquilibriumSpec, params: &SystemParams) -> Result<GainSet> {
    let model = linearize(eq, params)?;
    let (q, r) = lqr_weights(params);
    let sol = solve_care(&model.a, &model.b, &q, &r)?;
    let abscissa = spectral_abscissa(&(&model.a - &model.b * &sol.k))?;
    let gains = GainSet {
        beta: eq.beta,
        omega_c: eq.omega_c,
        model,
        k: sol.k,
        p: sol.p,
        q,
        r,
        care_residual: sol.residual,
        spectral_abscissa: abscissa,
    };
    gains.check()?;
    Ok(gains)
}

impl GainSet {
    /// Verifies symmetry and semidefiniteness of `P`, the Riccati residual
    /// and closed-loop stability.
    pub fn check(&self) -> Result<()> {
        let fail = |reason: String| Err(synthesis_error(reason, &[self.care_residual]));
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-10 {
            return fail(format!("P is not symmetric (max asymmetry {asym:e})"));
        }
        let min_eig = symmetric_eigenvalues(&self.p)[0];
        if min_eig < -1e-10 * self.p.amax().max(1.0) {
            return fail(format!("P is indefinite (min eigenvalue {min_eig:e})"));
        }
        if !(self.care_residual < CARE_ACCEPT) {
            return fail(format!("CARE residual {:e} too large", self.care_residual));
        }
        if !(self.spectral_abscissa < 0.0) {
            return fail(format!("closed loop not Hurwitz (abscissa {})", self.spectral_abscissa));
        }
        Ok(())
    }

    /// Plain-text dump: scalar header lines, then each matrix as
    /// `matrix <name> <rows> <cols>` followed by row-major rows.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# tetherspin gain set\n");
        writeln!(out, "beta {}", self.beta).unwrap();
        writeln!(out, "omega_c {}", self.omega_c).unwrap();
        writeln!(out, "care_residual {}", self.care_residual).unwrap();
        writeln!(out, "spectral_abscissa {}", self.spectral_abscissa).unwrap();
        let s_bar = DMatrix::from_column_slice(STATE_DIM, 1, self.model.s_bar.as_slice());
        let u_bar = DMatrix::from_column_slice(INPUT_DIM, 1, self.model.u_bar.as_slice());
        for (name, m) in [
            ("A", &self.model.a),
            ("B", &self.model.b),
            ("s_bar", &s_bar),
            ("u_bar", &u_bar),
            ("K", &self.k),
            ("P", &self.p),
            ("Q", &self.q),
            ("R", &self.r),
        ] {
            writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                writeln!(out, "{}", cells.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::GainFormat(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut scalar = |name: &str| -> Result<f64> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{name}`")))?;
            match line.split_whitespace().collect::<Vec<_>>()[..] {
                [key, value] if key == name => value.parse().map_err(|_| bad(format!("bad value for `{name}`"))),
                _ => Err(bad(format!("expected `{name} <value>`, got `{line}`"))),
            }
        };
        let beta = scalar("beta")?;
        let omega_c = scalar("omega_c")?;
        let care_residual = scalar("care_residual")?;
        let spectral_abscissa = scalar("spectral_abscissa")?;

        let mut matrix = |name: &str| -> Result<DMatrix<f64>> {
            let header = lines.next().ok_or_else(|| bad(format!("missing matrix {name}")))?;
            let (rows, cols) = match header.split_whitespace().collect::<Vec<_>>()[..] {
                ["matrix", n, r, c] if n == name => (
                    r.parse::<usize>().map_err(|_| bad(format!("bad row count for {name}")))?,
                    c.parse::<usize>().map_err(|_| bad(format!("bad column count for {name}")))?,
                ),
                _ => return Err(bad(format!("expected `matrix {name} <rows> <cols>`, got `{header}`"))),
            };
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| bad(format!("matrix {name} is truncated")))?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(format!("bad number in matrix {name}")))?;
                if row.len() != cols {
                    return Err(bad(format!("matrix {name}: expected {cols} columns, got {}", row.len())));
                }
                values.extend(row);
            }
            Ok(DMatrix::from_row_slice(rows, cols, &values))
        };
        let a = matrix("A")?;
        let b = matrix("B")?;
        let s_bar = DVector::from_column_slice(matrix("s_bar")?.as_slice());
        let u_bar = DVector::from_column_slice(matrix("u_bar")?.as_slice());
        let k = matrix("K")?;
        let p = matrix("P")?;
        let q = matrix("Q")?;
        let r = matrix("R")?;
        Ok(GainSet {
            beta,
            omega_c,
            model: LinearModel {
                a,
                b,
                s_bar,
                u_bar,
                omega_c,
            },
            k,
            p,
            q,
            r,
            care_residual,
            spectral_abscissa,
        })
    }
}

/// Cache key for a gain set: hashes the operating point (exact bit
/// patterns) and the full parameter dump.
pub fn cache_key(beta: f64, omega_c: f64, params: &SystemParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(beta.to_bits().to_le_bytes());
    hasher.update(omega_c.to_bits().to_le_bytes());
    hasher.update(params.to_config_text().as_bytes());
    hasher.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory of gain dumps keyed by [`cache_key`].
#[derive(Debug, Clone)]
pub struct GainCache {
    dir: PathBuf,
}

impl GainCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        GainCache {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn path_for(&self, beta: f64, omega_c: f64, params: &SystemParams) -> PathBuf {
        self.dir.join(format!("{}.gains", cache_key(beta, omega_c, params)))
    }

    pub fn load_or_synthesize(&self, eq: &EquilibriumSpec, params: &SystemParams) -> Result<GainSet> {
        let path = self.path_for(eq.beta, eq.omega_c, params);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(gains) = GainSet::from_text(&text) {
                return Ok(gains);
            }
        }
        let gains = synthesize(eq, params)?;
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(&path, gains.to_text())?;
        Ok(gains)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{build_equilibrium, omega_star};
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn double_integrator() {
        let sol = solve_care(
            &m(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            &m(2, 1, &[0.0, 1.0]),
            &DMatrix::identity(2, 2),
            &m(1, 1, &[1.0]),
        )
        .unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(sol.p, m(2, 2, &[s3, 1.0, 1.0, s3]), epsilon = 1e-9);
        assert_relative_eq!(sol.k, m(1, 2, &[1.0, s3]), epsilon = 1e-9);
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn scalar_closed_form() {
        let sol = solve_care(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[4.0]), &m(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 2.0, epsilon = 1e-10);
        assert_relative_eq!(sol.k[(0, 0)], 2.0, epsilon = 1e-10);
        let sol = solve_care(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[3.0]), &m(1, 1, &[0.5])).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 1.5f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(sol.k[(0, 0)], 6f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn stable_plant_with_no_cost() {
        let sol = solve_care(
            &(-DMatrix::<f64>::identity(3, 3)),
            &DMatrix::identity(3, 3),
            &DMatrix::zeros(3, 3),
            &DMatrix::identity(3, 3),
        )
        .unwrap();
        assert!(sol.p.amax() < 1e-14);
        assert!(sol.k.amax() < 1e-14);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        // an unstable mode the input cannot reach
        let err = solve_care(
            &m(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            &m(2, 1, &[0.0, 1.0]),
            &DMatrix::identity(2, 2),
            &m(1, 1, &[1.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Synthesis { .. }), "{err}");
        let err = solve_care(
            &m(1, 1, &[0.0]),
            &m(1, 1, &[1.0]),
            &m(1, 1, &[1.0]),
            &m(1, 1, &[0.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Synthesis { .. }));
    }

    #[test]
    fn lyapunov_matches_residual() {
        let a = m(3, 3, &[-1.0, 2.0, 0.0, -0.5, -3.0, 1.0, 0.0, 0.2, -2.0]);
        let w = m(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let x = solve_lyapunov(&a, &w).unwrap();
        let res = a.transpose() * &x + &x * &a + &w;
        assert!(res.amax() < 1e-12);
    }

    #[test]
    fn jacobi_agrees_with_reference_eigensolver() {
        let a = m(4, 4, &[4.0, 1.0, -2.0, 2.0, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -2.0, 2.0, 1.0, -2.0, -1.0]);
        let ours = symmetric_eigenvalues(&a);
        let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&reference) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn weights_are_assembled_as_specified() {
        let (q, r) = lqr_weights(&SystemParams::default());
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                let expected = if i == j && i % 6 < 3 { 5.0 } else { 0.0 };
                assert_eq!(q[(i, j)], expected);
            }
        }
        assert_eq!(r, DMatrix::from_diagonal(&DVector::from_vec(vec![1.2, 1.2, 1.0, 1.2, 1.2, 1.0])));
        let (q, _) = lqr_weights(&SystemParams {
            q_eps: 0.1,
            ..SystemParams::default()
        });
        assert_eq!(q[(3, 3)], 0.1);
        assert_eq!(q[(0, 0)], 5.1);
    }

    #[test]
    fn static_linearization_has_kinematic_rows() {
        let p = SystemParams::default();
        let (eq, _, _) = build_equilibrium(30f64.to_radians(), 0.0, &p).unwrap();
        let lin = linearize(&eq, &p).unwrap();
        for body in 0..3 {
            for i in 0..3 {
                let row = 6 * body + i;
                for j in 0..STATE_DIM {
                    let expected = if j == row + 3 { 1.0 } else { 0.0 };
                    assert!((lin.a[(row, j)] - expected).abs() < 1e-8, "A[{row},{j}] = {}", lin.a[(row, j)]);
                }
            }
        }
        // thrust enters only the vehicles' velocity rows, as 1/m_q
        assert_relative_eq!(lin.b[(9, 0)], 1.0 / 0.7, epsilon = 1e-8);
        assert!(lin.b.rows(0, 6).amax() < 1e-8);
    }

    #[test]
    fn rotating_linearization_contains_the_coriolis_term() {
        let p = SystemParams::default();
        let b = 45f64.to_radians();
        let w = omega_star(b, &p).unwrap();
        let (eq, _, _) = build_equilibrium(b, w, &p).unwrap();
        let lin = linearize(&eq, &p).unwrap();
        for body in 0..3 {
            let o = 6 * body + 3;
            let block = lin.a.view((o, o), (3, 3)).clone_owned();
            let skew = (&block - block.transpose()) * 0.5;
            let expected = m(3, 3, &[0.0, 2.0 * w, 0.0, -2.0 * w, 0.0, 0.0, 0.0, 0.0, 0.0]);
            assert!((skew - expected).amax() < 1e-7, "body {body}");
        }
    }

    #[test]
    fn finite_difference_step_insensitivity() {
        let p = SystemParams::default();
        let b = 45f64.to_radians();
        let (eq, _, _) = build_equilibrium(b, omega_star(b, &p).unwrap(), &p).unwrap();
        let l1 = linearize_with_step(&eq, &p, 1e-6).unwrap();
        let l2 = linearize_with_step(&eq, &p, 2e-6).unwrap();
        assert!((&l1.a - &l2.a).amax() / l1.a.amax() < 1e-6);
        assert!((&l1.b - &l2.b).amax() / l1.b.amax() < 1e-6);
    }

    #[test]
    fn off_equilibrium_point_is_refused() {
        let p = SystemParams::default();
        let b = 45f64.to_radians();
        let (mut eq, _, _) = build_equilibrium(b, omega_star(b, &p).unwrap(), &p).unwrap();
        eq.omega_c *= 1.1;
        assert!(matches!(linearize(&eq, &p), Err(Error::EquilibriumResidual { .. })));
    }

    #[test]
    fn linearization_error_is_second_order() {
        let p = SystemParams::default();
        let b = 45f64.to_radians();
        let w = omega_star(b, &p).unwrap();
        let (eq, _, _) = build_equilibrium(b, w, &p).unwrap();
        let lin = linearize(&eq, &p).unwrap();
        let smooth = SystemParams {
            slack_clamp: false,
            ..p
        };
        // fixed pseudo-random direction
        let ds = DVector::from_fn(STATE_DIM, |i, _| ((i as f64 * 1.7).sin() * 7.3).fract());
        let du = DVector::from_fn(INPUT_DIM, |i, _| ((i as f64 * 2.3).cos() * 5.1).fract());
        let ds = &ds / ds.norm();
        let du = &du / du.norm();
        let f0 = rotating_frame_derivative(&lin.s_bar, &lin.u_bar, w, &smooth).unwrap();
        let err = |scale: f64| {
            let f = rotating_frame_derivative(&(&lin.s_bar + &ds * scale), &(&lin.u_bar + &du * scale), w, &smooth).unwrap();
            (f - &f0 - (&lin.a * &ds + &lin.b * &du) * scale).norm()
        };
        let (e1, e2) = (err(1e-3), err(1e-4));
        let slope = (e1 / e2).log10();
        assert!(slope >= 1.9, "slope {slope} ({e1:e}, {e2:e})");
    }

    #[test]
    fn text_dump_round_trips_and_caches() {
        let p = SystemParams::default();
        let b = 30f64.to_radians();
        let (eq, _, _) = build_equilibrium(b, 0.0, &p).unwrap();
        let gains = synthesize(&eq, &p).unwrap();
        let back = GainSet::from_text(&gains.to_text()).unwrap();
        assert_eq!(back, gains);
        assert!(GainSet::from_text("beta 1\n").is_err());

        let dir = tempfile::tempdir().unwrap();
        let cache = GainCache::new(dir.path());
        let first = cache.load_or_synthesize(&eq, &p).unwrap();
        assert!(cache.path_for(b, 0.0, &p).exists());
        let second = cache.load_or_synthesize(&eq, &p).unwrap();
        assert_eq!(first, second);
        assert_ne!(cache_key(b, 0.0, &p), cache_key(b, 0.1, &p));
        let heavier = SystemParams { m_p: 0.7, ..p };
        assert_ne!(cache_key(b, 0.0, &p), cache_key(b, 0.0, &heavier));
    }
}
