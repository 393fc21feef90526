//! Orientation signs of connecting orbits and transversality margins.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::flow::{integrate_variational, FlowConfig, FlowSystem, Stop};
use crate::geometry::CriticalPoint;
use crate::linalg::{gram_schmidt, min_norm_solve, null_space, gram_volume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignData {
    pub sign: i32,
    /// Determinant of the change of basis `[u | V']` in the frame of
    /// `T D(p)`, with unit columns.
    pub det: f64,
    /// Volume spanned by orthonormal bases of `T D(p)` and `T A(q)` inside
    /// the tangent space of the level set.
    pub margin: f64,
}

/// Sign of the connection `p -> q` through `seed`, evaluated on level `a`.
///
/// `approach` is a point of the connecting trajectory close to `q`; it is
/// only used when `q` has positive index.
pub fn compute_sign(
    sys: &FlowSystem,
    p: &CriticalPoint,
    q: &CriticalPoint,
    seed: &[f64],
    level: f64,
    approach: &[f64],
    cfg: &FlowConfig,
    det_tol: f64,
) -> Result<SignData> {
    compute_sign_with_frames(sys, &p.neg_matrix(), q, &q.neg_matrix(), seed, level, approach, cfg, det_tol)
}

/// [`compute_sign`] with explicit orientation frames for `D(p)` and `D(q)`.
#[allow(clippy::too_many_arguments)]
pub fn compute_sign_with_frames(
    sys: &FlowSystem,
    p_frame: &DMatrix<f64>,
    q: &CriticalPoint,
    q_frame: &DMatrix<f64>,
    seed: &[f64],
    level: f64,
    approach: &[f64],
    cfg: &FlowConfig,
    det_tol: f64,
) -> Result<SignData> {
    let n = sys.dim();
    let k = p_frame.ncols();
    if q_frame.ncols() + 1 != k {
        return Err(MorseError::Precondition(format!(
            "sign needs index difference one, got {} and {}",
            k,
            q_frame.ncols()
        )));
    }
    let (traj, fwd) = integrate_variational(sys, seed, p_frame, true, &Stop::level(level, cfg.t_max), cfg)?;
    if !matches!(traj.terminal, crate::flow::Terminal::ReachedLevel { .. }) {
        return Err(MorseError::TransversalitySuspect(format!(
            "connection from {seed:?} never reaches level {level}"
        )));
    }
    let y = fwd.x.clone();
    let u_frame = gram_schmidt(&fwd.j, None)
        .ok_or_else(|| MorseError::TransversalitySuspect("transported frame of D(p) degenerated".into()))?;
    let u = sys.field.eval(&y).normalize() * sys.direction;
    let grad = sys.potential.gradient(&y).normalize();

    let coords_u = u_frame.transpose() * &u;
    let ind_q = q_frame.ncols();

    let (det, w_frame) = if ind_q == 0 {
        (coords_u[0], DMatrix::identity(n, n))
    } else {
        // Transport [pos(q) | frame(q)] backward to the level; the leading
        // columns keep spanning T A(q) under Gram-Schmidt.
        let pos = q.pos_matrix();
        let mut start = DMatrix::zeros(n, n);
        start.view_mut((0, 0), (n, n - ind_q)).copy_from(&pos);
        start.view_mut((0, n - ind_q), (n, ind_q)).copy_from(q_frame);
        let back = sys.reversed();
        let (btraj, bwd) = integrate_variational(&back, approach, &start, true, &Stop::level(level, cfg.t_max), cfg)?;
        if !matches!(btraj.terminal, crate::flow::Terminal::ReachedLevel { .. }) {
            return Err(MorseError::TransversalitySuspect(format!(
                "backward orbit from {approach:?} never reaches level {level}"
            )));
        }
        let gap = sys.space.distance(&bwd.x, &y);
        if gap > 1e-4 {
            return Err(MorseError::TransversalitySuspect(format!(
                "forward and backward orbits meet level {level} {gap:e} apart"
            )));
        }
        let frame = gram_schmidt(&bwd.j, None)
            .ok_or_else(|| MorseError::TransversalitySuspect("transported frame of A(q) degenerated".into()))?;
        let w = frame.columns(0, n - ind_q).into_owned();
        let v = frame.columns(n - ind_q, ind_q).into_owned();
        let mut basis = DMatrix::zeros(n, k + n - ind_q);
        basis.view_mut((0, 0), (n, k)).copy_from(&u_frame);
        basis.view_mut((0, k), (n, n - ind_q)).copy_from(&w);
        let mut m = DMatrix::zeros(k, k);
        m.set_column(0, &coords_u);
        for j in 0..ind_q {
            let sol = min_norm_solve(&basis, &v.column(j).into_owned())?;
            let a: DVector<f64> = sol.rows(0, k).into_owned();
            let norm = a.norm();
            if !(norm > 0.0) {
                return Err(MorseError::TransversalitySuspect(
                    "normal frame of A(q) has no component in T D(p)".into(),
                ));
            }
            m.set_column(j + 1, &(a / norm));
        }
        (m.determinant(), w)
    };
    if !(det.abs() >= det_tol) {
        return Err(MorseError::TransversalitySuspect(format!(
            "change-of-basis determinant {det:e} at {y:?}"
        )));
    }

    let level_part = |frame: &DMatrix<f64>| {
        let row = DMatrix::from_row_slice(1, frame.ncols(), (grad.transpose() * frame).as_slice());
        let coeffs = null_space(&row, 1e-12);
        frame * coeffs
    };
    let d_part = level_part(&u_frame);
    let a_part = level_part(&w_frame);
    let mut joint = DMatrix::zeros(n, d_part.ncols() + a_part.ncols());
    joint.view_mut((0, 0), (n, d_part.ncols())).copy_from(&d_part);
    joint.view_mut((0, d_part.ncols()), (n, a_part.ncols())).copy_from(&a_part);
    let margin = if joint.ncols() > n { 0.0 } else { gram_volume(&joint) };

    Ok(SignData {
        sign: if det > 0.0 { 1 } else { -1 },
        det: det.abs(),
        margin,
    })
}
