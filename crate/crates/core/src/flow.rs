//! Flow integration: trajectories, the variational (tangent) flow, level
//! anchors and limit classification.
//!
//! On a torus trajectories are integrated in unwrapped coordinates, so a
//! limit can be reported together with the lattice translation of the lift
//! it converges to.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::geometry::CriticalPoint;
use crate::linalg::gram_schmidt;
use crate::ode::{bracket_root, Control, DenseStep, Dopri5, OdeError};
use crate::scenario::{Potential, ScenarioSpace, VectorField};

/// A field together with the space it lives on and a Lyapunov function.
#[derive(Clone, Copy)]
pub struct FlowSystem<'a> {
    pub space: &'a ScenarioSpace,
    pub field: &'a dyn VectorField,
    pub potential: &'a dyn Potential,
    /// `1.0` for the forward flow, `-1.0` for the time-reversed flow.
    pub direction: f64,
}

impl<'a> FlowSystem<'a> {
    pub fn new(space: &'a ScenarioSpace, field: &'a dyn VectorField, potential: &'a dyn Potential) -> Self {
        Self {
            space,
            field,
            potential,
            direction: 1.0,
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            direction: -self.direction,
            ..*self
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    fn rhs(&self, y: &[f64], m: usize, dy: &mut [f64]) {
        let n = self.dim();
        let x = &y[..n];
        let v = self.field.eval(x);
        for i in 0..n {
            dy[i] = self.direction * v[i];
        }
        if m > 0 {
            let jac = self.field.jacobian(x);
            let frame = DMatrix::from_column_slice(n, m, &y[n..]);
            let prod = jac * frame * self.direction;
            dy[n..].copy_from_slice(prod.as_slice());
        }
    }

    /// `f` oriented so that it decreases along the (possibly reversed) flow.
    fn descent(&self, x: &[f64]) -> f64 {
        self.direction * self.potential.value(x)
    }
}

/// Integration tolerances and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    pub t_max: f64,
    pub escape_radius: f64,
    /// Accuracy of located level crossings, `|f - a|`.
    pub event_tol: f64,
    /// Ball radius for certifying convergence to a minimum.
    pub ball_radius: f64,
    /// Dwell ball for certifying convergence to a critical point of
    /// positive index.
    pub capture_radius: f64,
    /// Closest-approach distance below which a dwelling trajectory is
    /// treated as lying on the stable manifold.
    pub capture_floor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            t_max: 1e3,
            escape_radius: 1e6,
            event_tol: 1e-10,
            ball_radius: 1e-3,
            capture_radius: 1e-6,
            capture_floor: 1e-15,
        }
    }
}

impl FlowConfig {
    /// Tight tolerances for shooting, where trajectories must resolve
    /// passages very close to saddles.
    pub fn precise() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            ..Self::default()
        }
    }

    fn solver(&self) -> Dopri5<f64> {
        Dopri5::with_tolerances(self.rtol, self.atol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub t_max: f64,
    pub level: Option<f64>,
    pub ball: Option<(Vec<f64>, f64)>,
}

impl Stop {
    pub fn time(t_max: f64) -> Self {
        Self {
            t_max,
            level: None,
            ball: None,
        }
    }

    pub fn level(a: f64, t_max: f64) -> Self {
        Self {
            level: Some(a),
            ..Self::time(t_max)
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64, t_max: f64) -> Self {
        Self {
            ball: Some((center, radius)),
            ..Self::time(t_max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    ReachedLevel { level: f64 },
    EnteredBall,
    TimeLimit,
    Escaped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Step endpoints in unwrapped coordinates, starting at `t = 0`.
    pub samples: Vec<Sample>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn end(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }
}

#[derive(Debug, Clone)]
pub struct VariationalState {
    pub t: f64,
    pub x: Vec<f64>,
    /// Image of the supplied frame under the tangent map (columnwise).
    pub j: DMatrix<f64>,
}

fn ode_error(e: OdeError<f64>) -> MorseError {
    match e {
        OdeError::StepUnderflow { t, h } => MorseError::StepUnderflow { t, h },
        OdeError::TooManySteps { t } => MorseError::NonFinite(format!("step budget exhausted at t = {t}")),
        OdeError::NonFinite { t } => MorseError::NonFinite(format!("field not finite at t = {t}")),
    }
}

/// What an event callback wants after inspecting a step.
enum Action {
    Continue,
    Stop(f64),
}

/// Core driver: integrates state and optional frame, renormalizing the
/// frame after each step when asked.
fn drive<F>(
    sys: &FlowSystem,
    cfg: &FlowConfig,
    x0: &[f64],
    frame: Option<&DMatrix<f64>>,
    renormalize: bool,
    t_max: f64,
    mut on_step: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&DenseStep<f64>) -> Action,
{
    let n = sys.dim();
    if x0.len() != n {
        return Err(MorseError::Validation(format!(
            "start point has dimension {}, expected {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(MorseError::NonFinite(format!("start point {x0:?}")));
    }
    let m = frame.map_or(0, |f| f.ncols());
    let mut y0 = x0.to_vec();
    if let Some(f) = frame {
        y0.extend_from_slice(f.as_slice());
    }
    let solver = cfg.solver();
    let out = solver
        .integrate(
            |_, y, dy| sys.rhs(y, m, dy),
            0.0,
            &y0,
            t_max,
            |step| match on_step(step) {
                Action::Stop(t) => Control::StopAt(t),
                Action::Continue if renormalize && m > 0 => {
                    let mut y = step.y1.clone();
                    let f = DMatrix::from_column_slice(n, m, &y[n..]);
                    match gram_schmidt(&f, None) {
                        Some(q) => {
                            y[n..].copy_from_slice(q.as_slice());
                            Control::Replace(y)
                        }
                        None => Control::Continue,
                    }
                }
                Action::Continue => Control::Continue,
            },
        )
        .map_err(ode_error)?;
    Ok((out.t, out.y))
}

fn state_x(y: &[f64], n: usize) -> &[f64] {
    &y[..n]
}

/// Locate `t` in the step where `descent(x(t)) = target`, assuming the
/// crossing is bracketed by the step.
fn locate_level(sys: &FlowSystem, step: &DenseStep<f64>, level: f64, tol: f64) -> f64 {
    let n = sys.dim();
    let target = sys.direction * level;
    let g = |t: f64| sys.descent(state_x(&step.eval(t), n)) - target;
    let ga = g(step.t0);
    let gb = g(step.t1());
    bracket_root(g, step.t0, ga, step.t1(), gb, tol)
}

fn euclid_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate from `x0` until one of the stop conditions fires.
pub fn integrate(sys: &FlowSystem, x0: &[f64], stop: &Stop, cfg: &FlowConfig) -> Result<Trajectory> {
    let (traj, _) = integrate_impl(sys, x0, None, false, stop, cfg)?;
    Ok(traj)
}

/// Integrate the flow jointly with the tangent map applied to `frame`.
///
/// With `renormalize` the transported frame is re-orthonormalized after
/// every step by an orientation-preserving Gram-Schmidt pass; the spans of
/// all leading column subsets are unchanged.
pub fn integrate_variational(
    sys: &FlowSystem,
    x0: &[f64],
    frame: &DMatrix<f64>,
    renormalize: bool,
    stop: &Stop,
    cfg: &FlowConfig,
) -> Result<(Trajectory, VariationalState)> {
    let (traj, state) = integrate_impl(sys, x0, Some(frame), renormalize, stop, cfg)?;
    Ok((traj, state.expect("frame supplied")))
}

fn integrate_impl(
    sys: &FlowSystem,
    x0: &[f64],
    frame: Option<&DMatrix<f64>>,
    renormalize: bool,
    stop: &Stop,
    cfg: &FlowConfig,
) -> Result<(Trajectory, Option<VariationalState>)> {
    let n = sys.dim();
    if let Some(a) = stop.level {
        if sys.descent(x0) <= sys.direction * a {
            return Err(MorseError::Precondition(format!(
                "start value {} is already past level {a}",
                sys.potential.value(x0)
            )));
        }
    }
    let mut samples = vec![Sample {
        t: 0.0,
        x: x0.to_vec(),
    }];
    let mut terminal = Terminal::TimeLimit;
    let escape = !sys.space.is_torus();
    let (t, y) = drive(sys, cfg, x0, frame, renormalize, stop.t_max, |step| {
        let x1 = state_x(&step.y1, n);
        if let Some(a) = stop.level {
            if sys.descent(x1) <= sys.direction * a {
                terminal = Terminal::ReachedLevel { level: a };
                return Action::Stop(locate_level(sys, step, a, cfg.event_tol));
            }
        }
        if let Some((c, r)) = &stop.ball {
            let dist = |t: f64| sys.space.distance(state_x(&step.eval(t), n), c) - r;
            let probes = [0.25, 0.5, 0.75, 1.0];
            let mut prev_t = step.t0;
            let mut prev_g = dist(prev_t);
            for theta in probes {
                let t = step.t0 + theta * step.h;
                let g = dist(t);
                if g <= 0.0 {
                    terminal = Terminal::EnteredBall;
                    return Action::Stop(bracket_root(dist, prev_t, prev_g, t, g, 1e-3 * r));
                }
                prev_t = t;
                prev_g = g;
            }
        }
        samples.push(Sample {
            t: step.t1(),
            x: x1.to_vec(),
        });
        if escape && euclid_norm(x1) > cfg.escape_radius {
            terminal = Terminal::Escaped;
            return Action::Stop(step.t1());
        }
        Action::Continue
    })?;
    let x_end = y[..n].to_vec();
    if samples.last().map(|s| s.t) != Some(t) {
        samples.push(Sample { t, x: x_end.clone() });
    }
    let state = frame.map(|f| VariationalState {
        t,
        x: x_end,
        j: DMatrix::from_column_slice(n, f.ncols(), &y[n..]),
    });
    Ok((Trajectory { samples, terminal }, state))
}

/// Points where the trajectory from `x0` crosses each of `levels`
/// (descending). Stops after the last level; missing crossings are `None`.
pub fn level_anchors(sys: &FlowSystem, x0: &[f64], levels: &[f64], cfg: &FlowConfig) -> Result<Vec<Option<Vec<f64>>>> {
    let n = sys.dim();
    let mut anchors = vec![None; levels.len()];
    let mut next = levels
        .iter()
        .position(|&a| sys.descent(x0) > sys.direction * a)
        .unwrap_or(levels.len());
    if next == levels.len() {
        return Ok(anchors);
    }
    drive(sys, cfg, x0, None, false, cfg.t_max, |step| {
        while next < levels.len() && sys.descent(state_x(&step.y1, n)) <= sys.direction * levels[next] {
            let t = locate_level(sys, step, levels[next], cfg.event_tol);
            anchors[next] = Some(state_x(&step.eval(t), n).to_vec());
            next += 1;
        }
        if next == levels.len() {
            Action::Stop(step.t1())
        } else {
            Action::Continue
        }
    })?;
    Ok(anchors)
}

/// Limit of a forward trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    /// Converges to the lift `location + offset * period` of a critical point.
    Critical { id: usize, offset: Vec<i64>, time: f64 },
    Escaped { time: f64 },
    Unresolved,
}

impl Limit {
    pub fn critical_id(&self) -> Option<usize> {
        match self {
            Limit::Critical { id, .. } => Some(*id),
            _ => None,
        }
    }

    /// Class key comparing limits including the lift.
    pub fn class(&self) -> LimitClass {
        match self {
            Limit::Critical { id, offset, .. } => LimitClass::Critical(*id, offset.clone()),
            Limit::Escaped { .. } => LimitClass::Escaped,
            Limit::Unresolved => LimitClass::Unresolved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LimitClass {
    Critical(usize, Vec<i64>),
    Escaped,
    Unresolved,
}

/// Closest approach of a trajectory to a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub distance: f64,
    pub time: f64,
    /// Unwrapped trajectory point realizing the distance.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub limit: Limit,
    /// Indexed by critical id.
    pub closest: Vec<Approach>,
}

/// Critical points plus the data used for trapping certificates: the value
/// gap above each point and the slowest linear rate of the field there.
pub struct LimitContext<'a> {
    pub points: &'a [CriticalPoint],
    gaps: Vec<f64>,
    rates: Vec<f64>,
}

impl<'a> LimitContext<'a> {
    pub fn new(points: &'a [CriticalPoint], sys: &FlowSystem) -> Self {
        let gaps = points
            .iter()
            .map(|q| {
                points
                    .iter()
                    .map(|r| r.value - q.value)
                    .filter(|&d| d > 1e-12)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let rates = points
            .iter()
            .map(|q| {
                sys.field
                    .jacobian(&q.location)
                    .complex_eigenvalues()
                    .iter()
                    .map(|l| l.re.abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Self { points, gaps, rates }
    }

    /// Time a trajectory must stay within `radius` of point `i` before it
    /// counts as converging there: a passage at distance `d` lasts about
    /// `2 ln(radius / d) / rate`, so this only admits `d <= floor`.
    fn dwell(&self, i: usize, cfg: &FlowConfig) -> f64 {
        2.0 * (cfg.capture_radius / cfg.capture_floor).ln() / self.rates[i]
    }
}

/// Integrate forward until the trajectory is certified to converge to a
/// critical point.
///
/// Minima are certified inside `ball_radius` below the next critical value
/// (a Lyapunov trap). Points of positive index are certified when the
/// trajectory dwells inside `capture_radius` long enough that a passing
/// trajectory would have to come within `capture_floor`.
pub fn classify_limit(sys: &FlowSystem, x0: &[f64], ctx: &LimitContext, cfg: &FlowConfig) -> Result<Classification> {
    let n = sys.dim();
    let points = ctx.points;
    let mut closest: Vec<Approach> = points
        .iter()
        .map(|q| Approach {
            distance: sys.space.distance(x0, &q.location),
            time: 0.0,
            point: x0.to_vec(),
        })
        .collect();
    let trapped = |x: &[f64], d: &[f64]| -> Option<usize> {
        let fx = sys.potential.value(x);
        (0..points.len()).find(|&i| {
            let q = &points[i];
            (q.index == 0 && d[i] <= cfg.ball_radius && fx < q.value + ctx.gaps[i]) || d[i] == 0.0
        })
    };
    let dists: Vec<f64> = closest.iter().map(|a| a.distance).collect();
    if let Some(i) = trapped(x0, &dists) {
        return Ok(Classification {
            limit: Limit::Critical {
                id: points[i].id,
                offset: sys.space.lattice_offset(&points[i].location, x0),
                time: 0.0,
            },
            closest,
        });
    }
    let mut inside_since: Vec<Option<f64>> = vec![None; points.len()];
    let mut limit = Limit::Unresolved;
    let escape = !sys.space.is_torus();
    drive(sys, cfg, x0, None, false, cfg.t_max, |step| {
        let x1 = state_x(&step.y1, n);
        let t1 = step.t1();
        let d: Vec<f64> = points.iter().map(|q| sys.space.distance(x1, &q.location)).collect();
        for (a, &di) in closest.iter_mut().zip(&d) {
            if di < a.distance {
                a.distance = di;
                a.time = t1;
                a.point = x1.to_vec();
            }
        }
        let mut found = trapped(x1, &d);
        for i in 0..points.len() {
            if points[i].index == 0 {
                continue;
            }
            if d[i] <= cfg.capture_radius {
                let since = *inside_since[i].get_or_insert(step.t0);
                if found.is_none() && t1 - since >= ctx.dwell(i, cfg) {
                    found = Some(i);
                }
            } else {
                inside_since[i] = None;
            }
        }
        if let Some(i) = found {
            limit = Limit::Critical {
                id: points[i].id,
                offset: sys.space.lattice_offset(&points[i].location, x1),
                time: t1,
            };
            return Action::Stop(t1);
        }
        if escape && euclid_norm(x1) > cfg.escape_radius {
            limit = Limit::Escaped { time: t1 };
            return Action::Stop(t1);
        }
        Action::Continue
    })?;
    Ok(Classification { limit, closest })
}

/// Direction of a comparison check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    /// `y' <= F(t, y)` implies `y <= x`.
    Upper,
    /// `y' >= F(t, y)` implies `y >= x`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Largest signed violation `y - x` (Upper) or `x - y` (Lower).
    pub max_violation: f64,
    pub worst_time: f64,
}

/// Check samples `(t, y)` of a sub- or super-solution against the solution
/// of `x' = F(t, x)`, `x(t_0) = x0`, allowing slack `1e-8`.
pub fn comparison_oracle<F>(f: F, x0: f64, samples: &[(f64, f64)], direction: Comparison) -> Result<ComparisonReport>
where
    F: Fn(f64, f64) -> f64,
{
    let mut report = ComparisonReport {
        holds: true,
        max_violation: f64::NEG_INFINITY,
        worst_time: 0.0,
    };
    if samples.is_empty() {
        return Ok(report);
    }
    let t0 = samples[0].0;
    let t_end = samples.iter().map(|s| s.0).fold(t0, f64::max);
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut idx = 0;
    let record = |t: f64, x: f64, y: f64, report: &mut ComparisonReport| {
        let v = match direction {
            Comparison::Upper => y - x,
            Comparison::Lower => x - y,
        };
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_time = t;
        }
    };
    while idx < sorted.len() && sorted[idx].0 <= t0 {
        record(sorted[idx].0, x0, sorted[idx].1, &mut report);
        idx += 1;
    }
    if t_end > t0 {
        let solver = Dopri5::with_tolerances(1e-12, 1e-12);
        solver
            .integrate(
                |t, y, dy| dy[0] = f(t, y[0]),
                t0,
                &[x0],
                t_end,
                |step| {
                    while idx < sorted.len() && sorted[idx].0 <= step.t1() {
                        let t = sorted[idx].0;
                        record(t, step.eval(t)[0], sorted[idx].1, &mut report);
                        idx += 1;
                    }
                    Control::Continue
                },
            )
            .map_err(ode_error)?;
    }
    report.holds = report.max_violation <= 1e-8;
    Ok(report)
}

/// Regular levels between consecutive distinct critical values
/// (midpoints), in descending order.
pub fn regular_levels(points: &[CriticalPoint]) -> Vec<f64> {
    let mut values: Vec<f64> = points.iter().map(|p| p.value).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalform::ModelField;
    use crate::scenario::{catalog, MetricFieldSpec};

    #[test]
    fn linear_model_matches_exponential() {
        let m = ModelField::planar(1.0, 1.0, 1.0, 0.5).unwrap();
        let pot = m.potential();
        let space = ScenarioSpace::euclidean(2).unwrap();
        let sys = FlowSystem::new(&space, &m, &pot);
        let cfg = FlowConfig {
            rtol: 1e-12,
            atol: 1e-14,
            ..FlowConfig::default()
        };
        let eps = 1e-3;
        let (traj, state) =
            integrate_variational(&sys, &[eps, 1.0], &DMatrix::identity(2, 2), false, &Stop::time(3.0), &cfg).unwrap();
        let end = traj.end();
        assert_eq!(end.t, 3.0);
        assert!((end.x[0] - eps * 3f64.exp()).abs() < 1e-8);
        assert!((end.x[1] - (-3f64).exp()).abs() < 1e-8);
        assert!((state.j[(0, 0)] - 3f64.exp()).abs() < 1e-8 * 3f64.exp());
        assert!((state.j[(1, 1)] - (-3f64).exp()).abs() < 1e-8);
        assert!(state.j[(0, 1)].abs() < 1e-12 && state.j[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn level_event_is_accurate() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let field = s.negative_gradient_field();
        let sys = FlowSystem::new(s.space(), &field, &s);
        let traj = integrate(&sys, &[0.25, 0.1], &Stop::level(0.0, 1e3), &FlowConfig::default());
        // f(0.25, 0.1) = cos(0.2 pi) > 0, so level 0 is below the start.
        let traj = traj.unwrap();
        assert_eq!(traj.terminal, Terminal::ReachedLevel { level: 0.0 });
        assert!(s.value(&traj.end().x).abs() <= 1e-10);
    }

    #[test]
    fn critical_start_is_constant() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let field = s.negative_gradient_field();
        let sys = FlowSystem::new(s.space(), &field, &s);
        let traj = integrate(&sys, &[0.0, 0.0], &Stop::time(5.0), &FlowConfig::default()).unwrap();
        assert_eq!(traj.terminal, Terminal::TimeLimit);
        assert!(traj.samples.iter().all(|p| p.x == vec![0.0, 0.0]));
        // sin(pi) is not exactly zero, so the saddle only stays put to the
        // integration tolerance.
        let traj = integrate(&sys, &[0.5, 0.0], &Stop::time(5.0), &FlowConfig::default()).unwrap();
        assert!(traj.samples.iter().all(|p| s.space().distance(&p.x, &[0.5, 0.0]) < 1e-8));
    }

    #[test]
    fn torus_limits() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let pts = crate::geometry::find_critical_points(&s, 8).unwrap();
        let field = s.negative_gradient_field();
        let sys = FlowSystem::new(s.space(), &field, &s);
        let ctx = LimitContext::new(&pts, &sys);
        let cfg = FlowConfig::default();
        let min = pts.iter().find(|p| p.index == 0).unwrap().id;
        let saddle = pts.iter().find(|p| p.location == vec![0.5, 0.0]).unwrap().id;

        let c = classify_limit(&sys, &[0.251, 0.001], &ctx, &cfg).unwrap();
        assert_eq!(c.limit.class(), LimitClass::Critical(min, vec![0, 0]));
        let c = classify_limit(&sys, &[0.3, 0.0], &ctx, &cfg).unwrap();
        assert_eq!(c.limit.critical_id(), Some(saddle));
        let c = classify_limit(&sys, &[0.5, 0.5], &ctx, &cfg).unwrap();
        assert_eq!(c.limit, Limit::Critical { id: min, offset: vec![0, 0], time: 0.0 });
        let c = classify_limit(&sys, &[-0.251, -0.001], &ctx, &cfg).unwrap();
        assert_eq!(c.limit.class(), LimitClass::Critical(min, vec![-1, -1]));
    }

    #[test]
    fn comparison_examples() {
        let samples: Vec<(f64, f64)> = (0..=20).map(|i| (0.1 * i as f64, 1.0)).collect();
        assert!(comparison_oracle(|_, x| x, 1.0, &samples, Comparison::Upper).unwrap().holds);
        let exact: Vec<(f64, f64)> = (0..=20).map(|i| (0.1 * i as f64, (0.1 * i as f64).exp())).collect();
        assert!(comparison_oracle(|_, x| x, 1.0, &exact, Comparison::Upper).unwrap().holds);
        assert!(comparison_oracle(|_, x| x, 1.0, &exact, Comparison::Lower).unwrap().holds);
        let fast: Vec<(f64, f64)> = (0..=20).map(|i| (0.1 * i as f64, (-0.2 * i as f64).exp())).collect();
        assert!(comparison_oracle(|_, x| -x, 1.0, &fast, Comparison::Upper).unwrap().holds);
        assert!(!comparison_oracle(|_, x| -x, 1.0, &fast, Comparison::Lower).unwrap().holds);
    }

    #[test]
    fn regular_levels_are_midpoints() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let pts = crate::geometry::find_critical_points(&s, 8).unwrap();
        assert_eq!(regular_levels(&pts), vec![1.0, -1.0]);
    }
}
