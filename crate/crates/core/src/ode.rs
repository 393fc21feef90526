//! Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output.
//!
//! The integrator is generic over the floating point type. Every accepted
//! step is handed to an observer together with its interpolation
//! polynomial, which lets callers locate events (level crossings, ball
//! entries) to much better accuracy than the step grid.

use num_traits::Float;

#[inline]
fn c<T: Float>(v: f64) -> T {
    T::from(v).unwrap()
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError<T> {
    StepUnderflow { t: T, h: T },
    TooManySteps { t: T },
    NonFinite { t: T },
}

/// One accepted step with its fourth-order interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<T> {
    pub t0: T,
    pub h: T,
    pub y0: Vec<T>,
    pub y1: Vec<T>,
    rcont: [Vec<T>; 4],
}

impl<T: Float> DenseStep<T> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    /// State at `t`, which should lie within `[t0, t0 + h]`.
    pub fn eval(&self, t: T) -> Vec<T> {
        let theta = if self.h == T::zero() {
            T::zero()
        } else {
            (t - self.t0) / self.h
        };
        self.eval_theta(theta)
    }

    pub fn eval_theta(&self, theta: T) -> Vec<T> {
        let one = T::one();
        let th1 = one - theta;
        let [r2, r3, r4, r5] = &self.rcont;
        (0..self.y0.len())
            .map(|i| {
                self.y0[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])))
            })
            .collect()
    }
}

/// What the observer wants after seeing a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Control<T> {
    Continue,
    /// Terminate; the final state is the dense-output state at this time.
    StopAt(T),
    /// Continue from a replaced end-of-step state (used for frame
    /// re-orthonormalization of variational states).
    Replace(Vec<T>),
}

#[derive(Debug, Clone)]
pub struct Outcome<T> {
    pub t: T,
    pub y: Vec<T>,
    pub steps: usize,
    /// True when the observer requested termination before `t_end`.
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: Option<T>,
    pub h_max: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Float> Default for Dopri5<T> {
    fn default() -> Self {
        Self {
            rtol: c(1e-9),
            atol: c(1e-9),
            h_init: None,
            h_max: T::infinity(),
            h_min: c(1e-14),
            max_steps: 2_000_000,
        }
    }
}

impl<T: Float> Dopri5<T> {
    pub fn with_tolerances(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn error_norm(&self, y0: &[T], y1: &[T], err: &[T]) -> T {
        let n = y0.len().max(1);
        let mut acc = T::zero();
        for i in 0..y0.len() {
            let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            acc = acc + e * e;
        }
        (acc / T::from(n).unwrap()).sqrt()
    }

    fn initial_step<F>(&self, rhs: &mut F, t0: T, y0: &[T], f0: &[T], span: T) -> T
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        // Hairer-Norsett-Wanner starting step heuristic.
        let n = y0.len();
        let mut d0 = T::zero();
        let mut d1 = T::zero();
        for i in 0..n {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 = d0 + (y0[i] / sc).powi(2);
            d1 = d1 + (f0[i] / sc).powi(2);
        }
        let nn = T::from(n.max(1)).unwrap();
        d0 = (d0 / nn).sqrt();
        d1 = (d1 / nn).sqrt();
        let tiny: T = c(1e-5);
        let mut h0 = if d0 < tiny || d1 < tiny {
            c(1e-6)
        } else {
            c::<T>(0.01) * d0 / d1
        };
        h0 = h0.min(span);
        let y1: Vec<T> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
        let mut f1 = vec![T::zero(); n];
        rhs(t0 + h0, &y1, &mut f1);
        let mut d2 = T::zero();
        for i in 0..n {
            let sc = self.atol + self.rtol * y0[i].abs();
            d2 = d2 + ((f1[i] - f0[i]) / sc).powi(2);
        }
        d2 = (d2 / nn).sqrt() / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= c(1e-15) {
            (h0 * c(1e-3)).max(c(1e-6))
        } else {
            (c::<T>(0.01) / dmax).powf(c(0.2))
        };
        (h0 * c(100.0)).min(h1).min(span).min(self.h_max)
    }

    /// Integrate `y' = rhs(t, y)` from `t0` to `t_end` (`t_end > t0`).
    ///
    /// The observer is called after every accepted step.
    pub fn integrate<F, O>(
        &self,
        mut rhs: F,
        t0: T,
        y0: &[T],
        t_end: T,
        mut observer: O,
    ) -> Result<Outcome<T>, OdeError<T>>
    where
        F: FnMut(T, &[T], &mut [T]),
        O: FnMut(&DenseStep<T>) -> Control<T>,
    {
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        if t_end <= t0 {
            return Ok(Outcome {
                t,
                y,
                steps: 0,
                stopped: false,
            });
        }
        let mut k1 = vec![T::zero(); n];
        let mut k2 = vec![T::zero(); n];
        let mut k3 = vec![T::zero(); n];
        let mut k4 = vec![T::zero(); n];
        let mut k5 = vec![T::zero(); n];
        let mut k6 = vec![T::zero(); n];
        let mut k7 = vec![T::zero(); n];
        let mut ytmp = vec![T::zero(); n];
        let mut y1 = vec![T::zero(); n];
        let mut err = vec![T::zero(); n];

        rhs(t, &y, &mut k1);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        let mut h = match self.h_init {
            Some(h) => h,
            None => self.initial_step(&mut rhs, t, &y, &k1, t_end - t0),
        };
        let mut steps = 0usize;
        let mut reject_streak = false;

        loop {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps { t });
            }
            let remaining = t_end - t;
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            if h < self.h_min * (T::one() + t.abs()) && !last {
                return Err(OdeError::StepUnderflow { t, h });
            }

            for i in 0..n {
                ytmp[i] = y[i] + h * c::<T>(A21) * k1[i];
            }
            rhs(t + c::<T>(C2) * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (c::<T>(A31) * k1[i] + c::<T>(A32) * k2[i]);
            }
            rhs(t + c::<T>(C3) * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (c::<T>(A41) * k1[i] + c::<T>(A42) * k2[i] + c::<T>(A43) * k3[i]);
            }
            rhs(t + c::<T>(C4) * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (c::<T>(A51) * k1[i]
                        + c::<T>(A52) * k2[i]
                        + c::<T>(A53) * k3[i]
                        + c::<T>(A54) * k4[i]);
            }
            rhs(t + c::<T>(C5) * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (c::<T>(A61) * k1[i]
                        + c::<T>(A62) * k2[i]
                        + c::<T>(A63) * k3[i]
                        + c::<T>(A64) * k4[i]
                        + c::<T>(A65) * k5[i]);
            }
            rhs(t + h, &ytmp, &mut k6);
            for i in 0..n {
                y1[i] = y[i]
                    + h * (c::<T>(A71) * k1[i]
                        + c::<T>(A73) * k3[i]
                        + c::<T>(A74) * k4[i]
                        + c::<T>(A75) * k5[i]
                        + c::<T>(A76) * k6[i]);
            }
            rhs(t + h, &y1, &mut k7);
            for i in 0..n {
                err[i] = h
                    * (c::<T>(E1) * k1[i]
                        + c::<T>(E3) * k3[i]
                        + c::<T>(E4) * k4[i]
                        + c::<T>(E5) * k5[i]
                        + c::<T>(E6) * k6[i]
                        + c::<T>(E7) * k7[i]);
            }
            let en = self.error_norm(&y, &y1, &err);
            if !en.is_finite() {
                // Shrink hard; a blow-up inside the step is usually a too-large h.
                h = h * c(0.1);
                reject_streak = true;
                if h < self.h_min {
                    return Err(OdeError::NonFinite { t });
                }
                continue;
            }

            if en <= T::one() {
                steps += 1;
                let mut rcont2 = vec![T::zero(); n];
                let mut rcont3 = vec![T::zero(); n];
                let mut rcont4 = vec![T::zero(); n];
                let mut rcont5 = vec![T::zero(); n];
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont2[i] = ydiff;
                    rcont3[i] = bspl;
                    rcont4[i] = ydiff - h * k7[i] - bspl;
                    rcont5[i] = h
                        * (c::<T>(D1) * k1[i]
                            + c::<T>(D3) * k3[i]
                            + c::<T>(D4) * k4[i]
                            + c::<T>(D5) * k5[i]
                            + c::<T>(D6) * k6[i]
                            + c::<T>(D7) * k7[i]);
                }
                let step = DenseStep {
                    t0: t,
                    h,
                    y0: y.clone(),
                    y1: y1.clone(),
                    rcont: [rcont2, rcont3, rcont4, rcont5],
                };
                match observer(&step) {
                    Control::Continue => {
                        t = t + h;
                        std::mem::swap(&mut y, &mut y1);
                        std::mem::swap(&mut k1, &mut k7);
                    }
                    Control::StopAt(ts) => {
                        let ts = ts.max(step.t0).min(step.t1());
                        return Ok(Outcome {
                            t: ts,
                            y: step.eval(ts),
                            steps,
                            stopped: true,
                        });
                    }
                    Control::Replace(ynew) => {
                        t = t + h;
                        y = ynew;
                        rhs(t, &y, &mut k1);
                    }
                }
                if last || t >= t_end {
                    return Ok(Outcome {
                        t,
                        y,
                        steps,
                        stopped: false,
                    });
                }
                let mut fac = c::<T>(0.9) * en.max(c(1e-10)).powf(c(-0.2));
                fac = fac.min(c(10.0)).max(c(0.2));
                if reject_streak {
                    fac = fac.min(T::one());
                }
                reject_streak = false;
                h = (h * fac).min(self.h_max);
            } else {
                let fac = (c::<T>(0.9) * en.powf(c(-0.2))).max(c(0.2));
                h = h * fac;
                reject_streak = true;
            }
        }
    }
}

/// Locate a root of `g` on `[a, b]` given `g(a)` and `g(b)` of opposite
/// sign (Illinois variant of regula falsi with a bisection safeguard).
pub fn bracket_root<T, G>(mut g: G, mut a: T, mut ga: T, mut b: T, mut gb: T, gtol: T) -> T
where
    T: Float,
    G: FnMut(T) -> T,
{
    if ga == T::zero() {
        return a;
    }
    if gb == T::zero() {
        return b;
    }
    let two = c::<T>(2.0);
    let mut side = 0i8;
    for iter in 0..200 {
        let mut m = if iter % 4 == 3 {
            (a + b) / two
        } else {
            (a * gb - b * ga) / (gb - ga)
        };
        if !m.is_finite() || m <= a.min(b) || m >= a.max(b) {
            m = (a + b) / two;
        }
        let gm = g(m);
        if gm.abs() <= gtol || (b - a).abs() <= T::epsilon() * (T::one() + m.abs()) * two {
            return m;
        }
        if (gm > T::zero()) == (ga > T::zero()) {
            a = m;
            ga = gm;
            if side == -1 {
                gb = gb / two;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga = ga / two;
            }
            side = 1;
        }
    }
    (a + b) / two
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let solver = Dopri5::<f64>::with_tolerances(1e-11, 1e-12);
        let out = solver
            .integrate(
                |_t, y: &[f64], dy: &mut [f64]| {
                    dy[0] = y[0];
                    dy[1] = -y[1];
                },
                0.0,
                &[1e-3, 1.0],
                3.0,
                |_s| Control::Continue,
            )
            .unwrap();
        assert!((out.y[0] - 1e-3 * 3f64.exp()).abs() < 1e-12);
        assert!((out.y[1] - (-3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let solver = Dopri5::<f64>::with_tolerances(1e-10, 1e-10);
        let mut worst = 0.0f64;
        solver
            .integrate(
                |_t, y: &[f64], dy: &mut [f64]| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                &[0.0, 1.0],
                10.0,
                |s| {
                    for k in 1..8 {
                        let t = s.t0 + s.h * (k as f64) / 8.0;
                        let y = s.eval(t);
                        worst = worst.max((y[0] - t.sin()).abs());
                    }
                    Control::Continue
                },
            )
            .unwrap();
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn works_in_single_precision() {
        let solver = Dopri5::<f32>::with_tolerances(1e-5, 1e-6);
        let out = solver
            .integrate(
                |_t, y: &[f32], dy: &mut [f32]| dy[0] = -2.0 * y[0],
                0.0,
                &[1.0],
                1.0,
                |_s| Control::Continue,
            )
            .unwrap();
        assert!((out.y[0] - (-2f32).exp()).abs() < 1e-4);
    }

    #[test]
    fn stop_request_returns_interpolated_state() {
        let solver = Dopri5::<f64>::default();
        let out = solver
            .integrate(
                |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0],
                0.0,
                &[1.0],
                10.0,
                |s| {
                    if s.y1[0] >= 2.0 {
                        let t = bracket_root(
                            |t| s.eval(t)[0] - 2.0,
                            s.t0,
                            s.y0[0] - 2.0,
                            s.t1(),
                            s.y1[0] - 2.0,
                            1e-13,
                        );
                        Control::StopAt(t)
                    } else {
                        Control::Continue
                    }
                },
            )
            .unwrap();
        assert!(out.stopped);
        assert!((out.t - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn bracket_root_finds_cosine_zero() {
        let r = bracket_root(|x: f64| x.cos(), 0.0, 1.0, 3.0, 3f64.cos(), 1e-15);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
