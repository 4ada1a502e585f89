//! Predictor-corrector path tracking for homotopies between polynomial
//! systems. Two homotopy kinds: a total-degree start system deformation
//! `H(z,t) = gamma (1-t) G(z) + t F(z)` with `G_i = z_i^{d_i} - 1`, and a
//! parameter segment that moves the system's parameters along
//! `beta(t) = (g1 (1-t) a + g2 t b) / (g1 (1-t) + g2 t)`. The random complex
//! twist constants keep intermediate systems away from the discriminant, so
//! path crossings have probability zero.
//!
//! Prediction integrates the Davidenko equation `dz/dt = -J^{-1} dH/dt` with
//! one RK4 step; correction is a short Newton iteration at the new t. Steps
//! halve on corrector failure and grow after a run of clean accepts.

use crate::exec::Pool;
use crate::linalg::{lu_factor, max_norm, newton_refine, CMat, NewtonSystem};
use crate::network::{Point, PolySystem};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A square polynomial system depending linearly or smoothly on a parameter
/// vector; everything the tracker needs to move solutions around.
pub trait ParametricSystem: Sync {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn eval(&self, z: &[Complex64], b: &[Complex64], out: &mut [Complex64]);
    fn jac_z(&self, z: &[Complex64], b: &[Complex64], out: &mut CMat);
    /// Directional parameter derivative `(dF/db) v` at z.
    fn param_dir(&self, z: &[Complex64], v: &[Complex64], out: &mut [Complex64]);
    /// Per-equation total degrees, for building start systems.
    fn degrees(&self) -> Vec<usize>;
}

impl ParametricSystem for PolySystem {
    fn dim(&self) -> usize {
        PolySystem::dim(self)
    }
    fn n_params(&self) -> usize {
        PolySystem::n_params(self)
    }
    fn eval(&self, z: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        PolySystem::eval(self, z, b, out)
    }
    fn jac_z(&self, z: &[Complex64], b: &[Complex64], out: &mut CMat) {
        PolySystem::jac_z(self, z, b, out)
    }
    fn param_dir(&self, z: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
        PolySystem::param_dir(self, z, v, out)
    }
    fn degrees(&self) -> Vec<usize> {
        PolySystem::degrees(self)
    }
}

pub fn random_unit_complex(rng: &mut impl Rng) -> Complex64 {
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::new(phi.cos(), phi.sin())
}

pub enum Homotopy<'a, S: ParametricSystem> {
    TotalDegree { system: &'a S, b: Vec<Complex64>, gamma: Complex64 },
    Segment {
        system: &'a S,
        b_from: Vec<Complex64>,
        b_to: Vec<Complex64>,
        gamma1: Complex64,
        gamma2: Complex64,
    },
}

impl<'a, S: ParametricSystem> Homotopy<'a, S> {
    pub fn total_degree(system: &'a S, b: Vec<Complex64>, rng: &mut impl Rng) -> Self {
        let gamma = random_unit_complex(rng);
        Homotopy::TotalDegree { system, b, gamma }
    }

    pub fn segment(
        system: &'a S,
        b_from: Vec<Complex64>,
        b_to: Vec<Complex64>,
        rng: &mut impl Rng,
    ) -> Self {
        let gamma1 = random_unit_complex(rng);
        let gamma2 = random_unit_complex(rng);
        Homotopy::Segment { system, b_from, b_to, gamma1, gamma2 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Homotopy::TotalDegree { system, .. } => system.dim(),
            Homotopy::Segment { system, .. } => system.dim(),
        }
    }

    /// Parameters of the interpolated system at time t.
    pub fn params_at(&self, t: f64) -> Vec<Complex64> {
        match self {
            Homotopy::TotalDegree { b, .. } => b.clone(),
            Homotopy::Segment { b_from, b_to, gamma1, gamma2, .. } => {
                let w1 = gamma1 * (1.0 - t);
                let w2 = gamma2 * t;
                let d = w1 + w2;
                b_from
                    .iter()
                    .zip(b_to)
                    .map(|(a, b)| (w1 * a + w2 * b) / d)
                    .collect()
            }
        }
    }

    pub fn eval(&self, z: &[Complex64], t: f64, out: &mut [Complex64]) {
        match self {
            Homotopy::TotalDegree { system, b, gamma } => {
                system.eval(z, b, out);
                let g = gamma * (1.0 - t);
                for (i, d) in system.degrees().iter().enumerate() {
                    let start = z[i].powu(*d as u32) - 1.0;
                    out[i] = g * start + out[i] * t;
                }
            }
            Homotopy::Segment { system, .. } => {
                let beta = self.params_at(t);
                system.eval(z, &beta, out);
            }
        }
    }

    pub fn jac_z(&self, z: &[Complex64], t: f64, out: &mut CMat) {
        match self {
            Homotopy::TotalDegree { system, b, gamma } => {
                system.jac_z(z, b, out);
                let n = system.dim();
                let g = gamma * (1.0 - t);
                for r in 0..n {
                    for c in 0..n {
                        out.set(r, c, out.get(r, c) * t);
                    }
                }
                for (i, d) in system.degrees().iter().enumerate() {
                    let dg = z[i].powu(*d as u32 - 1) * (*d as f64);
                    out.set(i, i, out.get(i, i) + g * dg);
                }
            }
            Homotopy::Segment { system, .. } => {
                let beta = self.params_at(t);
                system.jac_z(z, &beta, out);
            }
        }
    }

    /// dH/dt at (z, t).
    pub fn dt(&self, z: &[Complex64], t: f64, out: &mut [Complex64]) {
        match self {
            Homotopy::TotalDegree { system, b, gamma } => {
                system.eval(z, b, out);
                for (i, d) in system.degrees().iter().enumerate() {
                    let start = z[i].powu(*d as u32) - 1.0;
                    out[i] -= gamma * start;
                }
            }
            Homotopy::Segment { system, b_from, b_to, gamma1, gamma2 } => {
                let w1 = gamma1 * (1.0 - t);
                let w2 = gamma2 * t;
                let d = w1 + w2;
                let scale = gamma1 * gamma2 / (d * d);
                let dir: Vec<Complex64> =
                    b_from.iter().zip(b_to).map(|(a, b)| scale * (b - a)).collect();
                system.param_dir(z, &dir, out);
            }
        }
    }

    fn at(&self, t: f64) -> HomotopyAt<'_, 'a, S> {
        HomotopyAt { h: self, t }
    }
}

/// The homotopy frozen at a fixed t, for Newton correction.
struct HomotopyAt<'h, 'a, S: ParametricSystem> {
    h: &'h Homotopy<'a, S>,
    t: f64,
}

impl<S: ParametricSystem> NewtonSystem for HomotopyAt<'_, '_, S> {
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
        self.h.eval(z, self.t, out);
    }
    fn jacobian(&self, z: &[Complex64], out: &mut CMat) {
        self.h.jac_z(z, self.t, out);
    }
}

/// All start solutions of the total-degree start system `z_i^{d_i} = 1`:
/// the Cartesian product of roots of unity, `prod d_i` points.
pub fn total_degree_starts<S: ParametricSystem>(system: &S) -> Vec<Point> {
    let degrees = system.degrees();
    let n = degrees.len();
    let total: usize = degrees.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = vec![ZERO; n];
        for (i, &d) in degrees.iter().enumerate() {
            let j = idx % d;
            idx /= d;
            let phi = std::f64::consts::TAU * j as f64 / d as f64;
            p[i] = Complex64::new(phi.cos(), phi.sin());
        }
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub corrector_tol: f64,
    pub corrector_iters: usize,
    pub divergence_norm: f64,
    pub max_steps: usize,
    pub endgame_tol: f64,
    pub cond_limit: f64,
    pub grow_after: usize,
    pub grow_factor: f64,
    pub shrink_factor: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            initial_step: 0.05,
            min_step: 1e-6,
            max_step: 0.1,
            corrector_tol: 1e-7,
            corrector_iters: 3,
            divergence_norm: 1e8,
            max_steps: 10_000,
            endgame_tol: 1e-12,
            cond_limit: 1e12,
            grow_after: 4,
            grow_factor: 1.5,
            shrink_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    /// Reached t = 1 and refined to the endgame tolerance.
    Success,
    /// Solution norm exceeded the divergence bound; the path heads to
    /// infinity.
    Diverged,
    /// Step budget exhausted or the step size collapsed away from t = 1.
    MaxSteps,
    /// Reached t = 1 but the Jacobian there is numerically singular.
    SingularEnd,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub status: PathStatus,
    pub point: Point,
    pub t_reached: f64,
    pub steps: usize,
    pub residual: f64,
}

fn rk4_predict<S: ParametricSystem>(
    h: &Homotopy<'_, S>,
    z: &[Complex64],
    t: f64,
    dt: f64,
) -> Option<Point> {
    let n = h.dim();
    let mut jac = CMat::zeros(n, n);
    let mut rhs = vec![ZERO; n];
    let mut slope = |z: &[Complex64], t: f64| -> Option<Vec<Complex64>> {
        h.jac_z(z, t, &mut jac);
        let lu = lu_factor(&jac).ok()?;
        h.dt(z, t, &mut rhs);
        let neg: Vec<Complex64> = rhs.iter().map(|v| -v).collect();
        let s = lu.solve(&neg);
        if s.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
        Some(s)
    };
    let k1 = slope(z, t)?;
    let half: Vec<Complex64> = z.iter().zip(&k1).map(|(z, k)| z + k * (dt / 2.0)).collect();
    let k2 = slope(&half, t + dt / 2.0)?;
    let half2: Vec<Complex64> = z.iter().zip(&k2).map(|(z, k)| z + k * (dt / 2.0)).collect();
    let k3 = slope(&half2, t + dt / 2.0)?;
    let full: Vec<Complex64> = z.iter().zip(&k3).map(|(z, k)| z + k * dt).collect();
    let k4 = slope(&full, t + dt)?;
    Some(
        z.iter()
            .enumerate()
            .map(|(i, z)| z + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
            .collect(),
    )
}

/// Track one start solution from t = 0 to t = 1.
pub fn track_path<S: ParametricSystem>(
    h: &Homotopy<'_, S>,
    start: &[Complex64],
    opts: &TrackOptions,
) -> PathResult {
    let mut z = start.to_vec();
    // Settle onto the t = 0 solution curve first; starts are only required to
    // satisfy the start system to corrector tolerance.
    let r0 = newton_refine(&h.at(0.0), &z, opts.corrector_tol, opts.corrector_iters + 2, false);
    if r0.converged {
        z = r0.point;
    }
    let mut t = 0.0;
    let mut step = opts.initial_step;
    let mut consec = 0usize;
    let mut steps_taken = 0usize;
    while steps_taken < opts.max_steps {
        if t >= 1.0 {
            return finish(h, z, 1.0, steps_taken, opts);
        }
        steps_taken += 1;
        let dt = step.min(1.0 - t);
        let accepted = rk4_predict(h, &z, t, dt).and_then(|pred| {
            let res = newton_refine(
                &h.at(t + dt),
                &pred,
                opts.corrector_tol,
                opts.corrector_iters,
                false,
            );
            if res.converged {
                Some(res.point)
            } else {
                None
            }
        });
        match accepted {
            Some(znew) => {
                let norm = max_norm(&znew);
                if !norm.is_finite() || norm > opts.divergence_norm {
                    return PathResult {
                        status: PathStatus::Diverged,
                        point: znew,
                        t_reached: t + dt,
                        steps: steps_taken,
                        residual: f64::NAN,
                    };
                }
                z = znew;
                t += dt;
                consec += 1;
                if consec >= opts.grow_after {
                    step = (step * opts.grow_factor).min(opts.max_step);
                    consec = 0;
                }
            }
            None => {
                consec = 0;
                step *= opts.shrink_factor;
                if step < opts.min_step {
                    return stuck(h, z, t, steps_taken, opts);
                }
            }
        }
    }
    if t >= 1.0 {
        finish(h, z, 1.0, steps_taken, opts)
    } else {
        stuck(h, z, t, steps_taken, opts)
    }
}

/// Norm above which a path that cannot be finished counts as heading to
/// infinity. Solutions at generic parameters stay far below this.
const DIVERGED_NORM: f64 = 1e3;

/// Classify a path whose step size collapsed or budget ran out at time t.
fn stuck<S: ParametricSystem>(
    h: &Homotopy<'_, S>,
    z: Point,
    t: f64,
    steps: usize,
    opts: &TrackOptions,
) -> PathResult {
    if t >= 1.0 - 1e-6 {
        return finish(h, z, t, steps, opts);
    }
    let status = if max_norm(&z) > DIVERGED_NORM {
        PathStatus::Diverged
    } else {
        PathStatus::MaxSteps
    };
    PathResult { status, point: z, t_reached: t, steps, residual: f64::NAN }
}

/// Endgame at (or within 1e-6 of) t = 1: damped Newton against the target
/// system, with a trust region so a diverging endpoint cannot hop onto an
/// unrelated finite root.
fn finish<S: ParametricSystem>(
    h: &Homotopy<'_, S>,
    z: Point,
    t: f64,
    steps: usize,
    opts: &TrackOptions,
) -> PathResult {
    let norm_in = max_norm(&z);
    let refined = newton_refine(&h.at(1.0), &z, opts.endgame_tol, 30, true);
    let moved = crate::network::point_distance(&refined.point, &z);
    let trusted = moved <= 0.1 * (1.0 + norm_in);
    if refined.converged && trusted && refined.cond_estimate <= opts.cond_limit {
        return PathResult {
            status: PathStatus::Success,
            point: refined.point,
            t_reached: 1.0,
            steps,
            residual: refined.residual,
        };
    }
    if norm_in > DIVERGED_NORM {
        return PathResult {
            status: PathStatus::Diverged,
            point: z,
            t_reached: t,
            steps,
            residual: f64::NAN,
        };
    }
    if refined.cond_estimate > opts.cond_limit {
        return PathResult {
            status: PathStatus::SingularEnd,
            point: refined.point,
            t_reached: t,
            steps,
            residual: refined.residual,
        };
    }
    PathResult {
        status: PathStatus::MaxSteps,
        point: refined.point,
        t_reached: t,
        steps,
        residual: refined.residual,
    }
}

/// Track many starts through the same homotopy. Results come back in start
/// order regardless of the worker count.
pub fn track_all<S: ParametricSystem>(
    h: &Homotopy<'_, S>,
    starts: &[Point],
    opts: &TrackOptions,
    pool: &Pool,
) -> Vec<PathResult> {
    pool.map_slice(starts, |s| track_path(h, s, opts))
}
