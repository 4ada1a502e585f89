//! Solution discovery by parameter-space loops.
//!
//! A seed pair (generic complex parameters, one known solution) is built by
//! linear algebra alone: random points on the complex circles make the flow
//! equations linear in the susceptances. Triangle loops through two more
//! random parameter vectors then permute the solution set at the seed
//! parameters; tracking known solutions around loops and collecting the
//! endpoints fills out one representative per symmetry orbit.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Pool;
use crate::linalg::{
    newton_refine, nullspace_vector, random_unit_gaussian, solve_underdetermined, LinalgError,
};
use crate::network::{Network, Point, PolySystem, SymmetryGroup};
use crate::tracker::{track_all, Homotopy, PathStatus, TrackOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const SEED_ATTEMPTS: usize = 8;

/// Points whose largest |y_k| falls below this are the fixed all-real
/// y = 0 solutions in disguise; they never count as discovered.
pub const NONTRIVIAL_MIN_Y: f64 = 1e-8;

/// Two endpoints within this distance (modulo the symmetry group, after
/// refinement) are the same solution.
pub const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MonodromyError {
    #[error("trees admit only y = 0 solutions; no seed pair exists")]
    TreeTopology,
    #[error("seed construction failed after {0} attempts")]
    SeedFailed(usize),
}

/// A generic complex parameter vector together with one nontrivial solution
/// of the system at those parameters.
#[derive(Debug, Clone)]
pub struct SeedPair {
    pub b_hat: Vec<Complex64>,
    pub point: Point,
}

/// Sample x_k on each complex unit circle, then solve the flow equations,
/// which are linear in b, for the parameter vector. With zero injections the
/// kernel of the flow matrix supplies b; a trivial kernel means the graph is
/// a tree. Otherwise a particular solution is perturbed along the kernel.
pub fn construct_seed(net: &Network, rng: &mut impl Rng) -> Result<SeedPair, MonodromyError> {
    let sys = net.system();
    let nm1 = net.n() - 1;
    let p_zero = net.zero_injection();
    for _ in 0..SEED_ATTEMPTS {
        let mut z = vec![ZERO; 2 * nm1];
        for k in 0..nm1 {
            let x = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let mut y = (Complex64::new(1.0, 0.0) - x * x).sqrt();
            if rng.gen_bool(0.5) {
                y = -y;
            }
            z[k] = x;
            z[nm1 + k] = y;
        }
        if max_abs_y(&z) <= NONTRIVIAL_MIN_Y {
            continue;
        }
        let a = sys.flow_matrix(&z);
        let b_hat = if p_zero {
            match nullspace_vector(&a, rng) {
                Ok(v) => v,
                Err(LinalgError::TrivialKernel) => return Err(MonodromyError::TreeTopology),
                Err(_) => continue,
            }
        } else {
            let p: Vec<Complex64> = sys
                .injections()
                .iter()
                .map(|&p| Complex64::new(p, 0.0))
                .collect();
            let mut part = match solve_underdetermined(&a, &p) {
                Ok(v) => v,
                Err(_) => continue,
            };
            if let Ok(kern) = nullspace_vector(&a, rng) {
                for (pi, ki) in part.iter_mut().zip(&kern) {
                    *pi += ki;
                }
            }
            part
        };
        let refined = newton_refine(&sys.at(&b_hat), &z, 1e-12, 20, false);
        if !refined.converged || max_abs_y(&refined.point) <= NONTRIVIAL_MIN_Y {
            continue;
        }
        return Ok(SeedPair { b_hat, point: refined.point });
    }
    Err(MonodromyError::SeedFailed(SEED_ATTEMPTS))
}

fn max_abs_y(z: &[Complex64]) -> f64 {
    let nm1 = z.len() / 2;
    z[nm1..].iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Stop once representatives times group order reaches this count.
    pub known_nontrivial: Option<u64>,
    /// Stop after this many consecutive loops that discover nothing.
    pub quiet_loops: usize,
    pub loop_budget: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { known_nontrivial: None, quiet_loops: 10, loop_budget: 500 }
    }
}

impl StoppingRule {
    pub fn known(count: u64) -> Self {
        StoppingRule { known_nontrivial: Some(count), ..StoppingRule::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    KnownCountReached,
    QuietLoops,
    BudgetExhausted,
}

/// Orbit representatives of the nontrivial solution set at `b_hat`.
#[derive(Debug, Clone)]
pub struct OrbitSet {
    pub b_hat: Vec<Complex64>,
    pub representatives: Vec<Point>,
    /// True when the stopping rule certified the count, not mere quiescence.
    pub complete: bool,
    pub loops_run: usize,
    pub stop: StopReason,
}

/// Track every current representative around one random triangle loop.
/// Returns how many new representatives the loop contributed.
#[allow(clippy::too_many_arguments)]
pub fn loop_once(
    sys: &PolySystem,
    b_hat: &[Complex64],
    reps: &mut Vec<Point>,
    group: &SymmetryGroup,
    opts: &TrackOptions,
    rng: &mut impl Rng,
    pool: &Pool,
) -> usize {
    let b1 = random_unit_gaussian(rng, sys.n_params());
    let b2 = random_unit_gaussian(rng, sys.n_params());
    loop_once_with(sys, b_hat, &b1, &b2, reps, group, opts, rng, pool)
}

/// Same, with the two waypoint parameter vectors chosen by the caller. Each
/// leg is one homotopy with its own random weights, shared by every tracked
/// point so the loop acts as a single permutation.
#[allow(clippy::too_many_arguments)]
pub fn loop_once_with(
    sys: &PolySystem,
    b_hat: &[Complex64],
    b1: &[Complex64],
    b2: &[Complex64],
    reps: &mut Vec<Point>,
    group: &SymmetryGroup,
    opts: &TrackOptions,
    rng: &mut impl Rng,
    pool: &Pool,
) -> usize {
    let legs = [
        Homotopy::segment(sys, b_hat.to_vec(), b1.to_vec(), rng),
        Homotopy::segment(sys, b1.to_vec(), b2.to_vec(), rng),
        Homotopy::segment(sys, b2.to_vec(), b_hat.to_vec(), rng),
    ];
    let mut pts: Vec<Point> = reps.clone();
    for leg in &legs {
        let results = track_all(leg, &pts, opts, pool);
        pts = results
            .into_iter()
            .filter(|r| r.status == PathStatus::Success)
            .map(|r| r.point)
            .collect();
        if pts.is_empty() {
            return 0;
        }
    }
    let bound = sys.at(b_hat);
    let mut added = 0;
    for p in pts {
        let refined = newton_refine(&bound, &p, opts.endgame_tol, 30, true);
        if !refined.converged {
            continue;
        }
        let p = refined.point;
        if max_abs_y(&p) <= NONTRIVIAL_MIN_Y {
            continue;
        }
        if reps.iter().all(|q| group.min_distance(q, &p) > DEDUP_TOL) {
            reps.push(p);
            added += 1;
        }
    }
    added
}

/// Run triangle loops from a seed until the stopping rule fires.
pub fn monodromy_solve(
    sys: &PolySystem,
    seed: &SeedPair,
    group: &SymmetryGroup,
    rule: &StoppingRule,
    opts: &TrackOptions,
    rng: &mut impl Rng,
    pool: &Pool,
) -> OrbitSet {
    let mut reps: Vec<Point> = vec![seed.point.clone()];
    let covered = |reps: &[Point]| reps.len() as u64 * group.order() as u64;
    let reached = |reps: &[Point]| rule.known_nontrivial.is_some_and(|k| covered(reps) >= k);
    let mut loops_run = 0;
    let mut quiet = 0;
    let mut stop = StopReason::BudgetExhausted;
    if reached(&reps) {
        stop = StopReason::KnownCountReached;
    } else {
        while loops_run < rule.loop_budget {
            loops_run += 1;
            let added = loop_once(sys, &seed.b_hat, &mut reps, group, opts, rng, pool);
            if reached(&reps) {
                stop = StopReason::KnownCountReached;
                break;
            }
            quiet = if added == 0 { quiet + 1 } else { 0 };
            if quiet >= rule.quiet_loops {
                stop = StopReason::QuietLoops;
                break;
            }
        }
    }
    OrbitSet {
        b_hat: seed.b_hat.clone(),
        representatives: reps,
        complete: stop == StopReason::KnownCountReached,
        loops_run,
        stop,
    }
}

/// Complex vector as re/im pairs, the on-disk form.
pub fn to_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

pub fn from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn seed_solves_system_with_zero_injections() {
        let net = Network::cycle(4).unwrap();
        let sys = net.system();
        let mut rng = rng(11);
        let seed = construct_seed(&net, &mut rng).unwrap();
        assert!(sys.residual(&seed.point, &seed.b_hat) < 1e-10);
        assert!(max_abs_y(&seed.point) > NONTRIVIAL_MIN_Y);
        let norm: f64 = seed.b_hat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12, "kernel vector should come back unit norm");
    }

    #[test]
    fn seed_solves_system_with_nonzero_injections() {
        let net = Network::cycle(3)
            .unwrap()
            .with_injections(&[0.4, -0.1])
            .unwrap();
        let sys = net.system();
        let mut rng = rng(5);
        let seed = construct_seed(&net, &mut rng).unwrap();
        assert!(sys.residual(&seed.point, &seed.b_hat) < 1e-10);
    }

    #[test]
    fn tree_has_no_seed() {
        let net = Network::tree_from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut rng = rng(3);
        assert!(matches!(construct_seed(&net, &mut rng), Err(MonodromyError::TreeTopology)));
    }

    #[test]
    fn degenerate_triangle_loop_discovers_nothing() {
        let net = Network::cycle(4).unwrap();
        let sys = net.system();
        let group = SymmetryGroup::for_network(&net);
        let mut rng = rng(7);
        let seed = construct_seed(&net, &mut rng).unwrap();
        let mut reps = vec![seed.point.clone()];
        let pool = Pool::new(1);
        let added = loop_once_with(
            &sys,
            &seed.b_hat,
            &seed.b_hat,
            &seed.b_hat,
            &mut reps,
            &group,
            &TrackOptions::default(),
            &mut rng,
            &pool,
        );
        assert_eq!(added, 0);
        assert_eq!(reps.len(), 1);
    }

    #[test]
    fn three_cycle_stops_before_any_loop() {
        let net = Network::cycle(3).unwrap();
        let sys = net.system();
        let group = SymmetryGroup::for_network(&net);
        let counts = net.solution_count_bounds().unwrap();
        let mut rng = rng(19);
        let seed = construct_seed(&net, &mut rng).unwrap();
        let pool = Pool::new(1);
        let out = monodromy_solve(
            &sys,
            &seed,
            &group,
            &StoppingRule::known(counts.nontrivial),
            &TrackOptions::default(),
            &mut rng,
            &pool,
        );
        assert_eq!(out.loops_run, 0);
        assert_eq!(out.representatives.len(), 1);
        assert!(out.complete);
        assert_eq!(out.stop, StopReason::KnownCountReached);
    }

    #[test]
    fn four_cycle_orbit_of_seed_covers_count() {
        let net = Network::cycle(4).unwrap();
        let sys = net.system();
        let group = SymmetryGroup::for_network(&net);
        assert_eq!(group.order(), 4);
        let mut rng = rng(23);
        let seed = construct_seed(&net, &mut rng).unwrap();
        let orbit = group.orbit(&seed.point, DEDUP_TOL);
        assert_eq!(orbit.len(), 4, "generic nontrivial orbit should be free");
        for q in &orbit {
            assert!(sys.residual(q, &seed.b_hat) < 1e-9);
        }
    }

    #[test]
    fn complete_graph_monodromy_fills_out_orbits() {
        let net = Network::complete(4).unwrap();
        let sys = net.system();
        let group = SymmetryGroup::for_network(&net);
        assert_eq!(group.order(), 2);
        let counts = net.solution_count_bounds().unwrap();
        assert_eq!(counts.nontrivial, 12);
        let mut rng = rng(2);
        let seed = construct_seed(&net, &mut rng).unwrap();
        let pool = Pool::new(1);
        let out = monodromy_solve(
            &sys,
            &seed,
            &group,
            &StoppingRule::known(counts.nontrivial),
            &TrackOptions::default(),
            &mut rng,
            &pool,
        );
        assert!(out.complete, "stopped by {:?} after {} loops", out.stop, out.loops_run);
        assert_eq!(out.representatives.len(), 6);
        let mut all: Vec<Point> = Vec::new();
        for rep in &out.representatives {
            assert!(sys.residual(rep, &seed.b_hat) < 1e-9);
            all.extend(group.orbit(rep, DEDUP_TOL));
        }
        assert_eq!(all.len(), 12);
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(crate::network::point_distance(&all[i], &all[j]) > 1e-6);
            }
        }
    }

    #[test]
    fn pair_round_trip() {
        let v = vec![Complex64::new(1.5, -2.0), Complex64::new(0.0, 3.25)];
        assert_eq!(from_pairs(&to_pairs(&v)), v);
    }
}
