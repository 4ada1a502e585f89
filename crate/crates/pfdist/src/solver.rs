//! End-to-end solving at real susceptances.
//!
//! A `StartSet` is the reusable product of monodromy at one generic complex
//! parameter vector: orbit representatives plus the group that expands them.
//! `solve_all` carries those representatives to any real target along
//! parameter segments, expands orbits, deduplicates, and repairs shortfalls
//! with monodromy loops at the target itself. `solve_total_degree` is the
//! slow brute-force reference that starts from scratch instead.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::Pool;
use crate::linalg::{lu_factor, newton_refine, smallest_singular_estimate, CMat};
use crate::monodromy::{
    construct_seed, from_pairs, loop_once, monodromy_solve, to_pairs, MonodromyError, StopReason,
    StoppingRule, DEDUP_TOL, NONTRIVIAL_MIN_Y,
};
use crate::network::{GraphFamily, Network, NetworkError, Point, PolySystem, SymmetryGroup};
use crate::tracker::{track_path, Homotopy, PathStatus, TrackOptions};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("start set was built for a different network")]
    StartSetMismatch,
    #[error("susceptance vector has zero norm")]
    ZeroParameters,
    #[error("expected {expected} susceptances, got {got}")]
    BadParameterCount { expected: usize, got: usize },
    #[error("no exact solution family is known for {0}")]
    UnsupportedFamily(String),
    #[error("not a tree")]
    NotATree,
}

/// A solution whose Jacobian's smallest singular value falls below this,
/// relative to the largest entry, sits on (or too near) a singular locus.
const SINGULAR_SOLUTION_TOL: f64 = 1e-6;

/// Extra attempts, each with fresh segment weights, before a failed path is
/// given up on.
const PATH_RETRIES: usize = 3;

/// Whether a Jacobian is regular at a claimed solution. Rows are
/// equilibrated first: near coordinate hyperplanes of parameter space the
/// rows differ in scale by orders of magnitude, which would otherwise read
/// as rank deficiency.
fn regular_jacobian(jac: &CMat, rng: &mut impl Rng) -> bool {
    let mut eq = jac.clone();
    eq.equilibrate_rows() && smallest_singular_estimate(&eq, rng) >= SINGULAR_SOLUTION_TOL
}

/// Which symmetry group monodromy quotients by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupMode {
    /// The full group the network supports.
    Auto,
    /// Only y negation, even when the network supports more.
    YNegationOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartManifest {
    pub rng_seed: u64,
    pub group: String,
    pub group_order: usize,
    pub loops_run: usize,
    pub stop: StopReason,
    pub corrector_tol: f64,
    pub endgame_tol: f64,
    pub dedup_tol: f64,
}

/// Serializable product of monodromy: everything needed to solve the same
/// network at arbitrary real parameters later. Complex numbers are stored as
/// [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSet {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub injections: Vec<f64>,
    pub group_mode: GroupMode,
    pub b_hat: Vec<[f64; 2]>,
    pub representatives: Vec<Vec<[f64; 2]>>,
    pub complete: bool,
    pub manifest: StartManifest,
}

impl StartSet {
    pub fn network(&self) -> Result<Network, NetworkError> {
        Network::new(self.n, &self.edges)?.with_injections(&self.injections)
    }

    pub fn group(&self, net: &Network) -> SymmetryGroup {
        match self.group_mode {
            GroupMode::Auto => SymmetryGroup::for_network(net),
            GroupMode::YNegationOnly => SymmetryGroup::y_negation(),
        }
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.n == net.n() && self.edges == net.edges() && self.injections == net.injections()
    }

    pub fn points(&self) -> Vec<Point> {
        self.representatives.iter().map(|r| from_pairs(r)).collect()
    }

    pub fn b_hat_point(&self) -> Vec<Complex64> {
        from_pairs(&self.b_hat)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("start set serializes")
    }

    pub fn from_json(s: &str) -> Result<StartSet, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Hash of the compact serialization, recorded in run manifests so output
    /// can be traced to the exact start set that produced it.
    pub fn sha256_hex(&self) -> String {
        let compact = serde_json::to_string(self).expect("start set serializes");
        let digest = Sha256::digest(compact.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Run monodromy from a fresh seed and package the result. The RNG is owned
/// here so the recorded seed alone reproduces the set.
pub fn build_start_set(
    net: &Network,
    mode: GroupMode,
    rng_seed: u64,
    track: &TrackOptions,
    pool: &Pool,
) -> Result<StartSet, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sys = net.system();
    let group = match mode {
        GroupMode::Auto => SymmetryGroup::for_network(net),
        GroupMode::YNegationOnly => SymmetryGroup::y_negation(),
    };
    let rule = match net.solution_count_bounds() {
        Some(c) => StoppingRule::known(c.nontrivial),
        None => StoppingRule::default(),
    };
    let seed_pair = construct_seed(net, &mut rng)?;
    let orbit = monodromy_solve(&sys, &seed_pair, &group, &rule, track, &mut rng, pool);
    Ok(StartSet {
        n: net.n(),
        edges: net.edges().to_vec(),
        injections: net.injections().to_vec(),
        group_mode: mode,
        b_hat: to_pairs(&orbit.b_hat),
        representatives: orbit.representatives.iter().map(|p| to_pairs(p)).collect(),
        complete: orbit.complete,
        manifest: StartManifest {
            rng_seed,
            group: group.label().to_string(),
            group_order: group.order(),
            loops_run: orbit.loops_run,
            stop: orbit.stop,
            corrector_tol: track.corrector_tol,
            endgame_tol: track.endgame_tol,
            dedup_tol: DEDUP_TOL,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub track: TrackOptions,
    /// A solution is a candidate real solution when every imaginary part is
    /// below this; it must then survive re-refinement from its projection.
    pub real_tol: f64,
    pub dedup_tol: f64,
    pub repair_rounds: usize,
    pub repair_loops: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            track: TrackOptions::default(),
            real_tol: 1e-8,
            dedup_tol: DEDUP_TOL,
            repair_rounds: 3,
            repair_loops: 20,
        }
    }
}

/// All solutions found at one real parameter vector.
#[derive(Debug, Clone)]
pub struct SolutionSet {
    /// The parameters actually solved at (unit-normalized when injections
    /// are zero, since scaling susceptances then changes nothing).
    pub b: Vec<f64>,
    pub nontrivial: Vec<Point>,
    /// Parallel to `nontrivial`: passed the real test after re-refinement.
    pub real: Vec<bool>,
    /// The y = 0 solutions, present exactly when injections are zero.
    pub trivial: Vec<Point>,
    pub expected: u64,
    pub found: u64,
    pub completeness: f64,
    pub degenerate: bool,
    pub paths_tracked: usize,
}

impl SolutionSet {
    pub fn real_count(&self) -> usize {
        self.real.iter().filter(|r| **r).count()
    }

    pub fn real_points(&self) -> Vec<Point> {
        self.nontrivial
            .iter()
            .zip(&self.real)
            .filter(|(_, r)| **r)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

fn max_abs_im(p: &[Complex64]) -> f64 {
    p.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
}

fn max_abs_y(p: &[Complex64]) -> f64 {
    let nm1 = p.len() / 2;
    p[nm1..].iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Decide whether a solution is real by projecting out the imaginary parts
/// and letting Newton re-converge from the projection. Since the system and
/// parameters are real, iterates from a real start stay real, so convergence
/// back to (essentially) the same point certifies a real solution and
/// returns its cleaned-up coordinates.
pub fn classify_real(
    sys: &PolySystem,
    b: &[Complex64],
    p: &[Complex64],
    tol: f64,
) -> Option<Point> {
    // All thresholds scale with the point: solutions near coordinate
    // hyperplanes of parameter space can sit at very large coordinates
    // where absolute tolerances below the floating point grain would
    // misclassify everything as complex.
    let scale = 1.0 + p.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_abs_im(p) > tol * scale {
        return None;
    }
    let projected: Vec<Complex64> = p.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
    let refined = newton_refine(&sys.at(b), &projected, 1e-12, 20, true);
    if !refined.converged {
        return None;
    }
    if max_abs_im(&refined.point) > 1e-12 * scale {
        return None;
    }
    if crate::network::point_distance(&refined.point, p) > 1e-6 * scale {
        return None;
    }
    Some(refined.point)
}

/// Track every start representative to the real target `b`, expand orbits,
/// and repair shortfalls with monodromy loops at the target. The degenerate
/// flag reports singular endpoints that repair could not resolve, the
/// signature of parameters where solutions merge or form families.
pub fn solve_all(
    net: &Network,
    start: &StartSet,
    b: &[f64],
    opts: &SolveOptions,
    rng: &mut impl Rng,
    pool: &Pool,
) -> Result<SolutionSet, SolveError> {
    if !start.matches(net) {
        return Err(SolveError::StartSetMismatch);
    }
    if b.len() != net.edge_count() {
        return Err(SolveError::BadParameterCount { expected: net.edge_count(), got: b.len() });
    }
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(SolveError::ZeroParameters);
    }
    let b_work: Vec<f64> = if net.zero_injection() {
        b.iter().map(|v| v / norm).collect()
    } else {
        b.to_vec()
    };
    let b_c: Vec<Complex64> = b_work.iter().map(|v| Complex64::new(*v, 0.0)).collect();

    let sys = net.system();
    let group = start.group(net);
    let reps = start.points();
    let b_hat = start.b_hat_point();
    let expected = match net.solution_count_bounds() {
        Some(c) => c.nontrivial,
        None => (reps.len() * group.order()) as u64,
    };

    // One segment per representative, each with its own random weights, all
    // drawn before dispatch so results do not depend on the worker count. An
    // unlucky arc can graze the discriminant and lose its path even though
    // the endpoint is perfectly regular, so failed paths get re-tracked with
    // fresh weights before they count as lost.
    let mut paths_tracked = 0;
    let mut singular_seen = false;
    let bound = sys.at(&b_c);
    let mut reps_at_b: Vec<Point> = Vec::new();
    let mut pending: Vec<usize> = (0..reps.len()).collect();
    for _attempt in 0..=PATH_RETRIES {
        if pending.is_empty() {
            break;
        }
        let homotopies: Vec<Homotopy<'_, PolySystem>> = pending
            .iter()
            .map(|_| Homotopy::segment(&sys, b_hat.clone(), b_c.clone(), rng))
            .collect();
        let results = pool
            .map_indexed(pending.len(), |i| track_path(&homotopies[i], &reps[pending[i]], &opts.track));
        paths_tracked += pending.len();
        let mut failed = Vec::new();
        for (k, r) in results.iter().enumerate() {
            match r.status {
                PathStatus::Success => {
                    let refined =
                        newton_refine(&bound, &r.point, opts.track.endgame_tol, 30, true);
                    if !refined.converged {
                        singular_seen = true;
                        failed.push(pending[k]);
                        continue;
                    }
                    let p = refined.point;
                    if max_abs_y(&p) <= NONTRIVIAL_MIN_Y {
                        failed.push(pending[k]);
                        continue;
                    }
                    if reps_at_b.iter().all(|q| group.min_distance(q, &p) > opts.dedup_tol) {
                        reps_at_b.push(p);
                    }
                }
                PathStatus::SingularEnd => {
                    singular_seen = true;
                    failed.push(pending[k]);
                }
                PathStatus::Diverged | PathStatus::MaxSteps => failed.push(pending[k]),
            }
        }
        pending = failed;
    }

    let covered = |reps: &[Point]| (reps.len() * group.order()) as u64;
    for _round in 0..opts.repair_rounds {
        if covered(&reps_at_b) >= expected || reps_at_b.is_empty() {
            break;
        }
        let before = reps_at_b.len();
        let mut quiet = 0;
        for _ in 0..opts.repair_loops {
            paths_tracked += 3 * reps_at_b.len();
            let added = loop_once(&sys, &b_c, &mut reps_at_b, &group, &opts.track, rng, pool);
            if covered(&reps_at_b) >= expected {
                break;
            }
            quiet = if added == 0 { quiet + 1 } else { 0 };
            if quiet >= 5 {
                break;
            }
        }
        if reps_at_b.len() == before {
            break;
        }
    }

    // Newton can stall onto a positive-dimensional solution component with
    // vanishing residual, which looks like convergence. Regularity of each
    // endpoint has to be checked explicitly.
    let mut rank_deficient = false;
    let mut jac = CMat::zeros(sys.dim(), sys.dim());
    for rep in &reps_at_b {
        sys.jac_z(rep, &b_c, &mut jac);
        if !regular_jacobian(&jac, rng) {
            rank_deficient = true;
            break;
        }
    }

    // Expand orbits and deduplicate globally; a non-free orbit only happens
    // at degenerate parameters and the plain dedup handles it.
    let mut nontrivial: Vec<Point> = Vec::new();
    for rep in &reps_at_b {
        for q in group.orbit(rep, opts.dedup_tol) {
            if nontrivial
                .iter()
                .all(|p| crate::network::point_distance(p, &q) > opts.dedup_tol)
            {
                nontrivial.push(q);
            }
        }
    }

    let mut real = Vec::with_capacity(nontrivial.len());
    for p in &mut nontrivial {
        match classify_real(&sys, &b_c, p, opts.real_tol) {
            Some(clean) => {
                *p = clean;
                real.push(true);
            }
            None => real.push(false),
        }
    }

    let found = nontrivial.len() as u64;
    let short = found < expected;
    let degenerate = (singular_seen && short) || rank_deficient;
    Ok(SolutionSet {
        b: b_work,
        trivial: if net.zero_injection() { net.trivial_solutions() } else { Vec::new() },
        nontrivial,
        real,
        expected,
        found,
        completeness: (found as f64 / expected.max(1) as f64).min(1.0),
        degenerate,
        paths_tracked,
    })
}

/// Solve from scratch with a start system built from the equation degrees,
/// one path per product of roots of unity. Slow but assumption-free; the
/// reference the segment pipeline is checked against.
pub fn solve_total_degree(
    net: &Network,
    b: &[f64],
    opts: &SolveOptions,
    rng: &mut impl Rng,
    pool: &Pool,
) -> Result<SolutionSet, SolveError> {
    if b.len() != net.edge_count() {
        return Err(SolveError::BadParameterCount { expected: net.edge_count(), got: b.len() });
    }
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(SolveError::ZeroParameters);
    }
    let b_work: Vec<f64> = if net.zero_injection() {
        b.iter().map(|v| v / norm).collect()
    } else {
        b.to_vec()
    };
    let b_c: Vec<Complex64> = b_work.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let sys = net.system();
    let starts = crate::tracker::total_degree_starts(&sys);
    let h = Homotopy::total_degree(&sys, b_c.clone(), rng);
    let results = crate::tracker::track_all(&h, &starts, &opts.track, pool);
    let paths_tracked = starts.len();

    let bound = sys.at(&b_c);
    let mut singular_seen = false;
    let mut all: Vec<Point> = Vec::new();
    for r in &results {
        match r.status {
            PathStatus::Success => {
                let refined = newton_refine(&bound, &r.point, opts.track.endgame_tol, 30, true);
                if !refined.converged {
                    singular_seen = true;
                    continue;
                }
                let p = refined.point;
                if all.iter().all(|q| crate::network::point_distance(q, &p) > opts.dedup_tol) {
                    all.push(p);
                }
            }
            PathStatus::SingularEnd => singular_seen = true,
            PathStatus::Diverged | PathStatus::MaxSteps => {}
        }
    }

    let mut rank_deficient = false;
    let mut jac = CMat::zeros(sys.dim(), sys.dim());
    for p in &all {
        sys.jac_z(p, &b_c, &mut jac);
        if !regular_jacobian(&jac, rng) {
            rank_deficient = true;
            break;
        }
    }

    let (trivial, mut nontrivial): (Vec<Point>, Vec<Point>) =
        all.into_iter().partition(|p| max_abs_y(p) <= NONTRIVIAL_MIN_Y);
    let mut real = Vec::with_capacity(nontrivial.len());
    for p in &mut nontrivial {
        match classify_real(&sys, &b_c, p, opts.real_tol) {
            Some(clean) => {
                *p = clean;
                real.push(true);
            }
            None => real.push(false),
        }
    }
    let expected = net
        .solution_count_bounds()
        .map(|c| c.nontrivial)
        .unwrap_or(nontrivial.len() as u64);
    let found = nontrivial.len() as u64;
    let degenerate = (singular_seen && found < expected) || rank_deficient;
    Ok(SolutionSet {
        b: b_work,
        nontrivial,
        real,
        trivial,
        expected,
        found,
        completeness: (found as f64 / expected.max(1) as f64).min(1.0),
        degenerate,
        paths_tracked,
    })
}

/// Susceptances under which every solution of a cycle is real and distinct:
/// all ones, except that on cycles whose length is a multiple of four the
/// first edge flips sign (all ones is degenerate there). Returns the
/// parameters and the full solution count they realize.
pub fn max_real_construction(net: &Network) -> Result<(Vec<f64>, u64), SolveError> {
    // A triangle is both the smallest cycle and the smallest clique; it
    // classifies as the latter but belongs here.
    let is_cycle = net.family() == GraphFamily::Cycle
        || (net.family() == GraphFamily::Complete && net.n() == 3);
    if !is_cycle || !net.zero_injection() {
        return Err(SolveError::UnsupportedFamily(net.family_label()));
    }
    let counts = net.solution_count_bounds().expect("cycles have closed-form counts");
    let mut b = vec![1.0; net.edge_count()];
    if net.n() % 4 == 0 {
        b[0] = -1.0;
    }
    Ok((b, counts.total))
}

/// Check the exact one-parameter solution families that make uniform
/// susceptances degenerate: cycles of length divisible by four, and complete
/// graphs on at least four nodes. Evaluates 50 family members and confirms
/// each solves the system to near machine precision.
pub fn verify_infinite_family(net: &Network, b: &[f64]) -> Result<bool, SolveError> {
    if !net.zero_injection() {
        return Err(SolveError::UnsupportedFamily("nonzero injections".to_string()));
    }
    if b.len() != net.edge_count() {
        return Err(SolveError::BadParameterCount { expected: net.edge_count(), got: b.len() });
    }
    if b.iter().any(|v| *v != 1.0) {
        return Err(SolveError::UnsupportedFamily(
            "families are known only for uniform susceptances".to_string(),
        ));
    }
    let n = net.n();
    enum Family {
        AlternatingCycle,
        EvenClique,
        OddClique,
    }
    let family = match net.family() {
        GraphFamily::Cycle if n % 4 == 0 => Family::AlternatingCycle,
        GraphFamily::Complete if n >= 4 && n % 2 == 0 => Family::EvenClique,
        GraphFamily::Complete if n >= 5 => Family::OddClique,
        _ => return Err(SolveError::UnsupportedFamily(net.family_label())),
    };
    let sys = net.system();
    let b_c: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let pi = std::f64::consts::PI;
    for j in 0..50 {
        let u = (j as f64 + 0.5) / 50.0;
        // Angles per node, slack fixed at zero.
        let mut theta = vec![0.0; n];
        match family {
            Family::AlternatingCycle => {
                // Increments alternate between pi*u and pi*(1-u); equal sine
                // on both sides of every node balances the flow, and the
                // increments sum to a full number of turns.
                for k in 1..n {
                    let inc = if k % 2 == 1 { pi * u } else { pi * (1.0 - u) };
                    theta[k] = theta[k - 1] + inc;
                }
            }
            Family::EvenClique => {
                // One node opposite the slack, the rest in antipodal pairs:
                // the phasor sum vanishes, which is exactly flow balance.
                theta[1] = pi;
                for (i, pair) in (2..n).step_by(2).enumerate() {
                    let phi = 2.0 * pi * u + 1.7 * i as f64;
                    theta[pair] = phi;
                    theta[pair + 1] = phi + pi;
                }
            }
            Family::OddClique => {
                // Slack and one opposite node cancel; three nodes 120 degrees
                // apart cancel; any remaining nodes pair up antipodally.
                theta[1] = pi;
                let phi = 2.0 * pi * u;
                theta[2] = phi - 2.0 * pi / 3.0;
                theta[3] = phi;
                theta[4] = phi + 2.0 * pi / 3.0;
                for (i, pair) in (5..n).step_by(2).enumerate() {
                    let psi = 2.0 * pi * u + 1.7 * (i + 1) as f64;
                    theta[pair] = psi;
                    theta[pair + 1] = psi + pi;
                }
            }
        }
        let nm1 = n - 1;
        let mut z = vec![Complex64::new(0.0, 0.0); 2 * nm1];
        for k in 1..n {
            z[k - 1] = Complex64::new(theta[k].cos(), 0.0);
            z[nm1 + k - 1] = Complex64::new(theta[k].sin(), 0.0);
        }
        if sys.residual(&z, &b_c) >= 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Real solutions live on the torus of voltage angles, where the equations
/// reduce to sine flow balance. Newton on that reduced system from a dense
/// angle grid finds every real solution of small systems.
fn angle_newton(
    adj: &[Vec<(usize, usize)>],
    b: &[f64],
    p: &[f64],
    theta: &mut [f64],
    tol: f64,
) -> bool {
    let nm1 = theta.len();
    let mut f = vec![Complex64::new(0.0, 0.0); nm1];
    let mut jac = CMat::zeros(nm1, nm1);
    for _ in 0..40 {
        jac.fill_zero();
        let mut fmax: f64 = 0.0;
        for k in 1..=nm1 {
            let tk = theta[k - 1];
            let mut acc = -p[k - 1];
            let mut diag = 0.0;
            for &(e, m) in &adj[k - 1] {
                let tm = if m == 0 { 0.0 } else { theta[m - 1] };
                acc += b[e] * (tm - tk).sin();
                let c = b[e] * (tm - tk).cos();
                diag -= c;
                if m != 0 {
                    let prev = jac.get(k - 1, m - 1);
                    jac.set(k - 1, m - 1, prev + Complex64::new(c, 0.0));
                }
            }
            jac.set(k - 1, k - 1, Complex64::new(diag, 0.0));
            f[k - 1] = Complex64::new(acc, 0.0);
            fmax = fmax.max(acc.abs());
        }
        if fmax < tol {
            return true;
        }
        let lu = match lu_factor(&jac) {
            Ok(lu) => lu,
            Err(_) => return false,
        };
        let neg: Vec<Complex64> = f.iter().map(|v| -v).collect();
        let step = lu.solve(&neg);
        let mut norm: f64 = 0.0;
        for (t, s) in theta.iter_mut().zip(&step) {
            *t += s.re;
            norm = norm.max(s.re.abs());
        }
        if !norm.is_finite() || norm > 1e3 {
            return false;
        }
    }
    false
}

/// Exhaustively confirm that a tree has no real solutions beyond the y = 0
/// ones, over `trials` random unit susceptance vectors. Every angle-grid
/// start that converges must land on a point with all sines negligible.
pub fn check_tree_trivial(
    net: &Network,
    trials: usize,
    grid: usize,
    rng: &mut impl Rng,
) -> Result<bool, SolveError> {
    if net.family() != GraphFamily::Tree {
        return Err(SolveError::NotATree);
    }
    let nm1 = net.n() - 1;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nm1];
    for (e, &(i, j)) in net.edges().iter().enumerate() {
        if i >= 1 {
            adj[i - 1].push((e, j));
        }
        adj[j - 1].push((e, i));
    }
    let p = net.injections().to_vec();
    let tau = std::f64::consts::TAU;
    let cells = grid.pow(nm1 as u32);
    for _ in 0..trials {
        let mut b: Vec<f64> = (0..net.edge_count()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        for v in &mut b {
            *v /= norm;
        }
        for cell in 0..cells {
            let mut idx = cell;
            let mut theta = vec![0.0; nm1];
            for t in theta.iter_mut() {
                *t = tau * (idx % grid) as f64 / grid as f64 + tau * 0.5 / grid as f64;
                idx /= grid;
            }
            if angle_newton(&adj, &b, &p, &mut theta, 1e-10) {
                let max_sin = theta.iter().map(|t| t.sin().abs()).fold(0.0, f64::max);
                if max_sin > 1e-6 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::point_distance;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_real_b(rng: &mut impl Rng, len: usize) -> Vec<f64> {
        let mut b: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut b {
            *v /= norm;
        }
        b
    }

    #[test]
    fn start_set_round_trips_through_json() {
        let net = Network::cycle(4).unwrap();
        let pool = Pool::new(1);
        let set = build_start_set(&net, GroupMode::Auto, 42, &TrackOptions::default(), &pool)
            .unwrap();
        assert!(set.complete);
        assert_eq!(set.representatives.len(), 1);
        let json = set.to_json();
        let back = StartSet::from_json(&json).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.sha256_hex(), set.sha256_hex());
        assert_eq!(set.sha256_hex().len(), 64);
    }

    #[test]
    fn start_set_mismatch_is_rejected() {
        let pool = Pool::new(1);
        let c3 = Network::cycle(3).unwrap();
        let c4 = Network::cycle(4).unwrap();
        let set = build_start_set(&c3, GroupMode::Auto, 7, &TrackOptions::default(), &pool)
            .unwrap();
        let b = vec![1.0; 4];
        let err = solve_all(&c4, &set, &b, &SolveOptions::default(), &mut rng(1), &pool);
        assert!(matches!(err, Err(SolveError::StartSetMismatch)));
    }

    #[test]
    fn zero_parameters_are_rejected() {
        let pool = Pool::new(1);
        let net = Network::cycle(3).unwrap();
        let set = build_start_set(&net, GroupMode::Auto, 7, &TrackOptions::default(), &pool)
            .unwrap();
        let err = solve_all(&net, &set, &[0.0; 3], &SolveOptions::default(), &mut rng(1), &pool);
        assert!(matches!(err, Err(SolveError::ZeroParameters)));
    }

    #[test]
    fn segment_solve_agrees_with_total_degree() {
        let pool = Pool::new(1);
        let opts = SolveOptions::default();
        for (net, seed) in [(Network::cycle(3).unwrap(), 3u64), (Network::cycle(4).unwrap(), 4)] {
            let set =
                build_start_set(&net, GroupMode::Auto, seed, &TrackOptions::default(), &pool)
                    .unwrap();
            let mut r = rng(100 + seed);
            for _ in 0..3 {
                let b = random_real_b(&mut r, net.edge_count());
                let fast = solve_all(&net, &set, &b, &opts, &mut r, &pool).unwrap();
                let slow = solve_total_degree(&net, &b, &opts, &mut r, &pool).unwrap();
                assert_eq!(fast.found, slow.found, "counts differ at {b:?}");
                for p in &slow.nontrivial {
                    let nearest = fast
                        .nontrivial
                        .iter()
                        .map(|q| point_distance(p, q))
                        .fold(f64::INFINITY, f64::min);
                    assert!(nearest < 1e-7, "solution {p:?} unmatched, nearest {nearest}");
                }
            }
        }
    }

    #[test]
    fn four_cycle_solve_counts_and_flags() {
        let pool = Pool::new(1);
        let net = Network::cycle(4).unwrap();
        let set = build_start_set(&net, GroupMode::Auto, 9, &TrackOptions::default(), &pool)
            .unwrap();
        let mut r = rng(77);
        let b = random_real_b(&mut r, 4);
        let sol = solve_all(&net, &set, &b, &SolveOptions::default(), &mut r, &pool).unwrap();
        assert_eq!(sol.expected, 4);
        assert_eq!(sol.found, 4);
        assert!((sol.completeness - 1.0).abs() < 1e-12);
        assert!(!sol.degenerate);
        assert_eq!(sol.trivial.len(), 8);
        assert_eq!(sol.real.len(), 4);
        let sys = net.system();
        let b_c: Vec<Complex64> = sol.b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        for p in &sol.nontrivial {
            assert!(sys.residual(p, &b_c) < 1e-9);
        }
    }

    #[test]
    fn all_real_construction_on_small_cycles() {
        let pool = Pool::new(1);
        for n in [3usize, 4] {
            let net = Network::cycle(n).unwrap();
            let (b, expected_total) = max_real_construction(&net).unwrap();
            let set = build_start_set(&net, GroupMode::Auto, 21, &TrackOptions::default(), &pool)
                .unwrap();
            let mut r = rng(500 + n as u64);
            let sol = solve_all(&net, &set, &b, &SolveOptions::default(), &mut r, &pool).unwrap();
            assert!(!sol.degenerate, "construction for n={n} should be regular");
            let total = sol.found + sol.trivial.len() as u64;
            assert_eq!(total, expected_total, "n={n}");
            assert_eq!(sol.real_count() as u64, sol.found, "all nontrivial real for n={n}");
        }
    }

    #[test]
    fn uniform_four_cycle_is_degenerate() {
        let pool = Pool::new(1);
        let net = Network::cycle(4).unwrap();
        let set = build_start_set(&net, GroupMode::Auto, 13, &TrackOptions::default(), &pool)
            .unwrap();
        let mut r = rng(31);
        let b = vec![1.0; 4];
        let sol = solve_all(&net, &set, &b, &SolveOptions::default(), &mut r, &pool).unwrap();
        assert!(sol.degenerate);
        assert_eq!(verify_infinite_family(&net, &b).unwrap(), true);
    }

    #[test]
    fn families_cover_the_degenerate_topologies() {
        let ones = |net: &Network| vec![1.0; net.edge_count()];
        let c8 = Network::cycle(8).unwrap();
        assert!(verify_infinite_family(&c8, &ones(&c8)).unwrap());
        let k4 = Network::complete(4).unwrap();
        assert!(verify_infinite_family(&k4, &ones(&k4)).unwrap());
        let k5 = Network::complete(5).unwrap();
        assert!(verify_infinite_family(&k5, &ones(&k5)).unwrap());
        let k6 = Network::complete(6).unwrap();
        assert!(verify_infinite_family(&k6, &ones(&k6)).unwrap());
        let k7 = Network::complete(7).unwrap();
        assert!(verify_infinite_family(&k7, &ones(&k7)).unwrap());
        let c5 = Network::cycle(5).unwrap();
        assert!(verify_infinite_family(&c5, &ones(&c5)).is_err());
        let c6 = Network::cycle(6).unwrap();
        assert!(verify_infinite_family(&c6, &ones(&c6)).is_err());
        let c3 = Network::cycle(3).unwrap();
        assert!(verify_infinite_family(&c3, &ones(&c3)).is_err());
    }

    #[test]
    fn star_tree_has_only_trivial_real_solutions() {
        let net = Network::tree_from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut r = rng(8);
        assert!(check_tree_trivial(&net, 20, 8, &mut r).unwrap());
    }

    #[test]
    fn tree_check_rejects_cycles() {
        let net = Network::cycle(3).unwrap();
        let mut r = rng(8);
        assert!(matches!(check_tree_trivial(&net, 1, 4, &mut r), Err(SolveError::NotATree)));
    }

    #[test]
    fn real_classifier_accepts_trivial_solutions_and_rejects_complex_ones() {
        let net = Network::cycle(4).unwrap();
        let sys = net.system();
        let mut r = rng(55);
        let b = random_real_b(&mut r, 4);
        let b_c: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        for t in net.trivial_solutions() {
            assert!(classify_real(&sys, &b_c, &t, 1e-8).is_some());
        }
        // A generic complex seed solution is far from real.
        let seed = construct_seed(&net, &mut r).unwrap();
        assert!(classify_real(&sys, &seed.b_hat, &seed.point, 1e-8).is_none());
    }
}
