//! Monte Carlo estimation of the real solution count distribution.
//!
//! Susceptances are drawn uniformly from the unit sphere, each trial is
//! solved from the shared start set, and the real counts aggregate into a
//! histogram with a DKW confidence band. Every trial owns an RNG stream
//! derived from its index, so results are identical for any worker count and
//! a partial run can resume from its log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Pool;
use crate::network::Network;
use crate::solver::{solve_all, SolveError, SolveOptions, StartSet};

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("failure rate {rate:.4} exceeded {limit:.4} after {total} trials")]
    TooManyFailures { rate: f64, limit: f64, total: u64 },
    #[error("trial log belongs to a different run: {0}")]
    LogMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of one susceptance draw. `count` is the number of real solutions
/// beyond the y = 0 ones; it only enters the histogram when the trial is
/// complete and regular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: u64,
    pub count: u64,
    pub complete: bool,
    pub degenerate: bool,
    pub wall_micros: u64,
}

impl Trial {
    pub fn usable(&self) -> bool {
        self.complete && !self.degenerate
    }
}

/// First line of a trial log; later runs must agree on it to resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogHeader {
    seed: u64,
    n: usize,
    edges: Vec<(usize, usize)>,
    start_set_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub trials: u64,
    pub seed: u64,
    /// Two-sided DKW confidence level is 1 - alpha.
    pub alpha: f64,
    /// Trials per parallel dispatch.
    pub chunk: usize,
    pub max_failure_rate: f64,
    pub min_trials_for_abort: u64,
    /// Trials between forced flushes of the log to disk.
    pub fsync_every: u64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            trials: 20_000,
            seed: 0,
            alpha: 0.01,
            chunk: 64,
            max_failure_rate: 0.05,
            min_trials_for_abort: 200,
            fsync_every: 1000,
        }
    }
}

/// Uniform direction on the unit sphere in susceptance space.
pub fn sample_sphere(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// The RNG for one trial: a fixed stream of the base seed, so the schedule
/// of trials across workers or resumed runs cannot change what any trial
/// draws.
pub fn trial_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(1 + index);
    rng
}

fn run_trial(
    net: &Network,
    start: &StartSet,
    opts: &SolveOptions,
    base_seed: u64,
    index: u64,
) -> Trial {
    let mut rng = trial_rng(base_seed, index);
    let b = sample_sphere(&mut rng, net.edge_count());
    let t0 = Instant::now();
    let sol = solve_all(net, start, &b, opts, &mut rng, &Pool::Sequential);
    let wall_micros = t0.elapsed().as_micros() as u64;
    match sol {
        Ok(sol) => Trial {
            index,
            count: sol.real_count() as u64,
            complete: sol.found >= sol.expected,
            degenerate: sol.degenerate,
            wall_micros,
        },
        Err(_) => Trial { index, count: 0, complete: false, degenerate: false, wall_micros },
    }
}

/// Distance-from-truth bound on the empirical CDF that holds for every count
/// simultaneously with probability 1 - alpha.
pub fn dkw_epsilon(included: u64, alpha: f64) -> f64 {
    if included == 0 {
        return f64::INFINITY;
    }
    ((2.0 / alpha).ln() / (2.0 * included as f64)).sqrt()
}

/// Histogram of real counts over the usable trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub histogram: BTreeMap<u64, u64>,
    pub included: u64,
    pub excluded: u64,
    pub alpha: f64,
    pub epsilon: f64,
    pub mean: f64,
}

impl EmpiricalDistribution {
    pub fn from_trials(trials: &[Trial], alpha: f64) -> EmpiricalDistribution {
        let mut histogram = BTreeMap::new();
        let mut included = 0u64;
        let mut excluded = 0u64;
        let mut sum = 0u128;
        for t in trials {
            if t.usable() {
                *histogram.entry(t.count).or_insert(0) += 1;
                included += 1;
                sum += t.count as u128;
            } else {
                excluded += 1;
            }
        }
        let mean = if included > 0 { sum as f64 / included as f64 } else { f64::NAN };
        EmpiricalDistribution {
            histogram,
            included,
            excluded,
            alpha,
            epsilon: dkw_epsilon(included, alpha),
            mean,
        }
    }

    pub fn probability(&self, count: u64) -> f64 {
        if self.included == 0 {
            return f64::NAN;
        }
        *self.histogram.get(&count).unwrap_or(&0) as f64 / self.included as f64
    }

    pub fn support(&self) -> Vec<u64> {
        self.histogram.keys().copied().collect()
    }
}

/// Everything a report needs about one finished run. Serialization order is
/// fixed, so equal runs produce byte-equal summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub network: String,
    /// Generic nontrivial complex count, when the family has one.
    pub nontrivial: Option<u64>,
    pub trials: u64,
    pub included: u64,
    pub excluded: u64,
    pub seed: u64,
    pub alpha: f64,
    pub epsilon: f64,
    pub mean: f64,
    /// (count, trials, probability) rows in count order.
    pub histogram: Vec<(u64, u64, f64)>,
}

pub fn summarize(
    net: &Network,
    cfg: &DistributionConfig,
    dist: &EmpiricalDistribution,
) -> DistributionSummary {
    DistributionSummary {
        network: net.family_label(),
        nontrivial: net.solution_count_bounds().map(|c| c.nontrivial),
        trials: dist.included + dist.excluded,
        included: dist.included,
        excluded: dist.excluded,
        seed: cfg.seed,
        alpha: dist.alpha,
        epsilon: dist.epsilon,
        mean: dist.mean,
        histogram: dist
            .histogram
            .iter()
            .map(|(k, v)| (*k, *v, *v as f64 / dist.included as f64))
            .collect(),
    }
}

impl DistributionSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(s: &str) -> Result<DistributionSummary, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Histogram rows as `count,trials,probability` lines in count order.
pub fn histogram_csv(dist: &EmpiricalDistribution) -> String {
    let mut out = String::from("count,occurrences,percentage\n");
    for (k, v) in &dist.histogram {
        let p = 100.0 * *v as f64 / dist.included.max(1) as f64;
        out.push_str(&format!("{k},{v},{p}\n"));
    }
    out
}

fn read_log(path: &Path) -> Result<(Option<LogHeader>, Vec<Trial>), DistributionError> {
    let file = File::open(path)?;
    let mut header = None;
    let mut trials = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(t) = serde_json::from_str::<Trial>(&line) {
            trials.push(t);
        } else if let Ok(h) = serde_json::from_str::<LogHeader>(&line) {
            if header.is_none() {
                header = Some(h);
            }
        }
        // Anything else is a line torn by an interrupted write; the trial it
        // belonged to simply runs again.
    }
    Ok((header, trials))
}

/// An interrupted write can leave the log without a trailing newline; appending
/// straight after it would corrupt the next line too.
fn ensure_trailing_newline(path: &Path) -> Result<(), std::io::Error> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    let len = f.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    f.seek(SeekFrom::End(-1))?;
    let mut last = [0u8; 1];
    f.read_exact(&mut last)?;
    if last[0] != b'\n' {
        OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
    }
    Ok(())
}

/// Run (or resume) a full distribution estimate. Trials land in the log as
/// they finish, in index order; the returned list covers every index below
/// `cfg.trials`. Aborts early when too large a fraction of trials is
/// unusable, since that invalidates the histogram.
pub fn run_distribution(
    net: &Network,
    start: &StartSet,
    cfg: &DistributionConfig,
    opts: &SolveOptions,
    log_path: Option<&Path>,
    pool: &Pool,
) -> Result<(Vec<Trial>, EmpiricalDistribution), DistributionError> {
    if !start.matches(net) {
        return Err(DistributionError::Solve(SolveError::StartSetMismatch));
    }
    let header = LogHeader {
        seed: cfg.seed,
        n: net.n(),
        edges: net.edges().to_vec(),
        start_set_sha256: start.sha256_hex(),
    };

    let mut done: BTreeMap<u64, Trial> = BTreeMap::new();
    let mut log_file: Option<File> = None;
    if let Some(path) = log_path {
        if path.exists() {
            let (found, logged) = read_log(path)?;
            match found {
                Some(h) if h == header => {}
                Some(h) => {
                    return Err(DistributionError::LogMismatch(format!(
                        "log drawn with seed {} for n={}, this run is seed {} n={}",
                        h.seed, h.n, header.seed, header.n
                    )));
                }
                None => {
                    return Err(DistributionError::LogMismatch(
                        "log has no header line".to_string(),
                    ));
                }
            }
            for t in logged {
                if t.index < cfg.trials {
                    done.insert(t.index, t);
                }
            }
            ensure_trailing_newline(path)?;
            log_file = Some(OpenOptions::new().append(true).open(path)?);
        } else {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            serde_json::to_writer(&mut f, &header).map_err(std::io::Error::other)?;
            f.write_all(b"\n")?;
            log_file = Some(f);
        }
    }

    let mut failures = done.values().filter(|t| !t.usable()).count() as u64;
    let mut total = done.len() as u64;
    let pending: Vec<u64> = (0..cfg.trials).filter(|i| !done.contains_key(i)).collect();
    let mut since_sync = 0u64;
    for chunk in pending.chunks(cfg.chunk.max(1)) {
        let results =
            pool.map_slice(chunk, |&i| run_trial(net, start, opts, cfg.seed, i));
        for t in results {
            if !t.usable() {
                failures += 1;
            }
            total += 1;
            if let Some(f) = log_file.as_mut() {
                serde_json::to_writer(&mut *f, &t).map_err(std::io::Error::other)?;
                f.write_all(b"\n")?;
                since_sync += 1;
                if since_sync >= cfg.fsync_every {
                    f.sync_all()?;
                    since_sync = 0;
                }
            }
            done.insert(t.index, t);
        }
        if total >= cfg.min_trials_for_abort {
            let rate = failures as f64 / total as f64;
            if rate > cfg.max_failure_rate {
                if let Some(f) = log_file.as_mut() {
                    f.sync_all()?;
                }
                return Err(DistributionError::TooManyFailures {
                    rate,
                    limit: cfg.max_failure_rate,
                    total,
                });
            }
        }
    }
    if let Some(f) = log_file.as_mut() {
        f.sync_all()?;
    }

    let trials: Vec<Trial> = done.into_values().collect();
    let dist = EmpiricalDistribution::from_trials(&trials, cfg.alpha);
    Ok((trials, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;
    use crate::solver::{build_start_set, GroupMode};
    use crate::tracker::TrackOptions;

    fn c3_setup() -> (Network, StartSet) {
        let net = Network::cycle(3).unwrap();
        let pool = Pool::new(1);
        let set = build_start_set(&net, GroupMode::Auto, 1, &TrackOptions::default(), &pool)
            .unwrap();
        (net, set)
    }

    fn key(t: &Trial) -> (u64, u64, bool, bool) {
        (t.index, t.count, t.complete, t.degenerate)
    }

    #[test]
    fn dkw_epsilon_reference_values() {
        assert!((dkw_epsilon(20_000, 0.01) - 0.0115090371).abs() < 1e-9);
        assert!((dkw_epsilon(1_400_000, 0.01) - 0.0013755930).abs() < 1e-9);
        assert!((dkw_epsilon(500, 0.05) - 0.0607361462).abs() < 1e-9);
        assert!(dkw_epsilon(0, 0.01).is_infinite());
    }

    #[test]
    fn worker_count_does_not_change_trials() {
        let (net, set) = c3_setup();
        let cfg = DistributionConfig { trials: 24, seed: 9, ..DistributionConfig::default() };
        let opts = SolveOptions::default();
        let (seq, dist_seq) =
            run_distribution(&net, &set, &cfg, &opts, None, &Pool::new(1)).unwrap();
        let (par, dist_par) =
            run_distribution(&net, &set, &cfg, &opts, None, &Pool::new(2)).unwrap();
        let a: Vec<_> = seq.iter().map(key).collect();
        let b: Vec<_> = par.iter().map(key).collect();
        assert_eq!(a, b);
        assert_eq!(dist_seq.histogram, dist_par.histogram);
        for t in &seq {
            assert!(t.count == 0 || t.count == 2, "three-node count {}", t.count);
        }
    }

    #[test]
    fn resume_recomputes_nothing_and_matches_fresh_run() {
        let (net, set) = c3_setup();
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("trials.jsonl");
        let opts = SolveOptions::default();
        let half = DistributionConfig { trials: 10, seed: 4, ..DistributionConfig::default() };
        let full = DistributionConfig { trials: 20, seed: 4, ..DistributionConfig::default() };
        let pool = Pool::new(1);
        let (first, _) = run_distribution(&net, &set, &half, &opts, Some(&log), &pool).unwrap();
        let (resumed, _) = run_distribution(&net, &set, &full, &opts, Some(&log), &pool).unwrap();
        let (fresh, _) = run_distribution(&net, &set, &full, &opts, None, &pool).unwrap();
        let resumed_keys: Vec<_> = resumed.iter().map(key).collect();
        let fresh_keys: Vec<_> = fresh.iter().map(key).collect();
        assert_eq!(resumed_keys, fresh_keys);
        // The first ten lines in the log are the originals, untouched.
        let (header, logged_trials) = read_log(&log).unwrap();
        assert!(header.is_some());
        assert_eq!(logged_trials.len(), 20);
        for (orig, kept) in first.iter().zip(&logged_trials) {
            assert_eq!(orig, kept, "resume must not rewrite finished trials");
        }
    }

    #[test]
    fn mismatched_log_is_rejected() {
        let (net, set) = c3_setup();
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("trials.jsonl");
        let opts = SolveOptions::default();
        let pool = Pool::new(1);
        let cfg = DistributionConfig { trials: 3, seed: 4, ..DistributionConfig::default() };
        run_distribution(&net, &set, &cfg, &opts, Some(&log), &pool).unwrap();
        let other = DistributionConfig { trials: 3, seed: 5, ..DistributionConfig::default() };
        let err = run_distribution(&net, &set, &other, &opts, Some(&log), &pool);
        assert!(matches!(err, Err(DistributionError::LogMismatch(_))));
    }

    #[test]
    fn hopeless_tracking_aborts_the_run() {
        let (net, set) = c3_setup();
        let mut opts = SolveOptions::default();
        opts.track.max_steps = 2;
        opts.repair_rounds = 0;
        let cfg = DistributionConfig {
            trials: 64,
            seed: 2,
            chunk: 8,
            min_trials_for_abort: 16,
            ..DistributionConfig::default()
        };
        let err = run_distribution(&net, &set, &cfg, &opts, None, &Pool::new(1));
        match err {
            Err(DistributionError::TooManyFailures { rate, total, .. }) => {
                assert!(rate > 0.05);
                assert!(total >= 16);
                assert!(total < 64, "abort should fire before the run finishes");
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn histogram_and_summary_are_deterministic() {
        let trials = vec![
            Trial { index: 0, count: 2, complete: true, degenerate: false, wall_micros: 10 },
            Trial { index: 1, count: 0, complete: true, degenerate: false, wall_micros: 11 },
            Trial { index: 2, count: 2, complete: true, degenerate: false, wall_micros: 12 },
            Trial { index: 3, count: 4, complete: false, degenerate: false, wall_micros: 13 },
            Trial { index: 4, count: 2, complete: true, degenerate: true, wall_micros: 14 },
        ];
        let dist = EmpiricalDistribution::from_trials(&trials, 0.05);
        assert_eq!(dist.included, 3);
        assert_eq!(dist.excluded, 2);
        assert!((dist.mean - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(dist.support(), vec![0, 2]);
        assert!((dist.probability(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dist.probability(6), 0.0);
        let csv = histogram_csv(&dist);
        let expected = format!(
            "count,occurrences,percentage\n0,1,{}\n2,2,{}\n",
            100.0 / 3.0,
            200.0 / 3.0
        );
        assert_eq!(csv, expected);
        let net = Network::cycle(3).unwrap();
        let cfg = DistributionConfig { trials: 5, seed: 1, ..DistributionConfig::default() };
        let summary = summarize(&net, &cfg, &dist);
        let json = summary.to_json();
        let back = DistributionSummary::from_json(&json).unwrap();
        assert_eq!(back, summary);
        assert_eq!(summary.to_json(), json);
    }
}
