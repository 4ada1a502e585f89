//! The structureless comparison point: real roots of random univariate
//! polynomials with independent Gaussian coefficients.
//!
//! `kac_expected` evaluates the closed-form expected count by adaptive
//! quadrature; `random_poly_distribution` measures the same thing empirically
//! with a Sturm-chain root counter, reusing the trial and histogram
//! machinery of the network pipeline so reports line up.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::distribution::{trial_rng, EmpiricalDistribution, Trial};
use crate::exec::Pool;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("sturm chain collapsed; the polynomial has a repeated root")]
    ChainDegenerate,
    #[error("degree {got} outside supported range 1..={max}")]
    DegreeOutOfRange { got: usize, max: usize },
}

/// Highest degree the random-polynomial driver accepts. Beyond this the
/// renormalized chain still drifts enough to misclassify sign sequences.
pub const MAX_RANDOM_DEGREE: usize = 256;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn g7k15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for (i, x) in XGK.iter().enumerate().take(7) {
        let lo = f(c - h * x);
        let hi = f(c + h * x);
        k += WGK[i] * (lo + hi);
        if i % 2 == 1 {
            g += WG[i / 2] * (lo + hi);
        }
    }
    (k * h, (k - g).abs() * h)
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (v, e) = g7k15(f, a, b);
    if e <= tol || depth >= 30 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1)
}

/// Expected number of real roots of a degree-n polynomial with iid standard
/// normal coefficients. The density on (0, 1) covers all of the line after
/// symmetry under negation and reciprocation, hence the factor four.
///
/// The two density terms blow up identically toward t = 1; evaluation stays
/// stable on log1p/expm1 forms, and inside a thin boundary layer the finite
/// limit value replaces the difference outright.
pub fn kac_expected(degree: u32) -> f64 {
    assert!(degree >= 1, "constant polynomials have no roots to count");
    let m = (2 * degree + 2) as f64;
    let limit = ((m * m - 4.0) / 48.0).sqrt();
    let cut = 1e-3 / m;
    let f = move |t: f64| {
        let u = 1.0 - t;
        if u < cut {
            return limit;
        }
        let ln_t = (-u).ln_1p();
        let a = u * (2.0 - u);
        let b = -((m * ln_t).exp_m1());
        let t_m2 = ((m - 2.0) * ln_t).exp();
        let density = 1.0 / (a * a) - (m * m / 4.0) * t_m2 / (b * b);
        density.max(0.0).sqrt()
    };
    (4.0 / std::f64::consts::PI) * adaptive(&f, 0.0, 1.0, 1e-10, 0)
}

/// Dense real polynomial, coefficients in ascending order, highest kept
/// coefficient nonzero. The zero polynomial is the empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> RealPolynomial {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        RealPolynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> RealPolynomial {
        if self.coeffs.len() <= 1 {
            return RealPolynomial { coeffs: Vec::new() };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        RealPolynomial::new(coeffs)
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    fn scaled(&self, s: f64) -> RealPolynomial {
        RealPolynomial { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    fn trim_leading(&mut self, tol: f64) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= tol) {
            self.coeffs.pop();
        }
    }
}

/// Remainder of a modulo b. The quotient's top coefficient is removed
/// exactly rather than trusted to cancel in floating point.
fn poly_rem(a: &RealPolynomial, b: &RealPolynomial) -> RealPolynomial {
    debug_assert!(!b.is_zero());
    let db = b.coeffs.len() - 1;
    let lead = b.coeffs[db];
    let mut r = a.coeffs.clone();
    while r.len() > db {
        let top = r.len() - 1;
        let q = r[top] / lead;
        let shift = top - db;
        for (i, bc) in b.coeffs.iter().enumerate().take(db) {
            r[shift + i] -= q * bc;
        }
        r.pop();
    }
    RealPolynomial::new(r)
}

const CHAIN_DROP: f64 = 1e-12;

fn sign_at_infinity(p: &RealPolynomial, negative: bool) -> i8 {
    let lead = *p.coeffs.last().expect("chain members are nonzero");
    let mut s = if lead > 0.0 { 1i8 } else { -1 };
    if negative && p.degree() % 2 == 1 {
        s = -s;
    }
    s
}

fn sign_variations(signs: &[i8]) -> u32 {
    signs
        .windows(2)
        .filter(|w| i32::from(w[0]) * i32::from(w[1]) < 0)
        .count() as u32
}

/// Number of distinct real roots, over the whole line, by the difference of
/// sign variations of the Sturm chain at the two infinities. Every chain
/// member is rescaled to unit max coefficient so long chains cannot
/// overflow, and coefficients twelve orders below each member's scale are
/// dropped. A vanishing remainder means a repeated root, which the counting
/// argument does not cover.
pub fn sturm_real_root_count(p: &RealPolynomial) -> Result<u32, BaselineError> {
    if p.is_zero() {
        return Err(BaselineError::ChainDegenerate);
    }
    if p.degree() == 0 {
        return Ok(0);
    }
    let mut chain = vec![p.scaled(1.0 / p.max_abs())];
    let d = p.derivative();
    chain.push(d.scaled(1.0 / d.max_abs()));
    while chain.last().expect("nonempty").degree() > 0 {
        let k = chain.len();
        let mut r = poly_rem(&chain[k - 2], &chain[k - 1]);
        let scale = r.max_abs();
        if scale < CHAIN_DROP {
            return Err(BaselineError::ChainDegenerate);
        }
        r.trim_leading(CHAIN_DROP * scale);
        let next = r.scaled(-1.0 / r.max_abs());
        chain.push(next);
    }
    let at_neg: Vec<i8> = chain.iter().map(|q| sign_at_infinity(q, true)).collect();
    let at_pos: Vec<i8> = chain.iter().map(|q| sign_at_infinity(q, false)).collect();
    let v_neg = sign_variations(&at_neg);
    let v_pos = sign_variations(&at_pos);
    if v_neg < v_pos {
        return Err(BaselineError::ChainDegenerate);
    }
    Ok(v_neg - v_pos)
}

/// Empirical real-root histogram over random Gaussian polynomials of one
/// degree. Each trial owns an RNG stream keyed by its index, exactly like
/// the network trials, and a draw whose leading coefficient is negligible is
/// redrawn so the degree is honest.
pub fn random_poly_distribution(
    degree: usize,
    trials: u64,
    seed: u64,
    alpha: f64,
    pool: &Pool,
) -> Result<(Vec<Trial>, EmpiricalDistribution), BaselineError> {
    if degree == 0 || degree > MAX_RANDOM_DEGREE {
        return Err(BaselineError::DegreeOutOfRange { got: degree, max: MAX_RANDOM_DEGREE });
    }
    let indices: Vec<u64> = (0..trials).collect();
    let ts: Vec<Trial> = pool.map_slice(&indices, |&i| {
        let mut rng = trial_rng(seed, i);
        let t0 = Instant::now();
        let p = loop {
            let coeffs: Vec<f64> =
                (0..=degree).map(|_| rng.sample(StandardNormal)).collect();
            if coeffs[degree].abs() >= 1e-12 {
                break RealPolynomial::new(coeffs);
            }
        };
        let (count, complete) = match sturm_real_root_count(&p) {
            Ok(c) => (c as u64, true),
            Err(_) => (0, false),
        };
        Trial {
            index: i,
            count,
            complete,
            degenerate: false,
            wall_micros: t0.elapsed().as_micros() as u64,
        }
    });
    let dist = EmpiricalDistribution::from_trials(&ts, alpha);
    Ok((ts, dist))
}
