//! Small dense complex linear algebra: LU with partial pivoting, random
//! kernel vectors, and Newton refinement. Systems here are tiny (at most a
//! few dozen rows), so everything is plain row-major storage with no blocking.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot:.3e} at step {step})")]
    Singular { pivot: f64, step: usize },
    #[error("matrix has a trivial kernel")]
    TrivialKernel,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = CMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LinalgError::Shape(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(ZERO);
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.get(r, c);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![ZERO; self.rows];
        for r in 0..self.rows {
            let mut acc = ZERO;
            for c in 0..self.cols {
                acc += self.get(r, c) * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// Scale every row to unit maximum entry. Row scaling cannot create or
    /// destroy rank deficiency, but it stops a badly scaled row from
    /// masquerading as one in singular value estimates. Returns false if a
    /// row is exactly zero.
    pub fn equilibrate_rows(&mut self) -> bool {
        for r in 0..self.rows {
            let m = (0..self.cols).map(|c| self.get(r, c).norm()).fold(0.0f64, f64::max);
            if m == 0.0 {
                return false;
            }
            for c in 0..self.cols {
                let v = self.get(r, c);
                self.set(r, c, v / m);
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Relative pivot threshold below which a matrix counts as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// LU factorization with partial (row) pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    scale: f64,
    min_pivot: f64,
    max_row_norm: f64,
}

pub fn lu_factor(a: &CMat) -> Result<Lu, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::Shape(format!("{}x{} not square", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut lu = a.clone();
    lu.check_finite()?;
    let scale = lu.max_abs();
    if scale == 0.0 {
        return Err(LinalgError::Singular { pivot: 0.0, step: 0 });
    }
    let mut max_row_norm: f64 = 0.0;
    for r in 0..n {
        let s: f64 = (0..n).map(|c| a.get(r, c).norm()).sum();
        max_row_norm = max_row_norm.max(s);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let mut best = k;
        let mut best_mag = lu.get(k, k).norm();
        for r in k + 1..n {
            let mag = lu.get(r, k).norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag < PIVOT_TOL * scale {
            return Err(LinalgError::Singular { pivot: best_mag, step: k });
        }
        if best != k {
            for c in 0..n {
                let t = lu.get(k, c);
                lu.set(k, c, lu.get(best, c));
                lu.set(best, c, t);
            }
            perm.swap(k, best);
        }
        min_pivot = min_pivot.min(best_mag);
        let pivot = lu.get(k, k);
        for r in k + 1..n {
            let m = lu.get(r, k) / pivot;
            lu.set(r, k, m);
            if m != ZERO {
                for c in k + 1..n {
                    let v = lu.get(r, c) - m * lu.get(k, c);
                    lu.set(r, c, v);
                }
            }
        }
    }
    Ok(Lu { lu, perm, scale, min_pivot, max_row_norm })
}

impl Lu {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        assert_eq!(rhs.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for k in 0..n {
            for c in 0..k {
                let m = self.lu.get(k, c);
                let t = x[c];
                x[k] -= m * t;
            }
        }
        for k in (0..n).rev() {
            for c in k + 1..n {
                let t = x[c];
                x[k] -= self.lu.get(k, c) * t;
            }
            x[k] /= self.lu.get(k, k);
        }
        x
    }

    /// Cheap condition proxy: max row 1-norm over the smallest pivot. Grows
    /// without bound as the matrix approaches singularity, which is all the
    /// endgame needs from it.
    pub fn cond_estimate(&self) -> f64 {
        if self.min_pivot == 0.0 {
            f64::INFINITY
        } else {
            self.max_row_norm / self.min_pivot
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// One-shot solve of A x = rhs.
pub fn lu_solve(a: &CMat, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    Ok(lu_factor(a)?.solve(rhs))
}

/// Standard complex Gaussian vector scaled to unit Euclidean norm.
pub fn random_unit_gaussian(rng: &mut impl Rng, len: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|c| c / norm).collect();
        }
    }
}

/// A random unit vector from the kernel of a (possibly rectangular) matrix.
///
/// Column-pivoted elimination finds the pivot columns; each free column yields
/// one kernel basis vector, and the result is a random complex Gaussian
/// combination of the basis, normalized. Errors with `TrivialKernel` when the
/// matrix has full column rank.
pub fn nullspace_vector(a: &CMat, rng: &mut impl Rng) -> Result<Vec<Complex64>, LinalgError> {
    a.check_finite()?;
    let (r, c) = (a.rows, a.cols);
    let scale = a.max_abs();
    if scale == 0.0 {
        // Zero matrix: everything is kernel.
        return Ok(random_unit_gaussian(rng, c));
    }
    let tol = 1e-12 * scale;
    let mut m = a.clone();
    // pivot_cols[i] = column holding the i-th pivot, in elimination order.
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut col_used = vec![false; c];
    let mut row = 0;
    while row < r {
        // Pick the largest-magnitude entry among unused columns in rows >= row.
        let mut best: Option<(usize, usize, f64)> = None;
        for col in 0..c {
            if col_used[col] {
                continue;
            }
            for rr in row..r {
                let mag = m.get(rr, col).norm();
                if best.map_or(true, |(_, _, b)| mag > b) {
                    best = Some((rr, col, mag));
                }
            }
        }
        let Some((prow, pcol, mag)) = best else { break };
        if mag <= tol {
            break;
        }
        if prow != row {
            for col in 0..c {
                let t = m.get(row, col);
                m.set(row, col, m.get(prow, col));
                m.set(prow, col, t);
            }
        }
        let pivot = m.get(row, pcol);
        for rr in 0..r {
            if rr == row {
                continue;
            }
            let f = m.get(rr, pcol) / pivot;
            if f != ZERO {
                for col in 0..c {
                    let v = m.get(rr, col) - f * m.get(row, col);
                    m.set(rr, col, v);
                }
            }
        }
        col_used[pcol] = true;
        pivot_cols.push(pcol);
        row += 1;
    }
    let free_cols: Vec<usize> = (0..c).filter(|col| !col_used[*col]).collect();
    if free_cols.is_empty() {
        return Err(LinalgError::TrivialKernel);
    }
    // Basis vector for free column f: v[f] = 1, pivot entries from the
    // reduced rows (each pivot row has a single pivot column).
    let coeffs: Vec<Complex64> = (0..free_cols.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut v = vec![ZERO; c];
    for (bi, &f) in free_cols.iter().enumerate() {
        v[f] += coeffs[bi];
        for (prow, &pcol) in pivot_cols.iter().enumerate() {
            let num = m.get(prow, f);
            let den = m.get(prow, pcol);
            v[pcol] -= coeffs[bi] * num / den;
        }
    }
    let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-10 {
        return nullspace_vector(a, rng);
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

/// Estimate of the smallest singular value via two rounds of inverse
/// iteration on the LU factors. Zero when elimination finds a negligible
/// pivot outright. Accurate to small factors, which is all the rank
/// decisions here need.
pub fn smallest_singular_estimate(a: &CMat, rng: &mut impl Rng) -> f64 {
    let lu = match lu_factor(a) {
        Ok(lu) => lu,
        Err(_) => return 0.0,
    };
    let mut v = random_unit_gaussian(rng, a.rows);
    let mut sigma = f64::INFINITY;
    for _ in 0..2 {
        let w = lu.solve(&v);
        let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return 0.0;
        }
        sigma = 1.0 / norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    sigma
}

/// A particular solution of A x = rhs for a (possibly underdetermined)
/// system, via column-pivoted elimination with free variables set to zero.
/// Errors if the system is numerically inconsistent.
pub fn solve_underdetermined(a: &CMat, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    a.check_finite()?;
    let (r, c) = (a.rows, a.cols);
    if rhs.len() != r {
        return Err(LinalgError::Shape(format!("rhs len {} vs {} rows", rhs.len(), r)));
    }
    let scale = a.max_abs().max(1e-300);
    let tol = 1e-12 * scale;
    let mut m = a.clone();
    let mut b = rhs.to_vec();
    let mut col_used = vec![false; c];
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    while row < r {
        let mut best: Option<(usize, usize, f64)> = None;
        for col in 0..c {
            if col_used[col] {
                continue;
            }
            for rr in row..r {
                let mag = m.get(rr, col).norm();
                if best.map_or(true, |(_, _, bm)| mag > bm) {
                    best = Some((rr, col, mag));
                }
            }
        }
        let Some((prow, pcol, mag)) = best else { break };
        if mag <= tol {
            break;
        }
        if prow != row {
            for col in 0..c {
                let t = m.get(row, col);
                m.set(row, col, m.get(prow, col));
                m.set(prow, col, t);
            }
            b.swap(row, prow);
        }
        let pivot = m.get(row, pcol);
        for rr in 0..r {
            if rr == row {
                continue;
            }
            let f = m.get(rr, pcol) / pivot;
            if f != ZERO {
                for col in 0..c {
                    let v = m.get(rr, col) - f * m.get(row, col);
                    m.set(rr, col, v);
                }
                let t = b[row];
                b[rr] -= f * t;
            }
        }
        col_used[pcol] = true;
        pivots.push((row, pcol));
        row += 1;
    }
    let rhs_scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for rr in row..r {
        if b[rr].norm() > 1e-9 * rhs_scale {
            return Err(LinalgError::Singular { pivot: b[rr].norm(), step: rr });
        }
    }
    let mut x = vec![ZERO; c];
    for &(prow, pcol) in &pivots {
        x[pcol] = b[prow] / m.get(prow, pcol);
    }
    Ok(x)
}

/// Square system with an evaluatable Jacobian, as Newton sees it.
pub trait NewtonSystem {
    fn dim(&self) -> usize;
    fn eval(&self, z: &[Complex64], out: &mut [Complex64]);
    fn jacobian(&self, z: &[Complex64], out: &mut CMat);
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub point: Vec<Complex64>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Condition estimate of the Jacobian at the last iterate, when available.
    pub cond_estimate: f64,
}

pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Newton iteration with optional step damping (halve up to 4 times when the
/// residual fails to drop). Converged means residual and step both fell below
/// `tol` (step scaled by the iterate's size).
pub fn newton_refine<S: NewtonSystem>(
    sys: &S,
    x0: &[Complex64],
    tol: f64,
    max_iter: usize,
    damped: bool,
) -> NewtonResult {
    let n = sys.dim();
    assert_eq!(x0.len(), n);
    let mut z = x0.to_vec();
    let mut f = vec![ZERO; n];
    let mut jac = CMat::zeros(n, n);
    let mut cond = f64::NAN;
    sys.eval(&z, &mut f);
    let mut res = max_norm(&f);
    for it in 0..max_iter {
        if !res.is_finite() {
            return NewtonResult { point: z, residual: res, converged: false, iterations: it, cond_estimate: cond };
        }
        sys.jacobian(&z, &mut jac);
        let lu = match lu_factor(&jac) {
            Ok(lu) => lu,
            Err(_) => {
                return NewtonResult {
                    point: z,
                    residual: res,
                    converged: false,
                    iterations: it,
                    cond_estimate: f64::INFINITY,
                };
            }
        };
        cond = lu.cond_estimate();
        let neg_f: Vec<Complex64> = f.iter().map(|v| -v).collect();
        let dz = lu.solve(&neg_f);
        // Solutions with large coordinates evaluate through large
        // intermediate terms, so the reachable residual floor scales with
        // the point; judge the residual against that, not absolutely.
        let f_scale = 1.0 + max_norm(&z) * jac.max_abs();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..5 {
            let cand: Vec<Complex64> =
                z.iter().zip(&dz).map(|(zi, di)| zi + di * lambda).collect();
            let mut fc = vec![ZERO; n];
            sys.eval(&cand, &mut fc);
            let rc = max_norm(&fc);
            if !damped || rc <= res || rc < tol * f_scale {
                let step = max_norm(&dz) * lambda;
                z = cand;
                f = fc;
                res = rc;
                accepted = true;
                if res <= tol * f_scale && step <= tol * (1.0 + max_norm(&z)) {
                    return NewtonResult {
                        point: z,
                        residual: res,
                        converged: true,
                        iterations: it + 1,
                        cond_estimate: cond,
                    };
                }
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return NewtonResult { point: z, residual: res, converged: false, iterations: it + 1, cond_estimate: cond };
        }
    }
    let f_scale = 1.0 + max_norm(&z) * jac.max_abs();
    let converged = res <= tol * f_scale;
    NewtonResult { point: z, residual: res, converged, iterations: max_iter, cond_estimate: cond }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        let mut m = CMat::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m.set(
                    i,
                    j,
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                );
            }
        }
        m
    }

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = rng();
        for n in 1..=12 {
            let a = random_mat(&mut rng, n, n);
            let x_true: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let rhs = a.mul_vec(&x_true);
            let x = lu_solve(&a, &rhs).unwrap();
            let err = x
                .iter()
                .zip(&x_true)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let mut rng = rng();
        let mut a = random_mat(&mut rng, 4, 4);
        for j in 0..4 {
            let v = a.get(0, j);
            a.set(2, j, v * 3.0);
        }
        assert!(matches!(lu_factor(&a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn cond_estimate_blows_up_near_singular() {
        let mut rng = rng();
        let mut a = random_mat(&mut rng, 5, 5);
        let healthy = lu_factor(&a).unwrap().cond_estimate();
        for j in 0..5 {
            let v = a.get(1, j);
            a.set(3, j, v * 2.0 + Complex64::new(1e-13, 0.0));
        }
        match lu_factor(&a) {
            Ok(lu) => assert!(lu.cond_estimate() > 1e10 * healthy.max(1.0)),
            Err(LinalgError::Singular { .. }) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nullspace_of_rank_deficient_product() {
        let mut rng = rng();
        for (r, k, c) in [(3, 2, 5), (4, 3, 6), (2, 1, 3), (5, 4, 5)] {
            let bmat = random_mat(&mut rng, r, k);
            let cmat = random_mat(&mut rng, k, c);
            let mut a = CMat::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in 0..k {
                        acc += bmat.get(i, t) * cmat.get(t, j);
                    }
                    a.set(i, j, acc);
                }
            }
            let v = nullspace_vector(&a, &mut rng).unwrap();
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let res = max_norm(&a.mul_vec(&v));
            assert!(res < 1e-10, "residual {res}");
        }
    }

    #[test]
    fn nullspace_trivial_for_full_column_rank() {
        let mut rng = rng();
        let a = random_mat(&mut rng, 6, 4);
        assert!(matches!(nullspace_vector(&a, &mut rng), Err(LinalgError::TrivialKernel)));
        let sq = random_mat(&mut rng, 4, 4);
        assert!(matches!(nullspace_vector(&sq, &mut rng), Err(LinalgError::TrivialKernel)));
    }

    #[test]
    fn nullspace_two_random_draws_differ() {
        let mut rng = rng();
        let bmat = random_mat(&mut rng, 3, 2);
        let cmat = random_mat(&mut rng, 2, 6);
        let mut a = CMat::zeros(3, 6);
        for i in 0..3 {
            for j in 0..6 {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..2 {
                    acc += bmat.get(i, t) * cmat.get(t, j);
                }
                a.set(i, j, acc);
            }
        }
        let v1 = nullspace_vector(&a, &mut rng).unwrap();
        let v2 = nullspace_vector(&a, &mut rng).unwrap();
        let d = v1
            .iter()
            .zip(&v2)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(d > 1e-6, "kernel draws should be random points, got identical vectors");
    }

    #[test]
    fn underdetermined_particular_solution() {
        let mut rng = rng();
        for (r, c) in [(2, 4), (3, 5), (4, 4)] {
            let a = random_mat(&mut rng, r, c);
            let x_any: Vec<Complex64> = (0..c)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let rhs = a.mul_vec(&x_any);
            let x = solve_underdetermined(&a, &rhs).unwrap();
            let back = a.mul_vec(&x);
            let err = back
                .iter()
                .zip(&rhs)
                .map(|(p, q)| (p - q).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{r}x{c} err {err}");
        }
    }

    #[test]
    fn singular_value_estimate_separates_regular_from_deficient() {
        let mut rng = rng();
        let n = 5;
        let mut eye = CMat::zeros(n, n);
        for i in 0..n {
            eye.set(i, i, Complex64::new(1.0, 0.0));
        }
        let s = smallest_singular_estimate(&eye, &mut rng);
        assert!((0.5..=1.5).contains(&s), "identity estimate {s}");

        // Rank-deficient up to noise at 1e-9.
        let tall = random_mat(&mut rng, n, n - 1);
        let mut near = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n - 1 {
                near.set(i, j, tall.get(i, j));
            }
            near.set(i, n - 1, tall.get(i, 0) * Complex64::new(2.0, 0.0));
        }
        let noisy = {
            let mut m = near.clone();
            for i in 0..n {
                for j in 0..n {
                    let eps = Complex64::new(
                        rng.sample::<f64, _>(StandardNormal) * 1e-9,
                        rng.sample::<f64, _>(StandardNormal) * 1e-9,
                    );
                    m.set(i, j, m.get(i, j) + eps);
                }
            }
            m
        };
        let s = smallest_singular_estimate(&noisy, &mut rng);
        assert!(s < 1e-6, "near-deficient estimate {s}");
    }

    #[test]
    fn underdetermined_rejects_inconsistent() {
        let mut rng = rng();
        // Two identical rows with different right-hand sides.
        let mut a = random_mat(&mut rng, 2, 3);
        for j in 0..3 {
            let v = a.get(0, j);
            a.set(1, j, v);
        }
        let rhs = vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        assert!(solve_underdetermined(&a, &rhs).is_err());
    }

    struct SqrtTwo;
    impl NewtonSystem for SqrtTwo {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
            out[0] = z[0] * z[0] - 2.0;
        }
        fn jacobian(&self, z: &[Complex64], out: &mut CMat) {
            out.set(0, 0, z[0] * 2.0);
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let res = newton_refine(&SqrtTwo, &[Complex64::new(1.5, 0.0)], 1e-12, 20, false);
        assert!(res.converged);
        assert!(res.iterations <= 6);
        assert!((res.point[0].re - 2f64.sqrt()).abs() < 1e-12);
        assert!(res.point[0].im.abs() < 1e-15);
    }

    #[test]
    fn newton_reports_singular_jacobian() {
        let res = newton_refine(&SqrtTwo, &[Complex64::new(0.0, 0.0)], 1e-12, 20, false);
        assert!(!res.converged);
        assert!(res.cond_estimate.is_infinite());
    }
}
