//! Integer least squares for carrier-phase ambiguity resolution.
//!
//! The solver follows the classic decorrelate-then-search structure: an
//! L^T D L factorization of the float covariance, a Z transformation built
//! from integer Gauss reductions and adjacent permutations, and a
//! depth-first search of the decorrelated ellipsoid that keeps the two best
//! integer candidates. The ratio of their squared norms feeds the ratio
//! test.
//!
//! Exact half-integer floats round toward zero, and the search visits the
//! rounded candidate first, so ties resolve deterministically toward zero.

use super::RtkError;
use nalgebra::{DMatrix, DVector};

/// Node-visit cap for the ellipsoid search.
const SEARCH_CAP: usize = 1_000_000;

/// Rounds with exact halves going toward zero.
fn round_half_toward_zero(x: f64) -> f64 {
    let t = x.trunc();
    if (x - t).abs() == 0.5 {
        t
    } else {
        x.round()
    }
}

fn sign_step(y: f64) -> f64 {
    if y <= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Factors Q = L^T diag(D) L with L unit lower triangular.
fn ltdl_factor(q: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>), RtkError> {
    let n = q.nrows();
    let mut a = q.clone();
    let mut l = DMatrix::zeros(n, n);
    let mut d = DVector::zeros(n);
    for i in (0..n).rev() {
        d[i] = a[(i, i)];
        if d[i] <= 0.0 || !d[i].is_finite() {
            return Err(RtkError::NotPositiveDefinite);
        }
        let s = d[i].sqrt();
        for j in 0..=i {
            l[(i, j)] = a[(i, j)] / s;
        }
        for j in 0..i {
            for k in 0..=j {
                a[(j, k)] -= l[(i, k)] * l[(i, j)];
            }
        }
        for j in 0..=i {
            l[(i, j)] /= l[(i, i)];
        }
    }
    Ok((l, d))
}

/// Integer Gauss reduction of column `j` against column `i` (i > j).
fn gauss_reduce(l: &mut DMatrix<f64>, z: &mut DMatrix<f64>, i: usize, j: usize) {
    let n = l.nrows();
    let mu = l[(i, j)].round();
    if mu != 0.0 {
        for k in i..n {
            l[(k, j)] -= mu * l[(k, i)];
        }
        for k in 0..n {
            z[(k, j)] -= mu * z[(k, i)];
        }
    }
}

/// Swaps ambiguities j and j+1, updating L, D and Z.
fn permute(l: &mut DMatrix<f64>, d: &mut DVector<f64>, j: usize, del: f64, z: &mut DMatrix<f64>) {
    let n = l.nrows();
    let eta = d[j] / del;
    let lam = d[j + 1] * l[(j + 1, j)] / del;
    d[j] = eta * d[j + 1];
    d[j + 1] = del;
    for k in 0..j {
        let a0 = l[(j, k)];
        let a1 = l[(j + 1, k)];
        l[(j, k)] = -l[(j + 1, j)] * a0 + a1;
        l[(j + 1, k)] = eta * a0 + lam * a1;
    }
    l[(j + 1, j)] = lam;
    for k in (j + 2)..n {
        l.swap((k, j), (k, j + 1));
    }
    for k in 0..n {
        z.swap((k, j), (k, j + 1));
    }
}

/// Decorrelating reduction; returns the unimodular Z with the factors
/// updated in place for Q' = Z^T Q Z.
fn reduction(l: &mut DMatrix<f64>, d: &mut DVector<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut z = DMatrix::identity(n, n);
    if n < 2 {
        return z;
    }
    let mut j = n - 2;
    let mut k = n - 2;
    loop {
        if j <= k {
            for i in (j + 1)..n {
                gauss_reduce(l, &mut z, i, j);
            }
        }
        let del = d[j] + l[(j + 1, j)] * l[(j + 1, j)] * d[j + 1];
        if del + 1e-6 < d[j + 1] {
            permute(l, d, j, del, &mut z);
            k = j;
            j = n - 2;
        } else if j == 0 {
            break;
        } else {
            j -= 1;
        }
    }
    z
}

/// Depth-first ellipsoid search for the `m` smallest-norm integer vectors in
/// the metric of the factored inverse covariance. Returns candidates sorted
/// by squared norm, best first.
fn search(
    l: &DMatrix<f64>,
    d: &DVector<f64>,
    zs: &DVector<f64>,
    m: usize,
) -> Result<Vec<(DVector<f64>, f64)>, RtkError> {
    let n = l.nrows();
    let mut s = DMatrix::<f64>::zeros(n, n);
    let mut dist = vec![0.0f64; n];
    let mut zb = vec![0.0f64; n];
    let mut z = vec![0.0f64; n];
    let mut step = vec![0.0f64; n];

    let mut k = n - 1;
    zb[k] = zs[k];
    z[k] = round_half_toward_zero(zb[k]);
    let mut y = zb[k] - z[k];
    step[k] = sign_step(y);

    let mut candidates: Vec<(DVector<f64>, f64)> = Vec::with_capacity(m + 1);
    let mut maxdist = f64::INFINITY;
    let mut visits = 0usize;

    loop {
        visits += 1;
        if visits > SEARCH_CAP {
            return Err(RtkError::SearchOverflow(SEARCH_CAP));
        }
        let newdist = dist[k] + y * y / d[k];
        if newdist < maxdist {
            if k != 0 {
                k -= 1;
                dist[k] = newdist;
                for i in 0..=k {
                    s[(k, i)] = s[(k + 1, i)] + (z[k + 1] - zb[k + 1]) * l[(k + 1, i)];
                }
                zb[k] = zs[k] + s[(k, k)];
                z[k] = round_half_toward_zero(zb[k]);
                y = zb[k] - z[k];
                step[k] = sign_step(y);
            } else {
                // Full-depth candidate; keep the m best, first-found wins
                // ties.
                if candidates.len() < m {
                    candidates.push((DVector::from_row_slice(&z), newdist));
                    if candidates.len() == m {
                        maxdist = candidates
                            .iter()
                            .map(|c| c.1)
                            .fold(f64::NEG_INFINITY, f64::max);
                    }
                } else if newdist
                    < candidates
                        .iter()
                        .map(|c| c.1)
                        .fold(f64::NEG_INFINITY, f64::max)
                {
                    let worst = candidates
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap();
                    candidates[worst] = (DVector::from_row_slice(&z), newdist);
                    maxdist = candidates
                        .iter()
                        .map(|c| c.1)
                        .fold(f64::NEG_INFINITY, f64::max);
                }
                z[0] += step[0];
                y = zb[0] - z[0];
                step[0] = -step[0] - sign_step(step[0]);
            }
        } else {
            if k == n - 1 {
                break;
            }
            k += 1;
            z[k] += step[k];
            y = zb[k] - z[k];
            step[k] = -step[k] - sign_step(step[k]);
        }
    }
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(candidates)
}

/// Integer least squares with decorrelation: returns the best and
/// second-best integer vectors and the ratio q(second)/q(best).
///
/// A zero best residual (exactly consistent floats) yields an infinite
/// ratio.
pub fn resolve_ambiguities(
    float_ambiguities: &DVector<f64>,
    covariance: &DMatrix<f64>,
) -> Result<(Vec<i64>, Vec<i64>, f64), RtkError> {
    let n = float_ambiguities.len();
    assert_eq!(covariance.nrows(), n);
    assert_eq!(covariance.ncols(), n);
    if n == 0 {
        return Err(RtkError::InsufficientSatellites { needed: 1, got: 0 });
    }

    let (mut l, mut d) = ltdl_factor(covariance)?;
    let z = reduction(&mut l, &mut d);
    // Transformed floats.
    let zs = z.transpose() * float_ambiguities;

    let candidates = search(&l, &d, &zs, 2)?;

    // Back-transform: a = Z^{-T} z. Z is unimodular, so the solve is
    // integer-valued up to float rounding.
    let zt = z.transpose();
    let lu = zt.lu();
    let back = |zvec: &DVector<f64>| -> Vec<i64> {
        let a = lu.solve(zvec).expect("unimodular Z is invertible");
        a.iter().map(|x| x.round() as i64).collect()
    };

    let best = back(&candidates[0].0);
    let (second, q2) = if candidates.len() > 1 {
        (back(&candidates[1].0), candidates[1].1)
    } else {
        (best.clone(), candidates[0].1)
    };
    let q1 = candidates[0].1;
    let ratio = if q1 <= 0.0 { f64::INFINITY } else { q2 / q1 };
    Ok((best, second, ratio))
}
