//! Transition probabilities of a finite continuous-time chain over
//! exponentially long times, `exp(Q T)` with `T = e^{log_t}`.

use crate::error::{Error, Result};

const MAX_SQUARINGS: usize = 1000;

/// Row `start` of `exp(Q T)` where `rates[i][j] = q_ij >= 0` (diagonal
/// ignored) and `T = exp(log_t)`.
///
/// Scaling and squaring with the time kept in log space: `exp(Q t0)` for
/// `t0 = T / 2^k <= 1 / max_i q_i` by uniformization (a series of
/// nonnegative matrices), then `k` squarings. Every intermediate matrix is
/// stochastic with nonnegative off-diagonal entries, so tiny rates keep
/// their relative accuracy.
pub fn transient_row(rates: &[Vec<f64>], start: usize, log_t: f64) -> Result<Vec<f64>> {
    let n = rates.len();
    if start >= n {
        return Err(Error::invalid(format!("start state {start} out of range")));
    }
    let m = transient_matrix(rates, log_t)?;
    Ok(m[start * n..(start + 1) * n].to_vec())
}

/// Full `exp(Q T)`, row-major.
pub fn transient_matrix(rates: &[Vec<f64>], log_t: f64) -> Result<Vec<f64>> {
    let n = rates.len();
    let q = |i: usize, j: usize| if i == j { 0.0 } else { rates[i][j] };
    for i in 0..n {
        for j in 0..n {
            if !(q(i, j) >= 0.0) || !q(i, j).is_finite() {
                return Err(Error::invalid(format!("rate q[{i}][{j}] must be finite and >= 0")));
            }
        }
    }
    let exit: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q(i, j)).sum()).collect();
    let lam = exit.iter().cloned().fold(0.0, f64::max);
    let mut id = vec![0.0; n * n];
    for i in 0..n {
        id[i * n + i] = 1.0;
    }
    if lam == 0.0 || log_t == f64::NEG_INFINITY {
        return Ok(id);
    }
    let ln2 = std::f64::consts::LN_2;
    let s = log_t + lam.ln();
    let k = if s > 0.0 { (s / ln2).ceil() as usize } else { 0 };
    if k > MAX_SQUARINGS {
        return Err(Error::Overflow(format!(
            "T * max rate = 2^{:.0} needs more than {MAX_SQUARINGS} squarings",
            s / ln2
        )));
    }
    let t0 = (log_t - k as f64 * ln2).exp();
    let h = lam * t0;

    // uniformized jump matrix P = I + Q / lam
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = if i == j { 1.0 - exit[i] / lam } else { q(i, j) / lam };
        }
    }
    // exp(Q t0) = e^{-h} sum_m h^m P^m / m!
    let mut term = id.clone();
    let mut acc = id.clone();
    let mut tmp = vec![0.0; n * n];
    let mut coef = 1.0;
    for m in 1..40 {
        matmul(&term, &p, &mut tmp, n);
        std::mem::swap(&mut term, &mut tmp);
        coef *= h / m as f64;
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += coef * t;
        }
        if coef < 1e-18 {
            break;
        }
    }
    let scale = (-h).exp();
    for a in acc.iter_mut() {
        *a *= scale;
    }
    renormalize(&mut acc, n);
    for _ in 0..k {
        matmul(&acc, &acc, &mut tmp, n);
        std::mem::swap(&mut acc, &mut tmp);
        renormalize(&mut acc, n);
    }
    Ok(acc)
}

fn matmul(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for l in 0..n {
                s += a[i * n + l] * b[l * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

/// Diagonal reset to `1 - sum of off-diagonals`.
fn renormalize(m: &mut [f64], n: usize) {
    for i in 0..n {
        let off: f64 = (0..n).filter(|j| *j != i).map(|j| m[i * n + j]).sum();
        m[i * n + i] = (1.0 - off).max(0.0);
    }
}
