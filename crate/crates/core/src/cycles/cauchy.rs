use serde::{Deserialize, Serialize};

use super::TIE_TOL;
use crate::error::{Error, Result};

/// Which attractor's basin the initial point lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basin {
    One,
    Two,
}

/// Limit of `u^eps(T, x)` for a two-attractor linear Cauchy problem with
/// `eps log T -> lambda`.
pub fn predict_linear_cauchy(
    v12: f64,
    v21: f64,
    basin: Basin,
    lambda: f64,
    g1: f64,
    g2: f64,
) -> Result<f64> {
    if (lambda - v12).abs() <= TIE_TOL || (lambda - v21).abs() <= TIE_TOL {
        return Err(Error::AtThreshold(format!(
            "lambda = {lambda} coincides with an exponent ({v12}, {v21})"
        )));
    }
    if (v12 - v21).abs() <= TIE_TOL {
        return Err(Error::NotGeneric("V_12 = V_21".into()));
    }
    Ok(match basin {
        Basin::One => {
            if lambda < v12 || v12 > v21 {
                g1
            } else {
                g2
            }
        }
        Basin::Two => {
            if lambda < v21 || v21 > v12 {
                g2
            } else {
                g1
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearPrediction {
    pub z_bar: f64,
    pub lambda_bar: f64,
    pub limit: f64,
    /// Mass on the delta measure at `g1`.
    pub weight_mu1: f64,
    /// Mass on the delta measure at `g2`.
    pub weight_mu2: f64,
}

/// Strict monotonicity direction of a tabulated curve: `+1`, `-1`, or error.
fn direction(v: &[f64], name: &str) -> Result<f64> {
    let inc = v.windows(2).all(|w| w[1] > w[0]);
    let dec = v.windows(2).all(|w| w[1] < w[0]);
    match (inc, dec) {
        (true, _) => Ok(1.0),
        (_, true) => Ok(-1.0),
        _ => Err(Error::invalid(format!("{name} is not strictly monotone"))),
    }
}

fn interp(z: &[f64], v: &[f64], x: f64) -> f64 {
    let k = z.partition_point(|p| *p <= x).clamp(1, z.len() - 1);
    let s = (x - z[k - 1]) / (z[k] - z[k - 1]);
    v[k - 1] + s * (v[k] - v[k - 1])
}

/// Inverse of a strictly monotone piecewise-linear curve.
fn inverse(z: &[f64], v: &[f64], level: f64) -> Option<f64> {
    for k in 1..z.len() {
        let (a, b) = (v[k - 1], v[k]);
        if (a - level) * (b - level) <= 0.0 && a != b {
            return Some(z[k - 1] + (level - a) / (b - a) * (z[k] - z[k - 1]));
        }
    }
    None
}

/// Limit and limiting measure for the nonlinear two-attractor problem where
/// the exponents depend on the solution value `z`.
///
/// The curves must be strictly monotone in opposite directions and cross on
/// the tabulated interval.
pub fn predict_nonlinear_cauchy(
    z: &[f64],
    v12: &[f64],
    v21: &[f64],
    basin: Basin,
    lambda: f64,
    g1: f64,
    g2: f64,
) -> Result<NonlinearPrediction> {
    if z.len() < 2 || v12.len() != z.len() || v21.len() != z.len() {
        return Err(Error::invalid("curves need at least two matching samples"));
    }
    if !z.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid("z grid must be strictly increasing"));
    }
    if !(g1 < g2) {
        return Err(Error::invalid("need g1 < g2"));
    }
    let d12 = direction(v12, "V_12")?;
    let d21 = direction(v21, "V_21")?;
    if d12 == d21 {
        return Err(Error::invalid("V_12 and V_21 must be monotone in opposite directions"));
    }
    let diff = |x: f64| interp(z, v12, x) - interp(z, v21, x);
    let (mut lo, mut hi) = (z[0], z[z.len() - 1]);
    let (flo, fhi) = (diff(lo), diff(hi));
    if flo * fhi > 0.0 {
        return Err(Error::invalid("V_12 and V_21 do not cross on the tabulated interval"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (diff(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let z_bar = 0.5 * (lo + hi);
    let lambda_bar = interp(z, v12, z_bar);
    if (lambda - lambda_bar).abs() <= TIE_TOL {
        return Err(Error::AtThreshold(format!("lambda equals lambda_bar = {lambda_bar}")));
    }
    let limit = if lambda > lambda_bar {
        z_bar
    } else {
        let (curve, name) = match basin {
            Basin::One => (v12, "V_12"),
            Basin::Two => (v21, "V_21"),
        };
        inverse(z, curve, lambda).ok_or_else(|| {
            Error::invalid(format!("lambda = {lambda} outside the tabulated range of {name}"))
        })?
    };
    if limit < g1 - 1e-12 || limit > g2 + 1e-12 {
        return Err(Error::invalid(format!("limit {limit} lies outside [g1, g2]")));
    }
    let w2 = ((limit - g1) / (g2 - g1)).clamp(0.0, 1.0);
    Ok(NonlinearPrediction {
        z_bar,
        lambda_bar,
        limit,
        weight_mu1: 1.0 - w2,
        weight_mu2: w2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_cases() {
        let p = |b, l, v12, v21| predict_linear_cauchy(v12, v21, b, l, -1.0, 1.0).unwrap();
        assert_eq!(p(Basin::One, 0.5, 1.0, 2.0), -1.0);
        assert_eq!(p(Basin::One, 1.5, 1.0, 2.0), 1.0);
        for l in [0.5, 1.5, 2.5] {
            assert_eq!(p(Basin::One, l, 2.0, 1.0), -1.0);
        }
        assert_eq!(p(Basin::Two, 0.5, 2.0, 1.0), 1.0);
        assert_eq!(p(Basin::Two, 1.5, 2.0, 1.0), -1.0);
        assert!(predict_linear_cauchy(1.0, 2.0, Basin::One, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_curves_cross_in_the_middle() {
        let z: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let v12: Vec<f64> = z.iter().map(|x| 1.0 + x * x).collect();
        let v21: Vec<f64> = z.iter().map(|x| 1.0 + (2.0 - x) * (2.0 - x)).collect();
        let r = predict_nonlinear_cauchy(&z, &v12, &v21, Basin::One, 5.0, 0.0, 2.0).unwrap();
        assert!((r.z_bar - 1.0).abs() < 1e-12);
        assert_eq!(r.limit, r.z_bar);
        assert!((r.weight_mu1 - 0.5).abs() < 1e-12);
        let r = predict_nonlinear_cauchy(&z, &v12, &v21, Basin::One, 1.25, 0.0, 2.0).unwrap();
        assert!((r.limit - 0.5).abs() < 1e-2);
        assert!((r.weight_mu2 - r.limit / 2.0).abs() < 1e-12);
        let r = predict_nonlinear_cauchy(&z, &v12, &v21, Basin::Two, 1.25, 0.0, 2.0).unwrap();
        assert!((r.limit - 1.5).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_curves() {
        let z = [0.0, 1.0, 2.0];
        let up = [1.0, 2.0, 3.0];
        let bump = [1.0, 3.0, 2.0];
        assert!(predict_nonlinear_cauchy(&z, &up, &bump, Basin::One, 1.0, 0.0, 2.0).is_err());
        assert!(predict_nonlinear_cauchy(&z, &up, &up, Basin::One, 1.0, 0.0, 2.0).is_err());
        let high = [5.0, 4.0, 3.5];
        assert!(predict_nonlinear_cauchy(&z, &up, &high, Basin::One, 1.0, 0.0, 2.0).is_err());
    }
}
