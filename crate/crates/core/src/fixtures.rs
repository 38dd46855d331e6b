//! Hamiltonians used by the bundled examples and checks.

use crate::error::Result;
use crate::field::Field;
use crate::reeb::ScalarField2D;

/// `H = (x1^2 + x2^2) / 2`.
pub fn harmonic() -> Field {
    Field::new(2, 1, |x, o| o[0] = 0.5 * (x[0] * x[0] + x[1] * x[1]))
        .with_jacobian(|x, o| o.copy_from_slice(&[x[0], x[1]]))
}

/// `H = x2^2 / 2 + x1^4 / 4 - x1^2 / 2`: minima `(±1, 0)` at `-1/4`, saddle at the origin.
pub fn two_well() -> Field {
    Field::new(2, 1, |x, o| o[0] = 0.5 * x[1] * x[1] + 0.25 * x[0].powi(4) - 0.5 * x[0] * x[0])
        .with_jacobian(|x, o| o.copy_from_slice(&[x[0].powi(3) - x[0], x[1]]))
}

const WELLS: [([f64; 2], f64); 3] = [([-2.5, 0.0], 1.0), ([0.0, 0.3], 1.5), ([2.6, -0.2], 0.7)];

/// Weak confinement minus three Gaussian wells of different depths:
/// three minima and two saddles at distinct levels.
pub fn three_well() -> Field {
    Field::new(2, 1, |x, o| {
        let mut v = 0.05 * (x[0] * x[0] + x[1] * x[1]);
        for (p, a) in WELLS {
            let d2 = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
            v -= a * (-d2 / 0.5).exp();
        }
        o[0] = v;
    })
    .with_jacobian(|x, o| {
        let mut g = [0.1 * x[0], 0.1 * x[1]];
        for (p, a) in WELLS {
            let d2 = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
            let w = 4.0 * a * (-d2 / 0.5).exp();
            g[0] += w * (x[0] - p[0]);
            g[1] += w * (x[1] - p[1]);
        }
        o.copy_from_slice(&g);
    })
}

pub fn harmonic_grid(n: usize) -> Result<ScalarField2D> {
    ScalarField2D::new(harmonic(), [-2.5, 2.5, -2.5, 2.5], n, n)
}

pub fn two_well_grid(n: usize) -> Result<ScalarField2D> {
    ScalarField2D::new(two_well(), [-2.5, 2.5, -2.0, 2.0], n, n)
}

pub fn three_well_grid(n: usize) -> Result<ScalarField2D> {
    ScalarField2D::new(three_well(), [-6.0, 6.0, -6.0, 6.0], n, n)
}

/// `grad^perp H = (-d2 H, d1 H)`: the Hamiltonian flow of `h`.
pub fn skew_gradient(h: &Field) -> Field {
    let h = h.clone();
    let hj = h.clone();
    Field::new(2, 2, move |x, o| {
        let mut g = [0.0; 2];
        h.jacobian(x, &mut g);
        o[0] = -g[1];
        o[1] = g[0];
    })
    .with_jacobian(move |x, o| {
        // rows of the rotated Hessian, by central differences of the gradient
        let e = 1e-6 * (1.0 + x[0].abs().max(x[1].abs()));
        let mut gp = [0.0; 2];
        let mut gm = [0.0; 2];
        let mut hs = [0.0; 4];
        for c in 0..2 {
            let mut y = [x[0], x[1]];
            y[c] += e;
            hj.jacobian(&y, &mut gp);
            y[c] -= 2.0 * e;
            hj.jacobian(&y, &mut gm);
            hs[c] = (gp[0] - gm[0]) / (2.0 * e);
            hs[2 + c] = (gp[1] - gm[1]) / (2.0 * e);
        }
        o.copy_from_slice(&[-hs[2], -hs[3], hs[0], hs[1]]);
    })
}

/// `-k grad H`.
pub fn scaled_gradient(h: &Field, k: f64) -> Field {
    let h = h.clone();
    Field::new(2, 2, move |x, o| {
        h.jacobian(x, o);
        o[0] *= -k;
        o[1] *= -k;
    })
}

/// Branch scale and stiffness of the factored phantom cubic.
pub const PHANTOM_S: f64 = 0.08;
pub const PHANTOM_K: f64 = 14.0;

/// Middle root position `rho(y)` in units of `PHANTOM_S`.
pub fn phantom_rho(y: f64) -> f64 {
    0.55 + 0.35 * (20.0 * y).tanh()
}

/// `f = -K (x + s)(x - s rho(y))(x - 2s)`, `sigma = 1`, on `y in [-0.5, 0.5]`.
/// Small `s` keeps the fast fluctuations well inside a 0.1 neighbourhood
/// of the branches; the steep `rho` sharpens the switching band in `y`.
pub fn phantom_cubic() -> Result<crate::phantom::SlowFastSpec> {
    let (s, k) = (PHANTOM_S, PHANTOM_K);
    let f = Field::new(2, 1, move |x, o| o[0] = -k * (x[0] + s) * (x[0] - s * phantom_rho(x[1])) * (x[0] - 2.0 * s));
    let y: Vec<f64> = (0..=200).map(|i| -0.5 + i as f64 * 0.005).collect();
    crate::phantom::SlowFastSpec::new(f, Field::constant(2, vec![1.0]), y, [-0.5, 0.5])
}

/// Eleven-state chain with one-based arrows `1->2->3->1`, `4<->5`,
/// `6->{7,9}`, `7->8->9->6`, `10->{5,9}`, `11->{7,8}`: exponent 1 on
/// arrows, 2 elsewhere. Returned zero-based.
pub fn eleven_state_chain() -> crate::markov::RateFamily {
    let arrows: [(usize, &[usize]); 11] = [
        (1, &[2]),
        (2, &[3]),
        (3, &[1]),
        (4, &[5]),
        (5, &[4]),
        (6, &[9, 7]),
        (7, &[8]),
        (8, &[9]),
        (9, &[6]),
        (10, &[9, 5]),
        (11, &[7, 8]),
    ];
    let mut k = vec![vec![2.0; 11]; 11];
    for (i, ts) in arrows {
        for t in ts {
            k[i - 1][t - 1] = 1.0;
        }
    }
    crate::markov::RateFamily::from_exponents(k).expect("valid exponents")
}
