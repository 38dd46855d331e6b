use super::{FrontGrid, Support};
use crate::error::{Error, Result};

const FAR: f64 = 1e30;

/// Squared distance transform of a sampled function along one line
/// (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from every grid point to the marked cells.
pub fn distance_to_set(grid: &FrontGrid, mask: &[bool]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut d: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { FAR }).collect();
    let mut buf = vec![0.0; nx.max(ny)];
    for j in 0..ny {
        let row = &mut d[j * nx..(j + 1) * nx];
        dt_1d(&row.to_vec(), &mut buf[..nx]);
        row.copy_from_slice(&buf[..nx]);
    }
    if ny > 1 {
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = d[j * nx + i];
            }
            dt_1d(&col, &mut buf[..ny]);
            for j in 0..ny {
                d[j * nx + i] = buf[j];
            }
        }
    }
    d.iter().map(|&s| if s >= 0.5 * FAR { f64::INFINITY } else { s.sqrt() * grid.hx }).collect()
}

/// Constant-rate front `{dist(x, G_0) <= t sqrt(2 c a)}`.
pub fn huygens_constant(grid: &FrontGrid, support: &Support, c: f64, a: f64, t: f64) -> Result<Vec<bool>> {
    if !(c > 0.0 && a > 0.0 && t >= 0.0) {
        return Err(Error::invalid("Huygens front needs c > 0, a > 0, t >= 0"));
    }
    let reach = t * (2.0 * c * a).sqrt();
    let d = distance_to_set(grid, &support.mask(grid));
    Ok(d.iter().map(|&x| x <= reach + 1e-9 * grid.hx).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let g = FrontGrid::rect([0.0, 1.9], [0.0, 1.4], 0.1).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|k| k % 37 == 5 || k == 100).collect();
        let d = distance_to_set(&g, &mask);
        for k in 0..g.len() {
            let p = g.point(k);
            let brute = (0..g.len())
                .filter(|&m| mask[m])
                .map(|m| {
                    let q = g.point(m);
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d[k] - brute).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn zero_time_is_support() {
        let g = FrontGrid::rect([-2.0, 2.0], [-2.0, 2.0], 0.05).unwrap();
        let s = Support::Ball { center: [0.0, 0.0], radius: 1.0 };
        assert_eq!(huygens_constant(&g, &s, 1.0, 1.0, 0.0).unwrap(), s.mask(&g));
    }

    #[test]
    fn empty_set_is_infinitely_far() {
        let g = FrontGrid::line(0.0, 1.0, 0.1).unwrap();
        assert!(distance_to_set(&g, &vec![false; g.len()]).iter().all(|d| d.is_infinite()));
    }
}
