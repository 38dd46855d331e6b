use std::io::Write;

use super::integrate::Trajectory;
use super::BoundingBox;
use crate::error::{Error, Result};
use crate::field::Field;

/// Regular grid histogram with outside mass tracked separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bbox: BoundingBox,
    pub bins: Vec<usize>,
    /// Row-major over `bins`, last coordinate fastest.
    pub mass: Vec<f64>,
    pub outside: f64,
}

impl Histogram {
    pub fn new(bbox: BoundingBox, bins: Vec<usize>) -> Result<Self> {
        if bins.len() != bbox.lower.len() || bins.iter().any(|b| *b == 0) {
            return Err(Error::invalid("histogram bins must match box dimension and be > 0"));
        }
        if bbox.lower.iter().zip(&bbox.upper).any(|(l, u)| !(u > l)) {
            return Err(Error::invalid("histogram box must have upper > lower"));
        }
        let total = bins.iter().product();
        Ok(Histogram {
            bbox,
            bins,
            mass: vec![0.0; total],
            outside: 0.0,
        })
    }

    pub fn bin_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for d in 0..self.bins.len() {
            let (l, u) = (self.bbox.lower[d], self.bbox.upper[d]);
            if !(x[d] >= l && x[d] <= u) {
                return None;
            }
            let nb = self.bins[d];
            let k = (((x[d] - l) / (u - l)) * nb as f64).floor() as usize;
            idx = idx * nb + k.min(nb - 1);
        }
        Some(idx)
    }

    pub fn bin_center(&self, mut idx: usize) -> Vec<f64> {
        let n = self.bins.len();
        let mut c = vec![0.0; n];
        for d in (0..n).rev() {
            let nb = self.bins[d];
            let k = idx % nb;
            idx /= nb;
            let w = (self.bbox.upper[d] - self.bbox.lower[d]) / nb as f64;
            c[d] = self.bbox.lower[d] + (k as f64 + 0.5) * w;
        }
        c
    }

    pub fn add(&mut self, x: &[f64], w: f64) {
        match self.bin_index(x) {
            Some(i) => self.mass[i] += w,
            None => self.outside += w,
        }
    }

    pub fn inside_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// CSV `c1,..,cn,mass` with one row per bin.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.bins.len()).map(|i| format!("c{i}")).collect();
        header.push("mass".into());
        wr.write_record(&header)?;
        for (i, m) in self.mass.iter().enumerate() {
            let mut rec: Vec<String> = self.bin_center(i).iter().map(|v| v.to_string()).collect();
            rec.push(m.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OccupationMeasure {
    /// `(1/T) int f(X_t) dt` per registered test function.
    pub averages: Vec<f64>,
    pub histogram: Option<Histogram>,
}

/// Trapezoid weights of the states of a uniform path, normalised to 1.
fn trapezoid_weights(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let total = (n - 1) as f64;
    (0..n)
        .map(|k| if k == 0 || k == n - 1 { 0.5 / total } else { 1.0 / total })
        .collect()
}

/// Time averages of scalar test fields and an optional histogram.
pub fn occupation(
    traj: &Trajectory,
    tests: &[Field],
    histogram: Option<(BoundingBox, Vec<usize>)>,
) -> Result<OccupationMeasure> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let n = traj.len();
    let w = trapezoid_weights(n);
    let mut averages = vec![0.0; tests.len()];
    let mut hist = match histogram {
        Some((b, bins)) => Some(Histogram::new(b, bins)?),
        None => None,
    };
    for k in 0..n {
        let x = traj.state(k);
        for (a, f) in averages.iter_mut().zip(tests) {
            *a += w[k] * f.eval_scalar(x);
        }
        if let Some(h) = hist.as_mut() {
            h.add(x, w[k]);
        }
    }
    Ok(OccupationMeasure {
        averages,
        histogram: hist,
    })
}

/// `oint g/|b| dl / oint 1/|b| dl` over a closed polyline (closed implicitly
/// when the last point differs from the first).
pub fn limit_cycle_average(g: &Field, cycle: &[Vec<f64>], b: &Field) -> Result<f64> {
    if cycle.len() < 3 {
        return Err(Error::invalid("cycle needs at least 3 points"));
    }
    let n = cycle.len();
    let closed = cycle[0] == cycle[n - 1];
    let segs = if closed { n - 1 } else { n };
    let dim = cycle[0].len();
    let mut bv = vec![0.0; b.dim_out()];
    let mut m = vec![0.0; dim];
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..segs {
        let (p, q) = (&cycle[i], &cycle[(i + 1) % n]);
        let mut len = 0.0;
        for d in 0..dim {
            m[d] = 0.5 * (p[d] + q[d]);
            len += (q[d] - p[d]) * (q[d] - p[d]);
        }
        let len = len.sqrt();
        b.eval(&m, &mut bv);
        let speed = bv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed < 1e-12 {
            return Err(Error::Degenerate(format!("|b| vanishes on the cycle near {m:?}")));
        }
        num += g.eval_scalar(&m) * len / speed;
        den += len / speed;
    }
    Ok(num / den)
}
