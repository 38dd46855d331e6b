//! Markov chain tree theorem by exhaustive enumeration of in-trees.

use super::RateFamily;
use crate::cycles::TIE_TOL;
use crate::error::{Error, Result};

pub const MAX_TREE_STATES: usize = 8;

/// Invariant measure of a class from its spanning in-trees.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMeasure {
    /// `nu^eps` at the requested eps (when one was given).
    pub nu: Vec<f64>,
    /// `kappa_i`: exponent of `nu_i`, zero on the limiting support.
    pub exponents: Vec<f64>,
    /// `lim nu^eps` from the leading tree coefficients.
    pub limit: Vec<f64>,
    /// Leading coefficient per state (sum of prefactor products over
    /// exponent-minimal trees rooted there).
    pub leading: Vec<f64>,
}

/// Calls `visit(root, parent)` for every spanning in-tree of `0..n`;
/// `parent[v]` is the state `v` points to.
fn for_each_tree(n: usize, mut visit: impl FnMut(usize, &[usize])) {
    let mut parent = vec![0usize; n];
    for root in 0..n {
        let others: Vec<usize> = (0..n).filter(|v| *v != root).collect();
        if others.is_empty() {
            visit(root, &parent);
            continue;
        }
        // odometer over parent choices (anything but itself)
        let mut digit = vec![0usize; others.len()];
        'outer: loop {
            for (k, v) in others.iter().enumerate() {
                let p = digit[k];
                parent[*v] = if p >= *v { p + 1 } else { p };
            }
            parent[root] = root;
            if is_in_tree(&parent, root) {
                visit(root, &parent);
            }
            for d in digit.iter_mut() {
                *d += 1;
                if *d < n - 1 {
                    continue 'outer;
                }
                *d = 0;
            }
            break;
        }
    }
}

fn is_in_tree(parent: &[usize], root: usize) -> bool {
    let n = parent.len();
    // follow parents; a path longer than n means a cycle
    let mut ok = vec![false; n];
    ok[root] = true;
    for s in 0..n {
        let mut x = s;
        let mut steps = 0;
        while !ok[x] {
            x = parent[x];
            steps += 1;
            if steps > n {
                return false;
            }
        }
        let mut y = s;
        while !ok[y] {
            ok[y] = true;
            y = parent[y];
        }
    }
    true
}

/// Tree-formula measure of the chain restricted to `class`. With `eps =
/// None` only exponents and limits are computed.
pub fn invariant_measure_tree(rates: &RateFamily, class: &[usize], eps: Option<f64>) -> Result<TreeMeasure> {
    let n = class.len();
    if n == 0 {
        return Err(Error::invalid("empty class"));
    }
    if n > MAX_TREE_STATES {
        return Err(Error::invalid(format!(
            "tree enumeration limited to {MAX_TREE_STATES} states, class has {n}"
        )));
    }
    let mut min_exp = vec![f64::INFINITY; n];
    for_each_tree(n, |root, parent| {
        let e: f64 = (0..n)
            .filter(|v| *v != root)
            .map(|v| rates.k[class[v]][class[parent[v]]])
            .sum();
        if e < min_exp[root] {
            min_exp[root] = e;
        }
    });
    let global = min_exp.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut leading = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for_each_tree(n, |root, parent| {
        let mut e = 0.0;
        let mut c = 1.0;
        for v in (0..n).filter(|v| *v != root) {
            e += rates.k[class[v]][class[parent[v]]];
            c *= rates.c[class[v]][class[parent[v]]];
        }
        if (e - min_exp[root]).abs() <= TIE_TOL {
            leading[root] += c;
        }
        if let Some(eps) = eps {
            weight[root] += c * (-(e - global) / eps).exp();
        }
    });
    let exponents: Vec<f64> = min_exp.iter().map(|e| e - global).collect();
    let support: f64 = (0..n)
        .filter(|i| exponents[*i] <= TIE_TOL)
        .map(|i| leading[i])
        .sum();
    let limit = (0..n)
        .map(|i| if exponents[i] <= TIE_TOL { leading[i] / support } else { 0.0 })
        .collect();
    let nu = if eps.is_some() {
        let s: f64 = weight.iter().sum();
        weight.iter().map(|w| w / s).collect()
    } else {
        vec![]
    };
    Ok(TreeMeasure {
        nu,
        exponents,
        limit,
        leading,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_counts_match_cayley() {
        // complete digraph on n nodes has n^{n-2} spanning trees per root
        for n in 1..=5usize {
            let mut count = vec![0usize; n];
            for_each_tree(n, |r, _| count[r] += 1);
            let expect = if n == 1 { 1 } else { n.pow(n as u32 - 2) };
            assert!(count.iter().all(|c| *c == expect), "n = {n}: {count:?}");
        }
    }
}
