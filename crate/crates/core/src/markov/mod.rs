//! Chains with rates `q_ij = c_ij exp(-k_ij / eps)`: arrows, ergodic
//! classes, invariant measures and the rank-by-rank recursion.

mod tree;

pub use tree::{invariant_measure_tree, TreeMeasure, MAX_TREE_STATES};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cycles::TIE_TOL;
use crate::error::{Error, Result};
use crate::expm::transient_row;
use crate::linalg::solve_dense;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFamily {
    /// Prefactors `c_ij > 0` (diagonal ignored).
    pub c: Vec<Vec<f64>>,
    /// Exponents `k_ij >= 0` (diagonal ignored).
    pub k: Vec<Vec<f64>>,
}

impl RateFamily {
    pub fn new(c: Vec<Vec<f64>>, k: Vec<Vec<f64>>) -> Result<Self> {
        let n = c.len();
        if n == 0 || k.len() != n {
            return Err(Error::invalid("rate family needs matching nonempty matrices"));
        }
        for i in 0..n {
            if c[i].len() != n || k[i].len() != n {
                return Err(Error::invalid("rate matrices must be square"));
            }
            for j in (0..n).filter(|j| *j != i) {
                if !(c[i][j] > 0.0 && c[i][j].is_finite()) {
                    return Err(Error::invalid(format!("c[{i}][{j}] must be > 0")));
                }
                if !(k[i][j] >= 0.0 && k[i][j].is_finite()) {
                    return Err(Error::invalid(format!("k[{i}][{j}] must be finite and >= 0")));
                }
            }
        }
        Ok(RateFamily { c, k })
    }

    /// Unit prefactors.
    pub fn from_exponents(k: Vec<Vec<f64>>) -> Result<Self> {
        let n = k.len();
        RateFamily::new(vec![vec![1.0; n]; n], k)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn rate(&self, i: usize, j: usize, eps: f64) -> f64 {
        if i == j {
            0.0
        } else {
            self.c[i][j] * (-self.k[i][j] / eps).exp()
        }
    }

    fn row_min(&self, i: usize) -> f64 {
        (0..self.len())
            .filter(|j| *j != i)
            .map(|j| self.k[i][j])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Arrow `i -> j` iff `k_ij` is minimal in row `i` (ties give several).
pub fn arrows(rates: &RateFamily) -> Vec<Vec<usize>> {
    let n = rates.len();
    (0..n)
        .map(|i| {
            let m = rates.row_min(i);
            (0..n)
                .filter(|j| *j != i && rates.k[i][*j] - m <= TIE_TOL)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDecomposition {
    /// Closed strongly connected components, each sorted, ordered by their
    /// smallest state.
    pub classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    /// For each transient state (same order), the classes it can reach.
    pub reach: Vec<Vec<usize>>,
}

impl ClassDecomposition {
    pub fn class_of(&self, state: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&state))
    }
}

fn reachability(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = vec![vec![false; n]; n];
    for s in 0..n {
        let mut stack = vec![s];
        r[s][s] = true;
        while let Some(x) = stack.pop() {
            for y in &adj[x] {
                if !r[s][*y] {
                    r[s][*y] = true;
                    stack.push(*y);
                }
            }
        }
    }
    r
}

/// Closed classes and transient states of an arrow digraph.
pub fn decompose(adj: &[Vec<usize>]) -> Result<ClassDecomposition> {
    let n = adj.len();
    if adj.iter().enumerate().any(|(i, a)| a.is_empty() && n > 1 && i < n) {
        return Err(Error::invalid("every state needs at least one arrow"));
    }
    let r = reachability(adj);
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let scc: Vec<usize> = (0..n).filter(|t| r[s][*t] && r[*t][s]).collect();
        // closed: everything reachable from s is in the component
        let closed = (0..n).all(|t| !r[s][t] || r[t][s]);
        for t in &scc {
            assigned[*t] = true;
        }
        if closed {
            classes.push(scc);
        }
    }
    classes.sort_by_key(|c| c[0]);
    let in_class: Vec<Option<usize>> = (0..n)
        .map(|s| classes.iter().position(|c| c.contains(&s)))
        .collect();
    let transient: Vec<usize> = (0..n).filter(|s| in_class[*s].is_none()).collect();
    let mut reach = Vec::with_capacity(transient.len());
    for s in &transient {
        let mut ks: Vec<usize> = (0..n)
            .filter(|t| r[*s][*t])
            .filter_map(|t| in_class[t])
            .collect();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            return Err(Error::invalid(format!("state {s} reaches no class")));
        }
        reach.push(ks);
    }
    Ok(ClassDecomposition {
        classes,
        transient,
        reach,
    })
}

/// `nu Q = 0`, `sum nu = 1` on the chain restricted to `class`.
pub fn invariant_measure_direct(rates: &RateFamily, class: &[usize], eps: f64) -> Result<Vec<f64>> {
    let n = class.len();
    if n == 0 || n > 50 {
        return Err(Error::invalid("class size must be in 1..=50"));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // transpose of the generator, last equation replaced by normalisation
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (ii, i) in class.iter().enumerate() {
        let mut out = 0.0;
        for (jj, j) in class.iter().enumerate() {
            if ii != jj {
                let q = rates.rate(*i, *j, eps);
                a[(jj, ii)] += q;
                out += q;
            }
        }
        a[(ii, ii)] -= out;
    }
    for jj in 0..n {
        a[(n - 1, jj)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let nu = solve_dense(a, rhs)?;
    Ok(nu.iter().cloned().collect())
}

/// Node of the rank hierarchy. Rank 0 nodes are states.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovNode {
    pub id: usize,
    pub rank: usize,
    pub children: Vec<usize>,
    /// Exponent of the limiting occupation of each child.
    pub kappa: Vec<f64>,
    pub members: Vec<usize>,
    pub exit_exponent: Option<f64>,
    /// State entered on the exponent-minimal exit (`None` when tied).
    pub exit_leaf: Option<usize>,
    /// State carrying the limiting mass (`None` when shared).
    pub main_state: Option<usize>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankChain {
    pub rank: usize,
    /// Node ids of this rank's states.
    pub nodes: Vec<usize>,
    /// Exponents (and heuristic prefactors) between them.
    pub rates: RateFamily,
    pub decomposition: ClassDecomposition,
    /// Limiting invariant measure of each class.
    pub nu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovHierarchy {
    pub chains: Vec<RankChain>,
    pub nodes: Vec<MarkovNode>,
    pub root: usize,
    /// Smallest separation met in any row minimum, class support or exit
    /// choice; zero when something is tied.
    pub min_gap: f64,
}

impl MarkovHierarchy {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Exit {
    exponent: f64,
    prefactor: f64,
    landing: usize,
    tied: bool,
    /// Distance to the best candidate with a different landing state.
    gap: f64,
}

/// One aggregation step: exponents between the next-rank nodes (`groups`,
/// closed classes followed by transient singletons). `land[a][b]` is the
/// state entered by the jump `a -> b`.
fn aggregate_step(
    rates: &RateFamily,
    land: &[Vec<usize>],
    groups: &[Vec<usize>],
    trees: &[TreeMeasure],
) -> Vec<Vec<Exit>> {
    let m = groups.len();
    let mut out: Vec<Vec<Exit>> = Vec::with_capacity(m);
    for (gi, g) in groups.iter().enumerate() {
        let mut row = Vec::with_capacity(m);
        for (hi, h) in groups.iter().enumerate() {
            if gi == hi {
                row.push(Exit {
                    exponent: 0.0,
                    prefactor: 1.0,
                    landing: 0,
                    tied: false,
                    gap: f64::INFINITY,
                });
                continue;
            }
            let mut cands: Vec<(f64, f64, usize)> = Vec::new();
            for (pos, c) in g.iter().enumerate() {
                let kap = trees[gi].exponents[pos];
                let w = trees[gi].leading[pos];
                for d in h {
                    cands.push((kap + rates.k[*c][*d], w * rates.c[*c][*d], land[*c][*d]));
                }
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            let best = cands[0];
            let gap = cands
                .iter()
                .filter(|c| c.2 != best.2)
                .map(|c| c.0 - best.0)
                .fold(f64::INFINITY, f64::min);
            // heuristic prefactor: leading tree weight times edge prefactor
            let prefactor: f64 = cands
                .iter()
                .filter(|c| c.0 - best.0 <= TIE_TOL)
                .map(|c| c.1)
                .sum();
            row.push(Exit {
                exponent: best.0,
                prefactor,
                landing: best.2,
                tied: gap <= TIE_TOL,
                gap,
            });
        }
        out.push(row);
    }
    out
}

/// Full rank recursion until a single node remains.
pub fn build_markov_hierarchy(rates: &RateFamily) -> Result<MarkovHierarchy> {
    let n = rates.len();
    let mut nodes: Vec<MarkovNode> = (0..n)
        .map(|i| MarkovNode {
            id: i,
            rank: 0,
            children: vec![],
            kappa: vec![],
            members: vec![i],
            exit_exponent: None,
            exit_leaf: None,
            main_state: Some(i),
            parent: None,
        })
        .collect();
    let mut cur_ids: Vec<usize> = (0..n).collect();
    let mut cur = rates.clone();
    let mut land: Vec<Vec<usize>> = (0..n).map(|_| (0..n).collect()).collect();
    let mut land_tied = vec![vec![false; n]; n];
    let mut chains = Vec::new();
    let mut rank = 0;
    let mut min_gap = f64::INFINITY;
    while cur_ids.len() > 1 {
        let m = cur.len();
        let adj = arrows(&cur);
        let dec = decompose(&adj)?;
        // exits of this rank's nodes
        for a in 0..m {
            let targets = &adj[a];
            let nd = &mut nodes[cur_ids[a]];
            let rm = cur.row_min(a);
            nd.exit_exponent = Some(rm);
            let second = (0..m)
                .filter(|b| *b != a && !targets.contains(b))
                .map(|b| cur.k[a][b] - rm)
                .fold(f64::INFINITY, f64::min);
            min_gap = min_gap.min(if targets.len() > 1 { 0.0 } else { second });
            let leaves: Vec<usize> = targets.iter().map(|b| land[a][*b]).collect();
            let unique = leaves.windows(2).all(|w| w[0] == w[1])
                && targets.iter().all(|b| !land_tied[a][*b]);
            nd.exit_leaf = if unique { leaves.first().copied() } else { None };
        }
        // closed classes, then states on no class as singletons
        let mut groups: Vec<Vec<usize>> = dec.classes.clone();
        groups.extend(dec.transient.iter().map(|x| vec![*x]));
        let trees: Vec<TreeMeasure> = groups
            .iter()
            .map(|cls| invariant_measure_tree(&cur, cls, None))
            .collect::<Result<_>>()?;
        let mut next_ids = Vec::with_capacity(groups.len());
        for (cls, tr) in groups.iter().zip(&trees) {
            let id = nodes.len();
            let mut members: Vec<usize> = cls
                .iter()
                .flat_map(|c| nodes[cur_ids[*c]].members.clone())
                .collect();
            members.sort_unstable();
            let support: Vec<usize> = (0..cls.len()).filter(|i| tr.exponents[*i] <= TIE_TOL).collect();
            let kmin = tr
                .exponents
                .iter()
                .filter(|e| **e > TIE_TOL)
                .fold(f64::INFINITY, |a, b| a.min(*b));
            min_gap = min_gap.min(if support.len() > 1 { 0.0 } else { kmin });
            let main_state = if support.len() == 1 {
                nodes[cur_ids[cls[support[0]]]].main_state
            } else {
                None
            };
            for c in cls {
                nodes[cur_ids[*c]].parent = Some(id);
            }
            nodes.push(MarkovNode {
                id,
                rank: rank + 1,
                children: cls.iter().map(|c| cur_ids[*c]).collect(),
                kappa: tr.exponents.clone(),
                members,
                exit_exponent: None,
                exit_leaf: None,
                main_state,
                parent: None,
            });
            next_ids.push(id);
        }
        let n_classes = dec.classes.len();
        let exits = aggregate_step(&cur, &land, &groups, &trees);
        let k = groups.len();
        let mut kk = vec![vec![0.0; k]; k];
        let mut cc = vec![vec![1.0; k]; k];
        let mut ll = vec![vec![0usize; k]; k];
        let mut lt = vec![vec![false; k]; k];
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    let e = &exits[a][b];
                    kk[a][b] = e.exponent;
                    cc[a][b] = e.prefactor;
                    ll[a][b] = e.landing;
                    lt[a][b] = e.tied;
                    min_gap = min_gap.min(e.gap);
                }
            }
        }
        chains.push(RankChain {
            rank,
            nodes: cur_ids.clone(),
            rates: cur.clone(),
            decomposition: dec,
            nu: trees[..n_classes].iter().map(|t| t.limit.clone()).collect(),
        });
        cur = RateFamily { c: cc, k: kk };
        land = ll;
        land_tied = lt;
        cur_ids = next_ids;
        rank += 1;
    }
    Ok(MarkovHierarchy {
        chains,
        nodes,
        root: cur_ids[0],
        min_gap,
    })
}

/// Row `i` of `exp(Q(eps) e^{lambda/eps})`.
pub fn chain_oracle(rates: &RateFamily, i: usize, lambda: f64, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let n = rates.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| rates.rate(a, b, eps)).collect())
        .collect();
    transient_row(&q, i, lambda / eps)
}

/// Predicted resting state at scale `lambda` from state `leaf`.
pub fn metastable_state(h: &MarkovHierarchy, leaf: usize, lambda: f64) -> Result<usize> {
    for nd in &h.nodes {
        if let Some(e) = nd.exit_exponent {
            if (e - lambda).abs() <= TIE_TOL {
                return Err(Error::AtThreshold(format!("lambda = {lambda} is an exit exponent")));
            }
        }
    }
    let mut cur = leaf;
    for _ in 0..=h.nodes.len() * h.nodes.len() {
        let mut top = None;
        let mut x = cur;
        loop {
            match h.nodes[x].exit_exponent {
                Some(e) if e < lambda => {
                    top = Some(x);
                    match h.nodes[x].parent {
                        Some(p) => x = p,
                        None => break,
                    }
                }
                _ => break,
            }
        }
        let Some(a) = top else {
            return Ok(cur);
        };
        if let Some(p) = h.nodes[a].parent {
            let all_fast = h.nodes[p]
                .children
                .iter()
                .all(|c| h.nodes[*c].exit_exponent.is_some_and(|e| e < lambda));
            if all_fast {
                return h.nodes[p].main_state.ok_or_else(|| {
                    Error::NotGeneric(format!("limiting measure of node {p} is not a single state"))
                });
            }
        }
        cur = h.nodes[a]
            .exit_leaf
            .ok_or_else(|| Error::NotGeneric(format!("node {a} has tied exits")))?;
    }
    Err(Error::invalid("metastable walk did not settle"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_state_chain_classes() {
        let dec = decompose(&arrows(&crate::fixtures::eleven_state_chain())).unwrap();
        let one_based: Vec<Vec<usize>> = dec
            .classes
            .iter()
            .map(|c| c.iter().map(|s| s + 1).collect())
            .collect();
        assert_eq!(one_based, vec![vec![1, 2, 3], vec![4, 5], vec![6, 7, 8, 9]]);
        assert_eq!(dec.transient, vec![9, 10]);
        assert_eq!(dec.reach, vec![vec![1, 2], vec![2]]);
    }

    #[test]
    fn arrow_basics() {
        let r = RateFamily::from_exponents(vec![
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let a = arrows(&r);
        assert_eq!(a[0], vec![1]);
        assert_eq!(a[1], vec![0, 2, 3]);
        let full = decompose(&a).unwrap();
        assert_eq!(full.classes, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn two_state_measures() {
        let r = RateFamily::new(
            vec![vec![0.0, 2.0], vec![3.0, 0.0]],
            vec![vec![0.0, 0.5], vec![1.0, 0.0]],
        )
        .unwrap();
        let eps = 0.3;
        let (q12, q21) = (r.rate(0, 1, eps), r.rate(1, 0, eps));
        let exact = [q21 / (q12 + q21), q12 / (q12 + q21)];
        let d = invariant_measure_direct(&r, &[0, 1], eps).unwrap();
        let t = invariant_measure_tree(&r, &[0, 1], Some(eps)).unwrap();
        for i in 0..2 {
            assert!((d[i] - exact[i]).abs() < 1e-14);
            assert!((t.nu[i] - exact[i]).abs() < 1e-14);
        }
        assert_eq!(t.exponents, vec![0.5, 0.0]);
        assert_eq!(t.limit, vec![0.0, 1.0]);
    }

    #[test]
    fn symmetric_cycle_is_uniform() {
        let r = RateFamily::from_exponents(vec![
            vec![0.0, 1.0, 5.0],
            vec![5.0, 0.0, 1.0],
            vec![1.0, 5.0, 0.0],
        ])
        .unwrap();
        let d = invariant_measure_direct(&r, &[0, 1, 2], 0.2).unwrap();
        let t = invariant_measure_tree(&r, &[0, 1, 2], Some(0.2)).unwrap();
        for i in 0..3 {
            assert!((d[i] - 1.0 / 3.0).abs() < 1e-12);
            assert!((t.nu[i] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_size_cap() {
        let r = RateFamily::from_exponents(vec![vec![1.0; 9]; 9]).unwrap();
        let all: Vec<usize> = (0..9).collect();
        assert!(invariant_measure_tree(&r, &all, Some(0.1)).is_err());
        assert!(invariant_measure_direct(&r, &all, 0.1).is_ok());
    }

    #[test]
    fn two_pairs_aggregate_with_shift() {
        // classes {0,1} and {2,3}; inside exponents 1 and 2 make kappa(0)=1
        let mut k = vec![vec![9.0; 4]; 4];
        k[0][1] = 1.0;
        k[1][0] = 2.0;
        k[2][3] = 1.0;
        k[3][2] = 1.5;
        k[0][2] = 4.0; // leaves from state 0, shifted by kappa(0) = 1
        k[3][1] = 3.0; // leaves from state 3, kappa(3) = 0
        let r = RateFamily::from_exponents(k).unwrap();
        let h = build_markov_hierarchy(&r).unwrap();
        let top = &h.chains[1].rates;
        assert!((top.k[0][1] - 5.0).abs() < 1e-12);
        assert!((top.k[1][0] - 3.0).abs() < 1e-12);
        assert_eq!(h.chains.len(), 2);
    }
}
