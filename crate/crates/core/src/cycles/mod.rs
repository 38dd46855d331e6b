//! Hierarchy of cycles built from transition exponents `V_ij`, metastable
//! states per time scale, and limits of Cauchy problems.

mod cauchy;

pub use cauchy::{predict_linear_cauchy, predict_nonlinear_cauchy, Basin, NonlinearPrediction};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expm::transient_row;
use crate::rng::RngStream;

/// Two exponents closer than this count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Off-diagonal transition exponents between `l` compacts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionExponents {
    v: Vec<Vec<f64>>,
}

impl TransitionExponents {
    pub fn new(v: Vec<Vec<f64>>) -> Result<Self> {
        let l = v.len();
        if l == 0 {
            return Err(Error::invalid("empty exponent matrix"));
        }
        for (i, row) in v.iter().enumerate() {
            if row.len() != l {
                return Err(Error::invalid("exponent matrix must be square"));
            }
            for (j, x) in row.iter().enumerate() {
                if i != j && !(x.is_finite() && *x >= 0.0) {
                    return Err(Error::invalid(format!("V[{i}][{j}] = {x} must be finite and >= 0")));
                }
            }
        }
        Ok(TransitionExponents { v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// Unique minimiser of `row` over `j != skip`, with the gap to the runner-up.
fn argmin_excluding(row: &[f64], skip: usize) -> (usize, f64, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, v) in row.iter().enumerate() {
        if j == skip {
            continue;
        }
        if *v < best.1 {
            second = best.1;
            best = (j, *v);
        } else if *v < second {
            second = *v;
        }
    }
    (best.0, best.1, second - best.1)
}

/// `N(i) = argmin_{j != i} V_ij`.
pub fn n_map(v: &TransitionExponents) -> Result<Vec<usize>> {
    let l = v.len();
    let mut out = Vec::with_capacity(l);
    let mut ties = Vec::new();
    for i in 0..l {
        if l == 1 {
            out.push(0);
            continue;
        }
        let (j, _, gap) = argmin_excluding(&v.v[i], i);
        if gap <= TIE_TOL {
            ties.push(i);
        }
        out.push(j);
    }
    if !ties.is_empty() {
        return Err(Error::NotGeneric(format!("tied row minimum in rows {ties:?}")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleNode {
    pub id: usize,
    pub rank: usize,
    /// Children in cyclic successor order.
    pub children: Vec<usize>,
    /// Occupancy exponent `kappa(c) = E_max - E(c)` per child.
    pub kappa: Vec<f64>,
    /// Leaf states contained in this node.
    pub members: Vec<usize>,
    /// `None` for the root.
    pub exit_exponent: Option<f64>,
    pub exit_target: Option<usize>,
    /// State reached when the node is left.
    pub exit_leaf: Option<usize>,
    pub main_state: usize,
    pub parent: Option<usize>,
    /// Wrapper around a node that is on no cycle at its rank.
    pub singleton: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hierarchy {
    pub nodes: Vec<CycleNode>,
    /// Node ids per rank; rank 0 are the states.
    pub ranks: Vec<Vec<usize>>,
    pub root: usize,
    /// Smallest gap met in any argmin or argmax while building.
    pub min_gap: f64,
}

impl Hierarchy {
    pub fn len(&self) -> usize {
        self.ranks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks[0].is_empty()
    }

    pub fn node(&self, id: usize) -> &CycleNode {
        &self.nodes[id]
    }

    /// Leaf-to-root chain of node ids.
    pub fn ancestors(&self, leaf: usize) -> Vec<usize> {
        let mut out = vec![leaf];
        while let Some(p) = self.nodes[*out.last().unwrap()].parent {
            out.push(p);
        }
        out
    }

    /// Distinct exit exponents of all non-root nodes, sorted.
    pub fn exit_exponents(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.nodes.iter().filter_map(|n| n.exit_exponent).collect();
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() <= TIE_TOL);
        e
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds every rank of the cycle hierarchy.
pub fn build_hierarchy(v: &TransitionExponents) -> Result<Hierarchy> {
    let l = v.len();
    let mut nodes: Vec<CycleNode> = (0..l)
        .map(|i| CycleNode {
            id: i,
            rank: 0,
            children: vec![],
            kappa: vec![],
            members: vec![i],
            exit_exponent: None,
            exit_target: None,
            exit_leaf: None,
            main_state: i,
            parent: None,
            singleton: false,
        })
        .collect();
    let mut ranks = vec![(0..l).collect::<Vec<_>>()];
    let mut w: Vec<Vec<f64>> = v.v.clone();
    let mut land: Vec<Vec<usize>> = (0..l).map(|_| (0..l).collect()).collect();
    let mut min_gap = f64::INFINITY;

    while ranks.last().unwrap().len() > 1 {
        let cur = ranks.last().unwrap().clone();
        let m = cur.len();
        let rank = ranks.len();
        let mut e = vec![0.0; m];
        let mut succ = vec![0; m];
        for a in 0..m {
            let (b, val, gap) = argmin_excluding(&w[a], a);
            if gap <= TIE_TOL {
                return Err(Error::NotGeneric(format!(
                    "tied exit from node {} at rank {}",
                    cur[a],
                    rank - 1
                )));
            }
            min_gap = min_gap.min(gap);
            e[a] = val;
            succ[a] = b;
            let nd = &mut nodes[cur[a]];
            nd.exit_exponent = Some(val);
            nd.exit_target = Some(cur[b]);
            nd.exit_leaf = Some(land[a][b]);
        }

        // nodes lying on a cycle of the successor map
        let mut on_cycle = vec![false; m];
        for a in 0..m {
            let mut x = a;
            for _ in 0..m {
                x = succ[x];
            }
            // after m steps x is on a cycle
            let start = x;
            loop {
                on_cycle[x] = true;
                x = succ[x];
                if x == start {
                    break;
                }
            }
        }
        let mut group_of = vec![usize::MAX; m];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for a in 0..m {
            if group_of[a] != usize::MAX {
                continue;
            }
            let g = groups.len();
            if on_cycle[a] {
                let mut members = vec![a];
                group_of[a] = g;
                let mut x = succ[a];
                while x != a {
                    group_of[x] = g;
                    members.push(x);
                    x = succ[x];
                }
                groups.push(members);
            } else {
                group_of[a] = g;
                groups.push(vec![a]);
            }
        }

        let mut next_ids = Vec::with_capacity(groups.len());
        let mut kappas = Vec::with_capacity(groups.len());
        for members in &groups {
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by(|x, y| e[members[*y]].total_cmp(&e[members[*x]]));
            if members.len() > 1 {
                let gap = e[members[order[0]]] - e[members[order[1]]];
                if gap <= TIE_TOL {
                    return Err(Error::NotGeneric(format!(
                        "tied main state in a cycle at rank {rank}"
                    )));
                }
                min_gap = min_gap.min(gap);
            }
            let emax = e[members[order[0]]];
            let kappa: Vec<f64> = members.iter().map(|c| emax - e[*c]).collect();
            let id = nodes.len();
            let mut leaves: Vec<usize> = members
                .iter()
                .flat_map(|c| nodes[cur[*c]].members.clone())
                .collect();
            leaves.sort_unstable();
            let main_state = nodes[cur[members[order[0]]]].main_state;
            for c in members {
                nodes[cur[*c]].parent = Some(id);
            }
            nodes.push(CycleNode {
                id,
                rank,
                children: members.iter().map(|c| cur[*c]).collect(),
                kappa: kappa.clone(),
                members: leaves,
                exit_exponent: None,
                exit_target: None,
                exit_leaf: None,
                main_state,
                parent: None,
                singleton: members.len() == 1,
            });
            next_ids.push(id);
            kappas.push(kappa);
        }

        // exponents between the new nodes
        let g_n = groups.len();
        let mut w2 = vec![vec![0.0; g_n]; g_n];
        let mut land2 = vec![vec![0usize; g_n]; g_n];
        for (gi, gm) in groups.iter().enumerate() {
            for (hi, hm) in groups.iter().enumerate() {
                if gi == hi {
                    continue;
                }
                let mut cands: Vec<(f64, usize)> = Vec::new();
                for (ci, c) in gm.iter().enumerate() {
                    for d in hm {
                        cands.push((kappas[gi][ci] + w[*c][*d], land[*c][*d]));
                    }
                }
                cands.sort_by(|p, q| p.0.total_cmp(&q.0));
                w2[gi][hi] = cands[0].0;
                land2[gi][hi] = cands[0].1;
                if let Some(other) = cands.iter().skip(1).find(|c| c.1 != cands[0].1) {
                    let gap = other.0 - cands[0].0;
                    if gap <= TIE_TOL {
                        return Err(Error::NotGeneric(format!(
                            "tied landing state between nodes at rank {rank}"
                        )));
                    }
                    min_gap = min_gap.min(gap);
                }
            }
        }
        w = w2;
        land = land2;
        ranks.push(next_ids);
    }
    let root = ranks.last().unwrap()[0];
    Ok(Hierarchy {
        nodes,
        ranks,
        root,
        min_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetastableProfile {
    pub initial: usize,
    /// `0 < lambda_1 < ... < lambda_m`.
    pub thresholds: Vec<f64>,
    /// `states[0] = initial`; `states[k]` holds between `thresholds[k-1]`
    /// and `thresholds[k]`.
    pub states: Vec<usize>,
}

impl MetastableProfile {
    pub fn state_at(&self, lambda: f64) -> usize {
        let k = self.thresholds.iter().filter(|t| **t < lambda).count();
        self.states[k]
    }
}

/// Where the process started at `leaf` sits on the time scale
/// `T = e^{lambda / eps}`.
pub fn metastable_state(h: &Hierarchy, leaf: usize, lambda: f64) -> Result<usize> {
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
        let p = h.nodes[a].parent.expect("a node with an exit has a parent");
        let all_fast = h.nodes[p]
            .children
            .iter()
            .all(|c| h.nodes[*c].exit_exponent.is_some_and(|e| e < lambda));
        if all_fast {
            return Ok(h.nodes[p].main_state);
        }
        cur = h.nodes[a].exit_leaf.expect("exit leaf recorded");
    }
    Err(Error::invalid("metastable walk did not settle"))
}

pub fn metastable_profile(h: &Hierarchy, leaf: usize) -> Result<MetastableProfile> {
    if leaf >= h.len() {
        return Err(Error::invalid(format!("state {leaf} out of range")));
    }
    let cands = h.exit_exponents();
    let mut thresholds = Vec::new();
    let mut states = vec![leaf];
    for (k, c) in cands.iter().enumerate() {
        let above = match cands.get(k + 1) {
            Some(n) => 0.5 * (c + n),
            None => c + 1.0,
        };
        let s = metastable_state(h, leaf, above)?;
        if s != *states.last().unwrap() {
            thresholds.push(*c);
            states.push(s);
        }
    }
    Ok(MetastableProfile {
        initial: leaf,
        thresholds,
        states,
    })
}

/// Row `i` of `exp(Q e^{lambda/eps})` with `q_ij = exp(-V_ij / eps)`.
pub fn oracle_distribution(
    v: &TransitionExponents,
    i: usize,
    lambda: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    if v.len() > 8 {
        return Err(Error::invalid("oracle limited to 8 states"));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::invalid(format!("oracle needs eps in (0, 0.1], got {eps}")));
    }
    let rates: Vec<Vec<f64>> = v
        .v
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, x)| if r == c { 0.0 } else { (-x / eps).exp() })
                .collect()
        })
        .collect();
    transient_row(&rates, i, lambda / eps)
}

/// Random exponent matrix with entries in `[lo, hi]` whose hierarchy has
/// every argmin separated by at least `margin`.
pub fn random_generic(
    l: usize,
    lo: f64,
    hi: f64,
    margin: f64,
    rng: &mut RngStream,
) -> Result<(TransitionExponents, Hierarchy)> {
    for _ in 0..10_000 {
        let v: Vec<Vec<f64>> = (0..l)
            .map(|i| {
                (0..l)
                    .map(|j| if i == j { 0.0 } else { lo + (hi - lo) * rng.uniform() })
                    .collect()
            })
            .collect();
        let v = TransitionExponents::new(v)?;
        if let Ok(h) = build_hierarchy(&v) {
            if h.min_gap >= margin {
                return Ok((v, h));
            }
        }
    }
    Err(Error::NotGeneric(format!("no {l}x{l} matrix with margin {margin} found")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(v: Vec<Vec<f64>>) -> TransitionExponents {
        TransitionExponents::new(v).unwrap()
    }

    #[test]
    fn successor_map() {
        let two = tx(vec![vec![0.0, 5.0], vec![0.3, 0.0]]);
        assert_eq!(n_map(&two).unwrap(), vec![1, 0]);
        let v = tx(vec![vec![0.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![4.0, 1.0, 0.0]]);
        assert_eq!(n_map(&v).unwrap(), vec![1, 0, 1]);
        let tie = tx(vec![vec![0.0, 1.0, 1.0], vec![2.0, 0.0, 5.0], vec![4.0, 1.0, 0.0]]);
        assert!(matches!(n_map(&tie), Err(Error::NotGeneric(_))));
    }

    #[test]
    fn two_state_cycle() {
        let v = tx(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        let h = build_hierarchy(&v).unwrap();
        let root = h.node(h.root);
        assert_eq!(root.rank, 1);
        assert_eq!(root.main_state, 1);
        assert_eq!(root.children, vec![0, 1]);
        assert_eq!(root.kappa, vec![1.0, 0.0]);
        let p = metastable_profile(&h, 0).unwrap();
        assert_eq!(p.thresholds, vec![1.0]);
        assert_eq!(p.states, vec![0, 1]);
        let p = metastable_profile(&h, 1).unwrap();
        assert!(p.thresholds.is_empty());
        assert_eq!(p.states, vec![1]);
    }

    #[test]
    fn three_state_exit_exponent() {
        let v = tx(vec![vec![0.0, 1.0, 4.0], vec![2.0, 0.0, 5.0], vec![3.0, 1.0, 0.0]]);
        let h = build_hierarchy(&v).unwrap();
        let c12 = h.ranks[1]
            .iter()
            .map(|id| h.node(*id))
            .find(|n| n.members == vec![0, 1])
            .unwrap();
        assert_eq!(c12.exit_exponent, Some(5.0));
        assert_eq!(h.ranks.len(), 3);
        assert_eq!(h.node(h.root).members, vec![0, 1, 2]);
    }

    #[test]
    fn single_state() {
        let v = tx(vec![vec![0.0]]);
        let h = build_hierarchy(&v).unwrap();
        assert_eq!(h.root, 0);
        let p = metastable_profile(&h, 0).unwrap();
        assert_eq!(p.states, vec![0]);
        assert!(p.thresholds.is_empty());
    }

    #[test]
    fn threshold_lambda_is_refused() {
        let v = tx(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        let h = build_hierarchy(&v).unwrap();
        assert!(matches!(metastable_state(&h, 0, 1.0), Err(Error::AtThreshold(_))));
    }

    #[test]
    fn oracle_two_state() {
        let v = tx(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        let p = oracle_distribution(&v, 0, 0.0, 0.02).unwrap();
        assert!(p[0] > 0.999);
        let p = oracle_distribution(&v, 0, 1.5, 0.02).unwrap();
        assert!(p[1] >= 0.9);
        // closed form: q12 = e^{-50}, q21 = e^{-100}, T = e^{75}
        let (a, b) = ((-50f64).exp(), (-100f64).exp());
        let t = 75f64.exp();
        let exact = a / (a + b) * (1.0 - (-(a + b) * t).exp());
        assert!((p[1] - exact).abs() < 1e-12);
    }
}
