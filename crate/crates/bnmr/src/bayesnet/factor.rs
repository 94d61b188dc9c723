//! Factors over binary variables and exact inference by variable
//! elimination with a min-degree ordering.

use super::BayesianNetwork;
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// Table over a sorted set of binary variables. Entry index encodes the
/// assignment with `vars[0]` as the least-significant bit.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    fn value_at(&self, assignment: &BTreeMap<usize, u8>) -> f64 {
        let mut idx = 0usize;
        for (k, v) in self.vars.iter().enumerate() {
            if assignment[v] == 1 {
                idx |= 1 << k;
            }
        }
        self.table[idx]
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let vars: Vec<usize> = {
            let mut s: BTreeSet<usize> = self.vars.iter().copied().collect();
            s.extend(other.vars.iter().copied());
            s.into_iter().collect()
        };
        let mut table = vec![0.0; 1 << vars.len()];
        let mut assignment: BTreeMap<usize, u8> = BTreeMap::new();
        for (idx, slot) in table.iter_mut().enumerate() {
            for (k, v) in vars.iter().enumerate() {
                assignment.insert(*v, ((idx >> k) & 1) as u8);
            }
            *slot = self.value_at(&assignment) * other.value_at(&assignment);
        }
        Factor { vars, table }
    }

    /// Sum out one variable.
    pub fn marginalize(&self, var: usize) -> Factor {
        let pos = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable not in factor");
        let vars: Vec<usize> = self
            .vars
            .iter()
            .copied()
            .filter(|&v| v != var)
            .collect();
        let mut table = vec![0.0; 1 << vars.len()];
        for (idx, value) in self.table.iter().enumerate() {
            let low = idx & ((1 << pos) - 1);
            let high = (idx >> (pos + 1)) << pos;
            table[high | low] += value;
        }
        Factor { vars, table }
    }

    /// Fix one variable to a value.
    pub fn reduce(&self, var: usize, value: u8) -> Factor {
        let pos = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable not in factor");
        let vars: Vec<usize> = self
            .vars
            .iter()
            .copied()
            .filter(|&v| v != var)
            .collect();
        let mut table = vec![0.0; 1 << vars.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            let low = idx & ((1 << pos) - 1);
            let high = (idx >> pos) << (pos + 1);
            let full = high | ((value as usize) << pos) | low;
            *slot = self.table[full];
        }
        Factor { vars, table }
    }
}

/// CPT of one node as a factor over {parents, node}.
pub(crate) fn cpt_factor(bn: &BayesianNetwork, node: usize) -> Factor {
    let cpt = &bn.cpts[node];
    let vars: Vec<usize> = {
        let mut s: BTreeSet<usize> = cpt.parent_order.iter().copied().collect();
        s.insert(node);
        s.into_iter().collect()
    };
    let mut table = vec![0.0; 1 << vars.len()];
    for (idx, slot) in table.iter_mut().enumerate() {
        let bit_of = |v: usize| -> u8 {
            let k = vars.iter().position(|&w| w == v).unwrap();
            ((idx >> k) & 1) as u8
        };
        let mut pconfig = 0usize;
        for (k, p) in cpt.parent_order.iter().enumerate() {
            if bit_of(*p) == 1 {
                pconfig |= 1 << k;
            }
        }
        let p1 = cpt.table[pconfig];
        *slot = if bit_of(node) == 1 { p1 } else { 1.0 - p1 };
    }
    Factor { vars, table }
}

/// Min-degree elimination order over the moral graph induced by `factors`,
/// restricted to `to_eliminate`. Ties break toward the smallest node index.
fn min_degree_order(factors: &[Factor], to_eliminate: &BTreeSet<usize>) -> Vec<usize> {
    let mut neighbors: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut all_vars: BTreeSet<usize> = BTreeSet::new();
    for f in factors {
        all_vars.extend(f.vars.iter().copied());
    }
    for &v in &all_vars {
        neighbors.insert(v, BTreeSet::new());
    }
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    neighbors.get_mut(&a).unwrap().insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = to_eliminate.clone();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let pick = *remaining
            .iter()
            .min_by_key(|&&v| (neighbors[&v].len(), v))
            .unwrap();
        order.push(pick);
        remaining.remove(&pick);
        let nbrs: Vec<usize> = neighbors[&pick].iter().copied().collect();
        for &a in &nbrs {
            neighbors.get_mut(&a).unwrap().remove(&pick);
        }
        // fill-in among the picked node's neighbors
        for i in 0..nbrs.len() {
            for j in (i + 1)..nbrs.len() {
                neighbors.get_mut(&nbrs[i]).unwrap().insert(nbrs[j]);
                neighbors.get_mut(&nbrs[j]).unwrap().insert(nbrs[i]);
            }
        }
        neighbors.remove(&pick);
    }
    order
}

/// Exact conditional probability P(query_node = query_value | evidence).
pub fn variable_elimination(
    bn: &BayesianNetwork,
    query: (usize, u8),
    evidence: &[(usize, u8)],
) -> Result<f64> {
    let n = bn.structure.node_count();
    let (qnode, qvalue) = query;
    if qnode >= n {
        return Err(Error::Shape(format!("query node {qnode} out of range")));
    }
    if qvalue > 1 {
        return Err(Error::Data(format!("query value {qvalue} is not binary")));
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for &(v, val) in evidence {
        if v >= n {
            return Err(Error::Shape(format!("evidence node {v} out of range")));
        }
        if val > 1 {
            return Err(Error::Data(format!("evidence value {val} is not binary")));
        }
        if !seen.insert(v) {
            return Err(Error::Data(format!("duplicate evidence for node {v}")));
        }
    }
    if seen.contains(&qnode) {
        return Err(Error::Data(format!("query node {qnode} appears in evidence")));
    }

    let mut factors: Vec<Factor> = (0..n).map(|i| cpt_factor(bn, i)).collect();
    for &(v, val) in evidence {
        factors = factors
            .into_iter()
            .map(|f| if f.vars.contains(&v) { f.reduce(v, val) } else { f })
            .collect();
    }

    let hidden: BTreeSet<usize> = (0..n)
        .filter(|v| *v != qnode && !seen.contains(v))
        .collect();
    let order = min_degree_order(&factors, &hidden);
    for v in order {
        let (involved, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if involved.is_empty() {
            continue;
        }
        let mut product = involved[0].clone();
        for f in &involved[1..] {
            product = product.product(f);
        }
        factors.push(product.marginalize(v));
    }

    let mut result = Factor {
        vars: vec![],
        table: vec![1.0],
    };
    for f in &factors {
        result = result.product(f);
    }
    debug_assert_eq!(result.vars, vec![qnode]);
    let total: f64 = result.table.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedConditional(
            "evidence has probability zero".into(),
        ));
    }
    Ok(result.table[qvalue as usize] / total)
}
