//! Discrete Bayesian Network engine over binary variables: exhaustive
//! structure enumeration scored by K2, chi-square pruning, MLE parameter
//! fitting, exact inference, prediction-node management and online CPT
//! updates.

mod factor;

pub use factor::variable_elimination;

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Hard cap for exhaustive structure enumeration.
pub const MAX_EXHAUSTIVE_NODES: usize = 6;

/// Directed acyclic graph over named binary nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagStructure {
    node_names: Vec<String>,
    parents: Vec<Vec<usize>>,
}

impl DagStructure {
    pub fn new(node_names: Vec<String>, parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = node_names.len();
        if parents.len() != n {
            return Err(Error::Shape(format!(
                "{} parent sets for {} nodes",
                parents.len(),
                n
            )));
        }
        for (i, ps) in parents.iter().enumerate() {
            let mut seen = vec![false; n];
            for &p in ps {
                if p >= n {
                    return Err(Error::Data(format!("node {i}: parent index {p} out of range")));
                }
                if p == i {
                    return Err(Error::Data(format!("node {i} lists itself as a parent")));
                }
                if seen[p] {
                    return Err(Error::Data(format!("node {i}: duplicate parent {p}")));
                }
                seen[p] = true;
            }
        }
        let dag = DagStructure { node_names, parents };
        if dag.topological_order().is_none() {
            return Err(Error::Data("graph contains a cycle".into()));
        }
        Ok(dag)
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    /// Directed edges (parent, child), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.push((p, child));
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Undirected edge set, each pair stored as (min, max).
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Kahn topological order; `None` if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.node_count();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, ps) in self.parents.iter().enumerate() {
            indegree[child] = ps.len();
            for &p in ps {
                children[p].push(child);
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    stack.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Conditional probability table: probability of node=1 per parent
/// assignment. Entry index encodes the assignment with `parent_order[0]`
/// as the least-significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub node: usize,
    pub parent_order: Vec<usize>,
    pub table: Vec<f64>,
    /// Parent configurations never seen during fitting (pure MLE only).
    pub unobserved_configs: Vec<usize>,
}

impl Cpt {
    fn validate(&self) -> Result<()> {
        if self.table.len() != 1 << self.parent_order.len() {
            return Err(Error::Shape(format!(
                "cpt for node {} has {} entries, expected {}",
                self.node,
                self.table.len(),
                1usize << self.parent_order.len()
            )));
        }
        for &p in &self.table {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Data(format!("cpt entry {p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// A DAG plus one CPT per node and an optional prediction node.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    pub structure: DagStructure,
    pub cpts: Vec<Cpt>,
    pub prediction_node: Option<usize>,
}

impl BayesianNetwork {
    pub fn new(structure: DagStructure, cpts: Vec<Cpt>) -> Result<Self> {
        if cpts.len() != structure.node_count() {
            return Err(Error::Shape(format!(
                "{} cpts for {} nodes",
                cpts.len(),
                structure.node_count()
            )));
        }
        for (i, cpt) in cpts.iter().enumerate() {
            if cpt.node != i || cpt.parent_order != structure.parents[i] {
                return Err(Error::Shape(format!("cpt {i} does not match structure")));
            }
            cpt.validate()?;
        }
        Ok(BayesianNetwork {
            structure,
            cpts,
            prediction_node: None,
        })
    }

    /// Nodes other than the prediction node, in index order.
    pub fn attribute_nodes(&self) -> Vec<usize> {
        (0..self.structure.node_count())
            .filter(|&i| Some(i) != self.prediction_node)
            .collect()
    }
}

/// Every labeled DAG on `n` nodes, each exactly once. Nodes are named
/// `N0..N{n-1}`; rename afterwards if needed.
pub fn enumerate_dags(n: usize) -> Result<impl Iterator<Item = DagStructure>> {
    if n == 0 {
        return Err(Error::Config("node count must be at least 1".into()));
    }
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::Capacity(format!(
            "exhaustive enumeration supports at most {MAX_EXHAUSTIVE_NODES} nodes, got {n}; \
             reduce the attribute count for exhaustive mode"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let total = 3usize.pow(pairs.len() as u32);
    let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    // Each unordered pair is absent (0), oriented low->high (1) or
    // high->low (2); cyclic candidates are filtered out.
    Ok((0..total).filter_map(move |code| {
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => parents[j].push(i),
                2 => parents[i].push(j),
                _ => {}
            }
            c /= 3;
        }
        DagStructure::new(names.clone(), parents).ok()
    }))
}

fn check_binary(data: &[Vec<u8>], n_cols: usize) -> Result<()> {
    for (r, row) in data.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::Shape(format!(
                "row {r} has {} columns, expected {n_cols}",
                row.len()
            )));
        }
        if row.iter().any(|&v| v > 1) {
            return Err(Error::Data(format!("row {r} contains a non-binary value")));
        }
    }
    Ok(())
}

/// Cooper-Herskovits K2 log score of a DAG given binary data.
pub fn k2_log_score(dag: &DagStructure, data: &[Vec<u8>]) -> Result<f64> {
    let n = dag.node_count();
    check_binary(data, n)?;
    // log-factorial table up to the largest count that can appear
    let max_n = data.len() + 2;
    let mut lnfact = vec![0.0f64; max_n + 1];
    for i in 1..=max_n {
        lnfact[i] = lnfact[i - 1] + (i as f64).ln();
    }
    let mut score = 0.0;
    for node in 0..n {
        let parents = dag.parents(node);
        let n_configs = 1usize << parents.len();
        let mut counts = vec![[0usize; 2]; n_configs];
        for row in data {
            let mut config = 0usize;
            for (k, &p) in parents.iter().enumerate() {
                config |= (row[p] as usize) << k;
            }
            counts[config][row[node] as usize] += 1;
        }
        for c in &counts {
            let nj = c[0] + c[1];
            // r=2 states: ln((r-1)!) = 0
            score += -lnfact[nj + 1] + lnfact[c[0]] + lnfact[c[1]];
        }
    }
    Ok(score)
}

/// Exhaustive K2 structure search. Ties break toward fewer edges, then the
/// lexicographically smallest edge list.
pub fn learn_structure(data: &[Vec<u8>], node_names: &[String]) -> Result<DagStructure> {
    let n = node_names.len();
    check_binary(data, n)?;
    // The score decomposes per (node, parent set); with <= 6 binary nodes
    // there are at most 64 distinct rows and 6 * 32 families, so compress
    // the data to a pattern histogram and precompute every family score
    // instead of re-scanning the rows for each of the 3^C(n,2) candidates.
    let mut pattern_counts = vec![0usize; 1 << n];
    for row in data {
        let mut pattern = 0usize;
        for (i, &v) in row.iter().enumerate() {
            pattern |= (v as usize) << i;
        }
        pattern_counts[pattern] += 1;
    }
    let max_n = data.len() + 2;
    let mut lnfact = vec![0.0f64; max_n + 1];
    for i in 1..=max_n {
        lnfact[i] = lnfact[i - 1] + (i as f64).ln();
    }
    // family_score[node][mask of parents], parents ordered by ascending index
    let mut family_score = vec![vec![0.0f64; 1 << n]; n];
    for node in 0..n {
        for mask in 0..(1usize << n) {
            if mask & (1 << node) != 0 {
                continue;
            }
            let n_configs = 1usize << mask.count_ones();
            let mut counts = vec![[0usize; 2]; n_configs];
            for (pattern, &count) in pattern_counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                // extract the parent bits of the pattern, ascending order
                let mut config = 0usize;
                let mut out = 0;
                for bit in 0..n {
                    if mask & (1 << bit) != 0 {
                        config |= ((pattern >> bit) & 1) << out;
                        out += 1;
                    }
                }
                counts[config][(pattern >> node) & 1] += count;
            }
            let mut s = 0.0;
            for c in &counts {
                let nj = c[0] + c[1];
                s += -lnfact[nj + 1] + lnfact[c[0]] + lnfact[c[1]];
            }
            family_score[node][mask] = s;
        }
    }
    let mut best: Option<(f64, usize, Vec<(usize, usize)>, DagStructure)> = None;
    for dag in enumerate_dags(n)? {
        let score: f64 = (0..n)
            .map(|node| {
                let mask = dag
                    .parents(node)
                    .iter()
                    .fold(0usize, |m, &p| m | (1 << p));
                family_score[node][mask]
            })
            .sum();
        let edges = dag.edges();
        let key = (score, edges.len(), edges);
        let better = match &best {
            None => true,
            Some((bs, blen, bedges, _)) => {
                score > *bs
                    || (score == *bs
                        && (key.1 < *blen || (key.1 == *blen && key.2 < *bedges)))
            }
        };
        if better {
            best = Some((key.0, key.1, key.2, dag));
        }
    }
    let (_, _, _, dag) = best.expect("enumeration yields at least one DAG");
    DagStructure::new(node_names.to_vec(), dag.parents)
}

/// Outcome of a 2x2 chi-square test of independence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Result {
    pub chi2: f64,
    pub p_value: f64,
    /// phi coefficient sqrt(chi2 / n), in [0,1].
    pub phi: f64,
    /// Set when a marginal count is zero and the test is undefined.
    pub degenerate: bool,
}

/// Pearson chi-square (no continuity correction) between two binary columns.
pub fn chi2_independence(data: &[Vec<u8>], u: usize, v: usize) -> Result<Chi2Result> {
    if data.is_empty() {
        return Err(Error::Data("empty data".into()));
    }
    let n_cols = data[0].len();
    if u >= n_cols || v >= n_cols {
        return Err(Error::Shape(format!("column index out of range ({u}, {v})")));
    }
    let mut table = [[0usize; 2]; 2];
    for (r, row) in data.iter().enumerate() {
        if row[u] > 1 || row[v] > 1 {
            return Err(Error::Data(format!("row {r} contains a non-binary value")));
        }
        table[row[u] as usize][row[v] as usize] += 1;
    }
    let n = data.len() as f64;
    let row0 = (table[0][0] + table[0][1]) as f64;
    let row1 = (table[1][0] + table[1][1]) as f64;
    let col0 = (table[0][0] + table[1][0]) as f64;
    let col1 = (table[0][1] + table[1][1]) as f64;
    if row0 == 0.0 || row1 == 0.0 || col0 == 0.0 || col1 == 0.0 {
        return Ok(Chi2Result {
            chi2: 0.0,
            p_value: 1.0,
            phi: 0.0,
            degenerate: true,
        });
    }
    let det = (table[0][0] * table[1][1]) as f64 - (table[0][1] * table[1][0]) as f64;
    let chi2 = n * det * det / (row0 * row1 * col0 * col1);
    let dist = ChiSquared::new(1.0).expect("1 dof");
    let p_value = (1.0 - dist.cdf(chi2)).clamp(0.0, 1.0);
    let phi = (chi2 / n).sqrt().min(1.0);
    Ok(Chi2Result {
        chi2,
        p_value,
        phi,
        degenerate: false,
    })
}

/// Remove every edge whose pairwise chi-square test fails to reject
/// independence at level `alpha`.
pub fn prune_edges(dag: &DagStructure, data: &[Vec<u8>], alpha: f64) -> Result<DagStructure> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let mut parents = dag.parents.clone();
    for (child, ps) in dag.parents.iter().enumerate() {
        for &p in ps {
            let test = chi2_independence(data, p, child)?;
            if test.p_value >= alpha {
                parents[child].retain(|&q| q != p);
            }
        }
    }
    DagStructure::new(dag.node_names.clone(), parents)
}

/// Fit one CPT per node: (count(node=1, cfg) + pseudocount) /
/// (count(cfg) + 2*pseudocount). With pseudocount 0 an unobserved parent
/// configuration falls back to 0.5 and is flagged in `unobserved_configs`.
pub fn fit_cpts(dag: &DagStructure, data: &[Vec<u8>], pseudocount: f64) -> Result<BayesianNetwork> {
    if pseudocount < 0.0 {
        return Err(Error::Config(format!(
            "pseudocount must be non-negative, got {pseudocount}"
        )));
    }
    let n = dag.node_count();
    check_binary(data, n)?;
    let mut cpts = Vec::with_capacity(n);
    for node in 0..n {
        let parents = dag.parents(node).to_vec();
        let n_configs = 1usize << parents.len();
        let mut counts = vec![[0usize; 2]; n_configs];
        for row in data {
            let mut config = 0usize;
            for (k, &p) in parents.iter().enumerate() {
                config |= (row[p] as usize) << k;
            }
            counts[config][row[node] as usize] += 1;
        }
        let mut table = Vec::with_capacity(n_configs);
        let mut unobserved = Vec::new();
        for (j, c) in counts.iter().enumerate() {
            let total = (c[0] + c[1]) as f64;
            if total == 0.0 && pseudocount == 0.0 {
                table.push(0.5);
                unobserved.push(j);
            } else {
                table.push((c[1] as f64 + pseudocount) / (total + 2.0 * pseudocount));
            }
        }
        cpts.push(Cpt {
            node,
            parent_order: parents,
            table,
            unobserved_configs: unobserved,
        });
    }
    BayesianNetwork::new(dag.clone(), cpts)
}

/// Name given to the appended prediction node.
pub const PREDICTION_NODE_NAME: &str = "Yhat";

/// Append a prediction node with every existing node as a parent and a
/// uniform CPT, leaving the original network untouched.
pub fn append_prediction_node(bn: &BayesianNetwork) -> Result<BayesianNetwork> {
    if bn.prediction_node.is_some() {
        return Err(Error::State("prediction node already present".into()));
    }
    let k = bn.structure.node_count();
    if k > 10 {
        return Err(Error::Capacity(format!(
            "prediction node supports at most 10 attribute parents, got {k}"
        )));
    }
    let mut names = bn.structure.node_names.clone();
    if names.iter().any(|n| n == PREDICTION_NODE_NAME) {
        return Err(Error::State(format!(
            "node name '{PREDICTION_NODE_NAME}' is reserved for the prediction node"
        )));
    }
    names.push(PREDICTION_NODE_NAME.to_string());
    let mut parents = bn.structure.parents.clone();
    parents.push((0..k).collect());
    let structure = DagStructure::new(names, parents)?;
    let mut cpts = bn.cpts.clone();
    cpts.push(Cpt {
        node: k,
        parent_order: (0..k).collect(),
        table: vec![0.5; 1 << k],
        unobserved_configs: Vec::new(),
    });
    let mut out = BayesianNetwork::new(structure, cpts)?;
    out.prediction_node = Some(k);
    Ok(out)
}

/// Bayesian calibrator Z = P(A=value | Yhat=1) / P(A=value).
pub fn calibrator_z(bn: &BayesianNetwork, attribute: &str, value: u8) -> Result<f64> {
    let pred = bn
        .prediction_node
        .ok_or_else(|| Error::State("network has no prediction node".into()))?;
    let node = bn
        .structure
        .node_index(attribute)
        .ok_or_else(|| Error::Data(format!("unknown attribute '{attribute}'")))?;
    if node == pred {
        return Err(Error::Data("cannot calibrate the prediction node itself".into()));
    }
    let marginal = variable_elimination(bn, (node, value), &[])?;
    if marginal <= 0.0 {
        return Err(Error::DivisionByZero(format!(
            "P({attribute}={value}) is zero"
        )));
    }
    let conditional = variable_elimination(bn, (node, value), &[(pred, 1)])?;
    Ok(conditional / marginal)
}

/// Blend the prediction node's CPT with fresh (attributes, prediction)
/// observations: new = (prior*old + positives) / (prior + observations).
/// Attribute CPTs are untouched; a new network value is returned.
pub fn online_update(
    bn: &BayesianNetwork,
    buffer: &[(Vec<u8>, u8)],
    prior_strength: f64,
) -> Result<BayesianNetwork> {
    let pred = bn
        .prediction_node
        .ok_or_else(|| Error::State("network has no prediction node".into()))?;
    if buffer.is_empty() {
        return Err(Error::Config("online update requires a non-empty buffer".into()));
    }
    if prior_strength <= 0.0 {
        return Err(Error::Config(format!(
            "prior strength must be positive, got {prior_strength}"
        )));
    }
    let parent_order = bn.cpts[pred].parent_order.clone();
    let k = parent_order.len();
    let mut totals = vec![0usize; 1 << k];
    let mut positives = vec![0usize; 1 << k];
    for (a, yhat) in buffer {
        if a.len() != k {
            return Err(Error::Shape(format!(
                "buffer attribute width {} does not match {k} prediction-node parents",
                a.len()
            )));
        }
        let mut config = 0usize;
        for (bit, &p) in parent_order.iter().enumerate() {
            // buffer vectors are indexed by attribute node, parents of the
            // prediction node are exactly the attribute nodes 0..k
            config |= (a[p] as usize) << bit;
        }
        totals[config] += 1;
        if *yhat == 1 {
            positives[config] += 1;
        }
    }
    let mut out = bn.clone();
    let cpt = &mut out.cpts[pred];
    for j in 0..cpt.table.len() {
        if totals[j] > 0 {
            cpt.table[j] = (prior_strength * cpt.table[j] + positives[j] as f64)
                / (prior_strength + totals[j] as f64);
        }
    }
    Ok(out)
}

/// Serialize to the line-oriented text format. Floats use shortest
/// round-trip formatting, so reading the output back is lossless.
pub fn to_text(bn: &BayesianNetwork) -> String {
    let mut out = String::new();
    writeln!(out, "nodes: {}", bn.structure.node_names.join(" ")).unwrap();
    for (i, name) in bn.structure.node_names.iter().enumerate() {
        let parents: Vec<&str> = bn.cpts[i]
            .parent_order
            .iter()
            .map(|&p| bn.structure.node_names[p].as_str())
            .collect();
        writeln!(out, "parents {name}: {}", parents.join(" "))
            .unwrap();
    }
    for (i, name) in bn.structure.node_names.iter().enumerate() {
        let values: Vec<String> = bn.cpts[i].table.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "cpt {name}: {}", values.join(" ")).unwrap();
    }
    if let Some(p) = bn.prediction_node {
        writeln!(out, "prediction: {}", bn.structure.node_names[p]).unwrap();
    }
    out
}

/// Parse the text format produced by [`to_text`].
pub fn from_text(text: &str) -> Result<BayesianNetwork> {
    let mut names: Vec<String> = Vec::new();
    let mut parent_names: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut tables: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut prediction: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(':').ok_or(Error::Parse {
            line: lineno,
            message: "expected '<keyword>: ...'".into(),
        })?;
        let rest = rest.trim();
        let mut head_parts = head.split_whitespace();
        match head_parts.next() {
            Some("nodes") => {
                names = rest.split_whitespace().map(str::to_string).collect();
                if names.is_empty() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "empty node list".into(),
                    });
                }
            }
            Some("parents") => {
                let node = head_parts.next().ok_or(Error::Parse {
                    line: lineno,
                    message: "missing node name after 'parents'".into(),
                })?;
                parent_names.insert(
                    node.to_string(),
                    rest.split_whitespace().map(str::to_string).collect(),
                );
            }
            Some("cpt") => {
                let node = head_parts.next().ok_or(Error::Parse {
                    line: lineno,
                    message: "missing node name after 'cpt'".into(),
                })?;
                let values = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: lineno,
                            message: format!("bad probability '{t}'"),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                tables.insert(node.to_string(), values);
            }
            Some("prediction") => {
                prediction = Some(rest.to_string());
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown keyword {other:?}"),
                });
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing 'nodes:' header".into(),
        });
    }
    let index_of = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Data(format!("unknown node '{name}'")))
    };
    let mut parents = Vec::with_capacity(names.len());
    for name in &names {
        let ps = parent_names
            .get(name)
            .ok_or_else(|| Error::Data(format!("missing 'parents {name}:' line")))?;
        parents.push(ps.iter().map(|p| index_of(p)).collect::<Result<Vec<_>>>()?);
    }
    let structure = DagStructure::new(names.clone(), parents.clone())?;
    let mut cpts = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let table = tables
            .get(name)
            .ok_or_else(|| Error::Data(format!("missing 'cpt {name}:' line")))?
            .clone();
        let cpt = Cpt {
            node: i,
            parent_order: parents[i].clone(),
            table,
            unobserved_configs: Vec::new(),
        };
        cpt.validate()?;
        cpts.push(cpt);
    }
    let mut bn = BayesianNetwork::new(structure, cpts)?;
    if let Some(pname) = prediction {
        bn.prediction_node = Some(index_of(&pname)?);
    }
    Ok(bn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dag(names: &[&str], parents: Vec<Vec<usize>>) -> DagStructure {
        DagStructure::new(names.iter().map(|s| s.to_string()).collect(), parents).unwrap()
    }

    /// Brute-force joint probability of a full assignment.
    fn joint_prob(bn: &BayesianNetwork, assignment: &[u8]) -> f64 {
        let mut p = 1.0;
        for (node, cpt) in bn.cpts.iter().enumerate() {
            let mut config = 0usize;
            for (k, &parent) in cpt.parent_order.iter().enumerate() {
                config |= (assignment[parent] as usize) << k;
            }
            let p1 = cpt.table[config];
            p *= if assignment[node] == 1 { p1 } else { 1.0 - p1 };
        }
        p
    }

    fn brute_force_conditional(
        bn: &BayesianNetwork,
        query: (usize, u8),
        evidence: &[(usize, u8)],
    ) -> Option<f64> {
        let n = bn.structure.node_count();
        let mut num = 0.0;
        let mut den = 0.0;
        for code in 0..(1usize << n) {
            let assignment: Vec<u8> = (0..n).map(|i| ((code >> i) & 1) as u8).collect();
            if evidence.iter().any(|&(v, val)| assignment[v] != val) {
                continue;
            }
            let p = joint_prob(bn, &assignment);
            den += p;
            if assignment[query.0] == query.1 {
                num += p;
            }
        }
        (den > 0.0).then(|| num / den)
    }

    fn chain_abc() -> BayesianNetwork {
        // A -> B -> C
        let structure = dag(&["A", "B", "C"], vec![vec![], vec![0], vec![1]]);
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![0.5], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.1, 0.9], unobserved_configs: vec![] },
            Cpt { node: 2, parent_order: vec![1], table: vec![0.1, 0.9], unobserved_configs: vec![] },
        ];
        BayesianNetwork::new(structure, cpts).unwrap()
    }

    fn sample_rows(bn: &BayesianNetwork, n: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = bn.structure.topological_order().unwrap();
        (0..n)
            .map(|_| {
                let mut row = vec![0u8; bn.structure.node_count()];
                for &node in &order {
                    let cpt = &bn.cpts[node];
                    let mut config = 0usize;
                    for (k, &p) in cpt.parent_order.iter().enumerate() {
                        config |= (row[p] as usize) << k;
                    }
                    row[node] = u8::from(rng.gen::<f64>() < cpt.table[config]);
                }
                row
            })
            .collect()
    }

    #[test]
    fn cycle_rejected() {
        let names: Vec<String> = vec!["A".into(), "B".into()];
        assert!(DagStructure::new(names, vec![vec![1], vec![0]]).is_err());
    }

    #[test]
    fn enumerate_dag_counts() {
        assert_eq!(enumerate_dags(1).unwrap().count(), 1);
        assert_eq!(enumerate_dags(2).unwrap().count(), 3);
        assert_eq!(enumerate_dags(3).unwrap().count(), 25);
        assert_eq!(enumerate_dags(4).unwrap().count(), 543);
        assert!(enumerate_dags(7).is_err());
        assert!(enumerate_dags(0).is_err());
    }

    #[test]
    fn k2_single_node_examples() {
        let d = dag(&["A"], vec![vec![]]);
        let data: Vec<Vec<u8>> = vec![vec![1], vec![1], vec![1], vec![0]];
        let score = k2_log_score(&d, &data).unwrap();
        assert!((score - (6.0f64 / 120.0).ln()).abs() < 1e-12);

        // all-zero column of length n scores -ln(n+1)
        for n in 1..=10usize {
            let data: Vec<Vec<u8>> = vec![vec![0]; n];
            let score = k2_log_score(&d, &data).unwrap();
            assert!((score + ((n + 1) as f64).ln()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn k2_rejects_non_binary() {
        let d = dag(&["A"], vec![vec![]]);
        assert!(k2_log_score(&d, &[vec![2]]).is_err());
    }

    #[test]
    fn k2_prefers_empty_graph_for_independent_coins() {
        let empty = dag(&["A", "B"], vec![vec![], vec![]]);
        let a_to_b = dag(&["A", "B"], vec![vec![], vec![0]]);
        let b_to_a = dag(&["A", "B"], vec![vec![1], vec![]]);
        let mut wins = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<u8>> = (0..5000)
                .map(|_| vec![u8::from(rng.gen::<bool>()), u8::from(rng.gen::<bool>())])
                .collect();
            let se = k2_log_score(&empty, &data).unwrap();
            let s1 = k2_log_score(&a_to_b, &data).unwrap();
            let s2 = k2_log_score(&b_to_a, &data).unwrap();
            if se >= s1 && se >= s2 {
                wins += 1;
            }
        }
        assert!(wins >= 9, "empty graph won only {wins}/10 seeds");
    }

    #[test]
    fn learn_structure_recovers_chain_skeleton() {
        let truth = chain_abc();
        let names: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let mut hits = 0;
        for seed in 0..10u64 {
            let data = sample_rows(&truth, 5000, seed);
            let learned = learn_structure(&data, &names).unwrap();
            if learned.skeleton() == vec![(0, 1), (1, 2)] {
                hits += 1;
            }
        }
        assert!(hits >= 9, "skeleton recovered in only {hits}/10 seeds");
    }

    #[test]
    fn learn_structure_single_node() {
        let names: Vec<String> = vec!["A".into()];
        let learned = learn_structure(&[vec![0], vec![1]], &names).unwrap();
        assert!(learned.edges().is_empty());
    }

    #[test]
    fn argmax_stable_under_data_duplication() {
        let truth = chain_abc();
        let names: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        // needs decisive data: near a score boundary, doubling the counts
        // can legitimately push a borderline edge past the penalty
        let data = sample_rows(&truth, 5000, 3);
        let learned = learn_structure(&data, &names).unwrap();
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());
        let learned2 = learn_structure(&doubled, &names).unwrap();
        assert_eq!(learned.edges(), learned2.edges());
    }

    #[test]
    fn chi2_perfect_association() {
        let mut data = Vec::new();
        data.extend(std::iter::repeat_n(vec![0u8, 0u8], 50));
        data.extend(std::iter::repeat_n(vec![1u8, 1u8], 50));
        let r = chi2_independence(&data, 0, 1).unwrap();
        assert!((r.chi2 - 100.0).abs() < 1e-9);
        assert!((r.phi - 1.0).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
        assert!(!r.degenerate);
    }

    #[test]
    fn chi2_exact_independence() {
        let mut data = Vec::new();
        for (u, v) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
            data.extend(std::iter::repeat_n(vec![u, v], 25));
        }
        let r = chi2_independence(&data, 0, 1).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.phi, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_degenerate_marginal() {
        let data = vec![vec![1u8, 0u8], vec![1, 1]];
        let r = chi2_independence(&data, 0, 1).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.chi2, r.p_value, r.phi), (0.0, 1.0, 0.0));
    }

    #[test]
    fn prune_removes_spurious_edges_keeps_real_ones() {
        // independent coins with a forced edge
        let mut removed = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let data: Vec<Vec<u8>> = (0..5000)
                .map(|_| vec![u8::from(rng.gen::<bool>()), u8::from(rng.gen::<bool>())])
                .collect();
            let d = dag(&["A", "B"], vec![vec![], vec![0]]);
            let pruned = prune_edges(&d, &data, 0.05).unwrap();
            if pruned.edges().is_empty() {
                removed += 1;
            }
        }
        assert!(removed >= 9, "spurious edge removed in only {removed}/10 seeds");

        // perfectly associated edge stays
        let mut data = Vec::new();
        data.extend(std::iter::repeat_n(vec![0u8, 0u8], 50));
        data.extend(std::iter::repeat_n(vec![1u8, 1u8], 50));
        let d = dag(&["A", "B"], vec![vec![], vec![0]]);
        let pruned = prune_edges(&d, &data, 0.05).unwrap();
        assert_eq!(pruned.edges(), vec![(0, 1)]);

        // empty graph stays empty
        let d = dag(&["A", "B"], vec![vec![], vec![]]);
        assert!(prune_edges(&d, &data, 0.05).unwrap().edges().is_empty());
    }

    #[test]
    fn fit_cpts_examples() {
        let d = dag(&["A"], vec![vec![]]);
        let data: Vec<Vec<u8>> = vec![vec![1], vec![1], vec![1], vec![0]];
        let mle = fit_cpts(&d, &data, 0.0).unwrap();
        assert!((mle.cpts[0].table[0] - 0.75).abs() < 1e-12);
        let smoothed = fit_cpts(&d, &data, 1.0).unwrap();
        assert!((smoothed.cpts[0].table[0] - 4.0 / 6.0).abs() < 1e-12);

        // child with an unobserved parent configuration
        let d2 = dag(&["A", "B"], vec![vec![], vec![0]]);
        let data2: Vec<Vec<u8>> = vec![vec![0, 0], vec![0, 1]];
        let m = fit_cpts(&d2, &data2, 0.0).unwrap();
        assert_eq!(m.cpts[1].table[1], 0.5);
        assert_eq!(m.cpts[1].unobserved_configs, vec![1]);
        let s = fit_cpts(&d2, &data2, 1.0).unwrap();
        assert_eq!(s.cpts[1].table[1], 0.5);
        assert!(s.cpts[1].unobserved_configs.is_empty());
    }

    #[test]
    fn joint_normalizes_to_one() {
        let bn = chain_abc();
        let total: f64 = (0..8)
            .map(|code| {
                let a: Vec<u8> = (0..3).map(|i| ((code >> i) & 1) as u8).collect();
                joint_prob(&bn, &a)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ve_matches_hand_computed_chain() {
        let structure = dag(&["A", "B"], vec![vec![], vec![0]]);
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![0.3], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.2, 0.9], unobserved_configs: vec![] },
        ];
        let bn = BayesianNetwork::new(structure, cpts).unwrap();
        let p = variable_elimination(&bn, (1, 1), &[]).unwrap();
        assert!((p - 0.41).abs() < 1e-12);
        // root marginal is its prior
        let p = variable_elimination(&bn, (0, 1), &[]).unwrap();
        assert!((p - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ve_matches_brute_force_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5usize);
            let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
            // random DAG respecting index order
            let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
            for child in 1..n {
                for p in 0..child {
                    if rng.gen::<f64>() < 0.4 {
                        parents[child].push(p);
                    }
                }
            }
            let structure = DagStructure::new(names, parents.clone()).unwrap();
            let cpts: Vec<Cpt> = (0..n)
                .map(|node| Cpt {
                    node,
                    parent_order: parents[node].clone(),
                    table: (0..(1 << parents[node].len()))
                        .map(|_| rng.gen_range(0.05..0.95))
                        .collect(),
                    unobserved_configs: vec![],
                })
                .collect();
            let bn = BayesianNetwork::new(structure, cpts).unwrap();
            let qnode = rng.gen_range(0..n);
            let qvalue = u8::from(rng.gen::<bool>());
            let mut evidence: Vec<(usize, u8)> = Vec::new();
            for v in 0..n {
                if v != qnode && rng.gen::<f64>() < 0.3 {
                    evidence.push((v, u8::from(rng.gen::<bool>())));
                }
            }
            let expected = brute_force_conditional(&bn, (qnode, qvalue), &evidence).unwrap();
            let got = variable_elimination(&bn, (qnode, qvalue), &evidence).unwrap();
            assert!(
                (expected - got).abs() < 1e-9,
                "n={n} evidence={evidence:?} expected {expected} got {got}"
            );
        }
    }

    #[test]
    fn ve_rejects_bad_queries() {
        let bn = chain_abc();
        assert!(variable_elimination(&bn, (0, 1), &[(0, 1)]).is_err());
        assert!(variable_elimination(&bn, (1, 1), &[(0, 1), (0, 0)]).is_err());
    }

    #[test]
    fn ve_zero_probability_evidence() {
        let structure = dag(&["A", "B"], vec![vec![], vec![0]]);
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![1.0], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.2, 0.9], unobserved_configs: vec![] },
        ];
        let bn = BayesianNetwork::new(structure, cpts).unwrap();
        assert!(matches!(
            variable_elimination(&bn, (1, 1), &[(0, 0)]),
            Err(Error::UndefinedConditional(_))
        ));
    }

    #[test]
    fn prediction_node_append_and_uniform_calibrator() {
        let bn = append_prediction_node(&chain_abc()).unwrap();
        let pred = bn.prediction_node.unwrap();
        assert_eq!(bn.cpts[pred].table, vec![0.5; 8]);
        assert!((variable_elimination(&bn, (pred, 1), &[]).unwrap() - 0.5).abs() < 1e-12);
        for attr in ["A", "B", "C"] {
            for value in [0u8, 1] {
                let z = calibrator_z(&bn, attr, value).unwrap();
                assert!((z - 1.0).abs() < 1e-9, "Z({attr}={value})={z}");
            }
        }
        assert!(append_prediction_node(&bn).is_err());
    }

    #[test]
    fn calibrator_hand_fixture() {
        // single attribute A with P(A=1)=0.5, P(Yhat=1|A=1)=0.8, P(Yhat=1|A=0)=0.4
        let structure = dag(&["A", "Yhat"], vec![vec![], vec![0]]);
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![0.5], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.4, 0.8], unobserved_configs: vec![] },
        ];
        let mut bn = BayesianNetwork::new(structure, cpts).unwrap();
        bn.prediction_node = Some(1);
        assert!((calibrator_z(&bn, "A", 1).unwrap() - 4.0 / 3.0).abs() < 1e-9);
        assert!((calibrator_z(&bn, "A", 0).unwrap() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn online_update_examples() {
        let bn = append_prediction_node(&chain_abc()).unwrap();
        // 80 observations of config (1,1,1), all positive
        let buffer: Vec<(Vec<u8>, u8)> = vec![(vec![1, 1, 1], 1); 80];
        let updated = online_update(&bn, &buffer, 80.0).unwrap();
        let pred = updated.prediction_node.unwrap();
        assert!((updated.cpts[pred].table[7] - 0.75).abs() < 1e-12);
        // untouched configs unchanged; attribute cpts bit-identical
        assert_eq!(updated.cpts[pred].table[0], 0.5);
        for i in 0..3 {
            assert_eq!(updated.cpts[i], bn.cpts[i]);
        }
        // prior_strength -> 0 limit approaches pure MLE
        let mut buffer = vec![(vec![0u8, 0, 0], 1u8); 7];
        buffer.extend(vec![(vec![0u8, 0, 0], 0u8); 3]);
        let updated = online_update(&bn, &buffer, 1e-9).unwrap();
        assert!((updated.cpts[pred].table[0] - 0.7).abs() < 1e-6);
        // width mismatch
        assert!(online_update(&bn, &[(vec![0, 1], 1)], 80.0).is_err());
    }

    #[test]
    fn online_update_entries_stay_in_unit_interval() {
        let mut bn = append_prediction_node(&chain_abc()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let buffer: Vec<(Vec<u8>, u8)> = (0..50)
                .map(|_| {
                    (
                        (0..3).map(|_| u8::from(rng.gen::<bool>())).collect(),
                        u8::from(rng.gen::<bool>()),
                    )
                })
                .collect();
            bn = online_update(&bn, &buffer, 80.0).unwrap();
            let pred = bn.prediction_node.unwrap();
            assert!(bn.cpts[pred].table.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn text_round_trip() {
        let bn = append_prediction_node(&chain_abc()).unwrap();
        let text = to_text(&bn);
        let back = from_text(&text).unwrap();
        assert_eq!(bn, back);
        assert_eq!(to_text(&back), text);
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = from_text("nodes: A\nparents A:\ncpt A: zero\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
