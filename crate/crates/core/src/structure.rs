//! Flow structure of a compartment network.
//!
//! Material moves along the directed graph whose edge j → i exists when a
//! carrying pipe leads into i from j. The long-run behaviour is organised
//! by the minimal closed vertex sets of this digraph — equivalently the
//! sink components of its condensation: mass that enters one never leaves
//! through pipes again. Everything outside them is transient.

use crate::error::{Error, Result};
use crate::model::CompartmentalModel;
use serde::{Deserialize, Serialize};

/// Whether an isolated compartment (no pipe touches it) counts as a
/// minimal closed set. It vacuously is one; `Exclude` drops such
/// singletons for presentations that only care about actual circulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingletonPolicy {
    Include,
    Exclude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    /// Minimal closed sets, each sorted, ordered by smallest member.
    pub irreducible: Vec<Vec<usize>>,
    /// Transient compartments: everything not in an irreducible set.
    pub j0: Vec<usize>,
    /// Per irreducible set: does any member receive environment inflow?
    pub set_inflow: Vec<bool>,
    /// Per irreducible set: does any member drain to the environment?
    pub set_outflow: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct PipeGraph {
    m: usize,
    /// succ[j] = compartments fed directly by j, sorted.
    succ: Vec<Vec<usize>>,
    outflow: Vec<bool>,
    inflow: Vec<bool>,
}

impl PipeGraph {
    /// Build from explicit material-flow edges (src, dest).
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut succ = vec![Vec::new(); m];
        for &(src, dest) in edges {
            if src >= m || dest >= m {
                return Err(Error::BadArgument(format!(
                    "edge ({src}, {dest}) out of range 0..{m}"
                )));
            }
            succ[src].push(dest);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        Ok(PipeGraph { m, succ, outflow: vec![false; m], inflow: vec![false; m] })
    }

    pub fn from_model(model: &CompartmentalModel) -> Self {
        let m = model.m();
        let mut succ = vec![Vec::new(); m];
        for dest in 0..m {
            for src in 0..m {
                if model.pipe(dest, src).is_some() {
                    succ[src].push(dest);
                }
            }
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        PipeGraph {
            m,
            succ,
            outflow: (0..m).map(|i| model.has_outflow(i)).collect(),
            inflow: (0..m).map(|i| model.has_inflow(i)).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn successors(&self, j: usize) -> &[usize] {
        &self.succ[j]
    }

    pub fn has_outflow(&self, i: usize) -> bool {
        self.outflow[i]
    }

    pub fn has_inflow(&self, i: usize) -> bool {
        self.inflow[i]
    }

    /// One-hop successor set ζ(J): every compartment fed directly from J.
    pub fn zeta(&self, set: &[usize]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for &j in set {
            if j >= self.m {
                return Err(Error::BadArgument(format!(
                    "compartment index {j} out of range 0..{}",
                    self.m
                )));
            }
            out.extend_from_slice(&self.succ[j]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Everything reachable from `set` along pipes, including `set`.
    pub fn reach(&self, set: &[usize]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.m];
        let mut stack = Vec::new();
        for &j in set {
            if j >= self.m {
                return Err(Error::BadArgument(format!(
                    "compartment index {j} out of range 0..{}",
                    self.m
                )));
            }
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
        while let Some(j) = stack.pop() {
            for &k in &self.succ[j] {
                if !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        Ok((0..self.m).filter(|&i| seen[i]).collect())
    }

    /// Shortest pipe path from `from` to `to` with every hop inside
    /// `set`, both endpoints included. Distinct endpoints that both lie in
    /// `set` are a precondition: inside a multi-node minimal closed set
    /// such a path always exists, so NoPath signals a contract violation.
    pub fn path_witness(&self, set: &[usize], from: usize, to: usize) -> Result<Vec<usize>> {
        if from >= self.m || to >= self.m {
            return Err(Error::BadArgument(format!(
                "path endpoints ({from}, {to}) out of range 0..{}",
                self.m
            )));
        }
        if from == to {
            return Err(Error::BadArgument(format!(
                "path witness needs distinct endpoints, got {from} twice"
            )));
        }
        let mut member = vec![false; self.m];
        for &v in set {
            if v >= self.m {
                return Err(Error::BadArgument(format!(
                    "compartment index {v} out of range 0..{}",
                    self.m
                )));
            }
            member[v] = true;
        }
        if !member[from] || !member[to] {
            return Err(Error::BadArgument(format!(
                "path endpoints ({from}, {to}) must both belong to the given set"
            )));
        }
        let mut parent = vec![usize::MAX; self.m];
        let mut queue = std::collections::VecDeque::new();
        parent[from] = from;
        queue.push_back(from);
        while let Some(j) = queue.pop_front() {
            for &k in &self.succ[j] {
                if member[k] && parent[k] == usize::MAX {
                    parent[k] = j;
                    if k == to {
                        let mut path = vec![to];
                        let mut cur = to;
                        while cur != from {
                            cur = parent[cur];
                            path.push(cur);
                        }
                        path.reverse();
                        return Ok(path);
                    }
                    queue.push_back(k);
                }
            }
        }
        Err(Error::NoPath { from, to })
    }

    /// Strongly connected components, returned as sorted vertex sets in
    /// reverse topological order of the condensation (sinks first).
    fn sccs(&self) -> Vec<Vec<usize>> {
        // Iterative Tarjan.
        const UNSEEN: usize = usize::MAX;
        let m = self.m;
        let mut index = vec![UNSEEN; m];
        let mut low = vec![0usize; m];
        let mut on_stack = vec![false; m];
        let mut stack: Vec<usize> = Vec::new();
        let mut next_index = 0usize;
        let mut comps: Vec<Vec<usize>> = Vec::new();
        // (vertex, next successor position)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..m {
            if index[root] != UNSEEN {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.succ[v].len() {
                    let w = self.succ[v][*pos];
                    *pos += 1;
                    if index[w] == UNSEEN {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps
    }

    /// Split the compartments into the minimal closed sets (sink
    /// components of the condensation) and the transient remainder.
    pub fn decompose(&self, policy: SingletonPolicy) -> Decomposition {
        let comps = self.sccs();
        let mut comp_of = vec![0usize; self.m];
        for (ci, comp) in comps.iter().enumerate() {
            for &v in comp {
                comp_of[v] = ci;
            }
        }
        let mut is_sink = vec![true; comps.len()];
        for v in 0..self.m {
            for &w in &self.succ[v] {
                if comp_of[v] != comp_of[w] {
                    is_sink[comp_of[v]] = false;
                }
            }
        }
        let mut irreducible: Vec<Vec<usize>> = comps
            .into_iter()
            .enumerate()
            .filter(|(ci, comp)| {
                if !is_sink[*ci] {
                    return false;
                }
                if comp.len() == 1 {
                    let v = comp[0];
                    let has_edge =
                        !self.succ[v].is_empty() || (0..self.m).any(|u| self.succ[u].contains(&v));
                    if !has_edge && policy == SingletonPolicy::Exclude {
                        return false;
                    }
                }
                true
            })
            .map(|(_, comp)| comp)
            .collect();
        irreducible.sort_by_key(|c| c[0]);
        let mut in_irr = vec![false; self.m];
        for comp in &irreducible {
            for &v in comp {
                in_irr[v] = true;
            }
        }
        let j0 = (0..self.m).filter(|&v| !in_irr[v]).collect();
        let set_inflow = irreducible
            .iter()
            .map(|c| c.iter().any(|&v| self.inflow[v]))
            .collect();
        let set_outflow = irreducible
            .iter()
            .map(|c| c.iter().any(|&v| self.outflow[v]))
            .collect();
        Decomposition { irreducible, j0, set_inflow, set_outflow }
    }

    /// True when some member of `set` has an environment outflow.
    pub fn drains(&self, set: &[usize]) -> bool {
        set.iter().any(|&i| i < self.m && self.outflow[i])
    }

    /// Graphviz rendering of the pipe digraph; irreducible sets are
    /// clustered, environment links drawn to point nodes.
    pub fn to_dot(&self, decomposition: &Decomposition) -> String {
        use std::fmt::Write;
        let mut s = String::from("digraph compartments {\n  rankdir=LR;\n");
        for (li, comp) in decomposition.irreducible.iter().enumerate() {
            let _ = writeln!(s, "  subgraph cluster_{li} {{");
            let _ = writeln!(s, "    label=\"irreducible {}\";", li + 1);
            for &v in comp {
                let _ = writeln!(s, "    c{} [label=\"{}\"];", v + 1, v + 1);
            }
            let _ = writeln!(s, "  }}");
        }
        for &v in &decomposition.j0 {
            let _ = writeln!(s, "  c{} [label=\"{}\" shape=box];", v + 1, v + 1);
        }
        for v in 0..self.m {
            for &w in &self.succ[v] {
                let _ = writeln!(s, "  c{} -> c{};", v + 1, w + 1);
            }
        }
        for v in 0..self.m {
            if self.outflow[v] {
                let _ = writeln!(s, "  env_out_{0} [shape=point]; c{0} -> env_out_{0};", v + 1);
            }
            if self.inflow[v] {
                let _ = writeln!(s, "  env_in_{0} [shape=point]; env_in_{0} -> c{0};", v + 1);
            }
        }
        s.push_str("}\n");
        s
    }
}

impl Decomposition {
    /// 1-based rendering for interchange output.
    pub fn one_based(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        (
            self.irreducible
                .iter()
                .map(|c| c.iter().map(|v| v + 1).collect())
                .collect(),
            self.j0.iter().map(|v| v + 1).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_sinks_at_the_end() {
        // 0 → 1 → 2
        let g = PipeGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let d = g.decompose(SingletonPolicy::Include);
        assert_eq!(d.irreducible, vec![vec![2]]);
        assert_eq!(d.j0, vec![0, 1]);
    }

    #[test]
    fn ring_is_one_irreducible_set() {
        let g = PipeGraph::new(2, &[(0, 1), (1, 0)]).unwrap();
        let d = g.decompose(SingletonPolicy::Include);
        assert_eq!(d.irreducible, vec![vec![0, 1]]);
        assert!(d.j0.is_empty());
    }

    #[test]
    fn isolated_vertex_follows_policy() {
        let g = PipeGraph::new(3, &[(0, 1), (1, 0)]).unwrap();
        let with = g.decompose(SingletonPolicy::Include);
        assert_eq!(with.irreducible, vec![vec![0, 1], vec![2]]);
        let without = g.decompose(SingletonPolicy::Exclude);
        assert_eq!(without.irreducible, vec![vec![0, 1]]);
        assert_eq!(without.j0, vec![2]);
    }

    #[test]
    fn two_rings_and_a_feeder() {
        // feeder 4 → both rings {0,1} and {2,3}
        let g = PipeGraph::new(
            5,
            &[(0, 1), (1, 0), (2, 3), (3, 2), (4, 0), (4, 2)],
        )
        .unwrap();
        let d = g.decompose(SingletonPolicy::Include);
        assert_eq!(d.irreducible, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(d.j0, vec![4]);
    }

    #[test]
    fn zeta_collects_direct_successors() {
        let g = PipeGraph::new(4, &[(0, 1), (0, 2), (2, 3)]).unwrap();
        assert_eq!(g.zeta(&[0]).unwrap(), vec![1, 2]);
        assert_eq!(g.zeta(&[0, 2]).unwrap(), vec![1, 2, 3]);
        assert!(g.zeta(&[9]).is_err());
    }

    #[test]
    fn path_witness_finds_shortest() {
        let g = PipeGraph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let all = [0usize, 1, 2, 3];
        assert_eq!(g.path_witness(&all, 0, 3).unwrap(), vec![0, 2, 3]);
        assert!(matches!(g.path_witness(&all, 1, 1), Err(Error::BadArgument(_))));
        assert!(matches!(
            g.path_witness(&all, 3, 0),
            Err(Error::NoPath { from: 3, to: 0 })
        ));
        // Restricting the set can remove the shortcut.
        assert_eq!(g.path_witness(&[0, 1, 2], 0, 2).unwrap(), vec![0, 2]);
        assert!(g.path_witness(&[0, 3], 0, 3).is_err());
    }

    #[test]
    fn self_loop_singleton_is_irreducible_under_both_policies() {
        let g = PipeGraph::new(2, &[(0, 0), (0, 1), (1, 1)]).unwrap();
        let d = g.decompose(SingletonPolicy::Exclude);
        // 1 has a self-loop and no exits: a genuine closed singleton.
        assert_eq!(d.irreducible, vec![vec![1]]);
        assert_eq!(d.j0, vec![0]);
    }
}
