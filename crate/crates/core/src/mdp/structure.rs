//! Communication structure from positive-probability support graphs.

use super::{FiniteMdp, MarkovChain, Mrp};
use crate::linalg::Matrix;

/// Anything with a directed support graph over states.
pub trait SupportGraph {
    fn n_nodes(&self) -> usize;
    fn successors(&self, s: usize) -> Vec<usize>;
}

impl SupportGraph for Matrix {
    fn n_nodes(&self) -> usize {
        self.rows()
    }
    fn successors(&self, s: usize) -> Vec<usize> {
        positive_entries(self.row(s))
    }
}

impl SupportGraph for MarkovChain {
    fn n_nodes(&self) -> usize {
        self.n_states()
    }
    fn successors(&self, s: usize) -> Vec<usize> {
        positive_entries(self.row(s))
    }
}

impl SupportGraph for Mrp {
    fn n_nodes(&self) -> usize {
        self.n_states()
    }
    fn successors(&self, s: usize) -> Vec<usize> {
        self.chain().successors(s)
    }
}

/// Edge `s → s'` whenever some action reaches `s'` from `s`.
impl SupportGraph for FiniteMdp {
    fn n_nodes(&self) -> usize {
        self.n_states()
    }
    fn successors(&self, s: usize) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&t| self.has_edge(s, t))
            .collect()
    }
}

fn positive_entries(row: &[f64]) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Tarjan's algorithm, iterative. Each component is sorted and components
/// are ordered by their smallest member.
pub fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, next successor position)
        let mut work = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
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
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Closed irreducible classes plus the remaining transient states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubchainDecomposition {
    pub classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

impl SubchainDecomposition {
    pub fn class_of(&self, s: usize) -> Option<usize> {
        self.classes
            .iter()
            .position(|c| c.binary_search(&s).is_ok())
    }

    pub fn is_transient(&self, s: usize) -> bool {
        self.transient.binary_search(&s).is_ok()
    }
}

/// Bottom strongly connected components of the support graph.
///
/// For an MDP the graph takes the union over actions, so the classes
/// describe its communication structure.
pub fn subchain_decomposition<G: SupportGraph + ?Sized>(graph: &G) -> SubchainDecomposition {
    let n = graph.n_nodes();
    let succ: Vec<Vec<usize>> = (0..n).map(|s| graph.successors(s)).collect();
    let comps = strongly_connected_components(&succ);
    let mut comp_of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = i;
        }
    }
    let mut classes = Vec::new();
    let mut transient = Vec::new();
    for (i, c) in comps.into_iter().enumerate() {
        let closed = c.iter().all(|&s| succ[s].iter().all(|&t| comp_of[t] == i));
        if closed {
            classes.push(c);
        } else {
            transient.extend(c);
        }
    }
    transient.sort_unstable();
    SubchainDecomposition { classes, transient }
}

/// States from which `targets` is reachable in the support graph.
pub fn can_reach<G: SupportGraph + ?Sized>(graph: &G, targets: &[usize]) -> Vec<bool> {
    let n = graph.n_nodes();
    let mut pred = vec![Vec::new(); n];
    for s in 0..n {
        for t in graph.successors(s) {
            pred[t].push(s);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: Vec<usize> = targets.to_vec();
    for &t in targets {
        seen[t] = true;
    }
    while let Some(t) = queue.pop() {
        for &s in &pred[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push(s);
            }
        }
    }
    seen
}

/// A maximal end component: a set of states together with, for each, the
/// actions that keep the process inside the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    pub actions: Vec<Vec<usize>>,
}

impl EndComponent {
    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    pub fn position(&self, s: usize) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }
}

/// Maximal end components of `mdp`, found by repeatedly pruning actions that
/// can leave their strongly connected component.
pub fn end_components(mdp: &FiniteMdp) -> Vec<EndComponent> {
    let (n, n_a) = (mdp.n_states(), mdp.n_actions());
    end_components_within(mdp, (0..n).map(|_| (0..n_a).collect()).collect())
}

/// Maximal end components using only the listed actions at each state.
pub fn end_components_within(mdp: &FiniteMdp, mut allowed: Vec<Vec<usize>>) -> Vec<EndComponent> {
    let n = mdp.n_states();
    let mut alive: Vec<bool> = allowed.iter().map(|a| !a.is_empty()).collect();
    loop {
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !alive[s] {
                    return Vec::new();
                }
                let mut out: Vec<usize> = allowed[s]
                    .iter()
                    .flat_map(|&a| positive_entries(mdp.p(s, a)))
                    .filter(|&t| alive[t])
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        let comps = strongly_connected_components(&succ);
        let mut comp_of = vec![usize::MAX; n];
        for (i, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let before = allowed[s].len();
            allowed[s].retain(|&a| {
                mdp.p(s, a)
                    .iter()
                    .enumerate()
                    .all(|(t, &p)| p == 0.0 || (alive[t] && comp_of[t] == comp_of[s]))
            });
            if allowed[s].len() != before {
                changed = true;
            }
            if allowed[s].is_empty() {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            return comps
                .into_iter()
                .filter(|c| alive[c[0]])
                .map(|states| {
                    let actions = states.iter().map(|&s| allowed[s].clone()).collect();
                    EndComponent { states, actions }
                })
                .collect();
        }
    }
}
