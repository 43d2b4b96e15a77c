use crate::prior::PriorDistribution;
use crate::scalar::Scalar;
use crate::sequence::{MutationAction, SequenceState};

use super::SearchError;

pub type NodeId = usize;

/// Search statistics for the edge leading into a node.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    /// Mutation leading here; `None` for the root.
    pub action: Option<MutationAction>,
    pub parent: Option<NodeId>,
    pub visits: u64,
    pub total_reward: T,
    pub prior: T,
    pub children: Vec<NodeId>,
    pub expanded: bool,
    /// Set when the node's oracle fitness fell below its parent's.
    pub terminal: bool,
    /// Oracle fitness, when known.
    pub fitness: Option<T>,
    /// Mutations applied since the episode start.
    pub depth: usize,
    /// Simulations whose rollout was evaluated at this node.
    pub leaf_evaluations: u64,
    visited: Vec<NodeId>,
    by_prior: Vec<NodeId>,
    frontier: usize,
}

impl<T: Scalar> TreeNode<T> {
    fn new(action: Option<MutationAction>, parent: Option<NodeId>, prior: T, depth: usize) -> Self {
        Self {
            action,
            parent,
            visits: 0,
            total_reward: T::zero(),
            prior,
            children: Vec::new(),
            expanded: false,
            terminal: false,
            fitness: None,
            depth,
            leaf_evaluations: 0,
            visited: Vec::new(),
            by_prior: Vec::new(),
            frontier: 0,
        }
    }

    /// Mean backed-up reward, undefined before the first visit.
    pub fn mean_reward(&self) -> Option<T> {
        (self.visits > 0).then(|| self.total_reward / T::from_usize_lossy(self.visits as usize))
    }
}

/// PUCT selection score `W/N + c·P·√N_parent / (1 + N)`, with the
/// exploitation term taken as zero for unvisited nodes.
pub fn puct_score<T: Scalar>(
    visits: u64,
    total_reward: T,
    prior: T,
    parent_visits: u64,
    c: T,
) -> T {
    let exploit = if visits == 0 {
        T::zero()
    } else {
        total_reward / T::from_usize_lossy(visits as usize)
    };
    let n = T::from_usize_lossy(visits as usize);
    let parent = T::from_usize_lossy(parent_visits as usize);
    exploit + c * prior * parent.sqrt() / (T::one() + n)
}

/// Arena-allocated search tree. Children of a node are stored in ascending
/// flat-index order, which is also the tie-break order.
#[derive(Debug, Clone)]
pub struct SearchTree<T> {
    nodes: Vec<TreeNode<T>>,
    root: NodeId,
    root_state: SequenceState,
}

impl<T: Scalar> SearchTree<T> {
    pub fn new(root_state: SequenceState, depth: usize) -> Self {
        Self {
            nodes: vec![TreeNode::new(None, None, T::one(), depth)],
            root: 0,
            root_state,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_state(&self) -> &SequenceState {
        &self.root_state
    }

    pub fn node(&self, id: NodeId) -> &TreeNode<T> {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ids reachable from the root, parents before children.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.nodes[out[i]].children.iter().copied());
            i += 1;
        }
        out
    }

    pub fn puct(&self, child: NodeId, c: T) -> T {
        let n = &self.nodes[child];
        let parent_visits = n.parent.map_or(0, |p| self.nodes[p].visits);
        puct_score(n.visits, n.total_reward, n.prior, parent_visits, c)
    }

    /// Child with the highest PUCT score; ties go to the lowest flat index.
    ///
    /// Unvisited children all score `c·P·√N`, so only the first unvisited
    /// child in prior order competes with the visited ones.
    pub fn best_child(&self, id: NodeId, c: T) -> Option<NodeId> {
        let node = &self.nodes[id];
        let length = self.root_state.len();
        let mut best: Option<(NodeId, T, usize)> = None;
        let mut consider = |child: NodeId| {
            let score = self.puct(child, c);
            let flat = self.nodes[child].action.expect("child has an action").flat_index(length);
            let better = match best {
                None => true,
                Some((_, b, f)) => score > b || (score == b && flat < f),
            };
            if better {
                best = Some((child, score, flat));
            }
        };
        for &child in &node.visited {
            consider(child);
        }
        let explore = c * T::from_usize_lossy(node.visits as usize).sqrt();
        let first_unvisited = if explore > T::zero() {
            node.by_prior[node.frontier..].iter().find(|&&ch| self.nodes[ch].visits == 0)
        } else {
            node.children.iter().find(|&&ch| self.nodes[ch].visits == 0)
        };
        if let Some(&child) = first_unvisited {
            consider(child);
        }
        best.map(|(id, _, _)| id)
    }

    /// Reference selection rule: full scan over every child.
    pub fn best_child_scan(&self, id: NodeId, c: T) -> Option<NodeId> {
        let mut best: Option<(NodeId, T)> = None;
        for &child in &self.nodes[id].children {
            let score = self.puct(child, c);
            if best.map_or(true, |(_, b)| score > b) {
                best = Some((child, score));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Root-to-leaf path of greedy PUCT choices, stopping at the first node
    /// that is unexpanded, terminal or at `max_depth`.
    pub fn select_path(&self, c: T, max_depth: usize) -> Vec<NodeId> {
        let mut path = vec![self.root];
        let mut id = self.root;
        loop {
            let node = &self.nodes[id];
            if !node.expanded || node.terminal || node.depth >= max_depth {
                return path;
            }
            match self.best_child(id, c) {
                Some(child) => {
                    path.push(child);
                    id = child;
                }
                None => return path,
            }
        }
    }

    /// State reached by following `path` from the root.
    pub fn state_along(&self, path: &[NodeId]) -> SequenceState {
        let mut state = self.root_state.clone();
        for &id in path {
            if id == self.root {
                continue;
            }
            let action = self.nodes[id].action.expect("non-root node has an action");
            state = state.apply(action).expect("tree edges are legal moves");
        }
        state
    }

    pub fn state_of(&self, id: NodeId) -> SequenceState {
        self.state_along(&self.path_to(id))
    }

    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while cur != self.root {
            cur = self.nodes[cur].parent.expect("node below root has a parent");
            path.push(cur);
        }
        path.reverse();
        path
    }

    pub fn set_fitness(&mut self, id: NodeId, fitness: T) {
        self.nodes[id].fitness = Some(fitness);
    }

    pub fn mark_terminal(&mut self, id: NodeId) {
        self.nodes[id].terminal = true;
    }

    /// Adds one child per action of `distribution`, each with zero
    /// statistics and its prior probability.
    pub fn expand(&mut self, id: NodeId, distribution: &PriorDistribution<T>) -> Result<(), SearchError> {
        if self.nodes[id].expanded {
            return Err(SearchError::AlreadyExpanded);
        }
        let depth = self.nodes[id].depth + 1;
        let mut order: Vec<usize> = (0..distribution.len()).collect();
        let length = self.root_state.len();
        order.sort_by_key(|&i| distribution.actions[i].flat_index(length));
        let mut children = Vec::with_capacity(order.len());
        for i in order {
            children.push(self.nodes.len());
            self.nodes.push(TreeNode::new(
                Some(distribution.actions[i]),
                Some(id),
                distribution.probs[i],
                depth,
            ));
        }
        let mut by_prior = children.clone();
        by_prior.sort_by(|&a, &b| {
            self.nodes[b]
                .prior
                .partial_cmp(&self.nodes[a].prior)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let node = &mut self.nodes[id];
        node.children = children;
        node.by_prior = by_prior;
        node.expanded = true;
        Ok(())
    }

    /// Adds `reward` to every node from `leaf` up to the root inclusive.
    pub fn backup(&mut self, leaf: NodeId, reward: T) {
        self.nodes[leaf].leaf_evaluations += 1;
        let mut cur = Some(leaf);
        while let Some(id) = cur {
            let node = &mut self.nodes[id];
            node.visits += 1;
            node.total_reward += reward;
            let first = node.visits == 1;
            if id == self.root {
                break;
            }
            cur = node.parent;
            if first {
                let parent = cur.expect("node below root has a parent");
                self.nodes[parent].visited.push(id);
                self.advance_frontier(parent);
            }
        }
    }

    fn advance_frontier(&mut self, id: NodeId) {
        let mut f = self.nodes[id].frontier;
        let order = &self.nodes[id].by_prior;
        while f < order.len() && self.nodes[order[f]].visits > 0 {
            f += 1;
        }
        self.nodes[id].frontier = f;
    }

    /// Most visited child of the root; ties go to the lowest flat index.
    pub fn choose_move(&self) -> Result<(NodeId, MutationAction), SearchError> {
        self.choose_move_where(|_| true)
    }

    /// Most visited root child among those accepted by `allow`.
    pub fn choose_move_where(
        &self,
        mut allow: impl FnMut(MutationAction) -> bool,
    ) -> Result<(NodeId, MutationAction), SearchError> {
        let mut best: Option<(NodeId, u64)> = None;
        for &child in &self.nodes[self.root].children {
            let node = &self.nodes[child];
            let action = node.action.expect("child has an action");
            if node.visits == 0 || !allow(action) {
                continue;
            }
            if best.map_or(true, |(_, v)| node.visits > v) {
                best = Some((child, node.visits));
            }
        }
        best.map(|(id, _)| (id, self.nodes[id].action.expect("child has an action")))
            .ok_or(SearchError::NoVisitedChildren)
    }

    /// Re-roots the tree at `child`, keeping its subtree and dropping
    /// everything else.
    pub fn advance(&mut self, child: NodeId) {
        assert_eq!(self.nodes[child].parent, Some(self.root), "can only advance to a root child");
        let state = self.state_of(child);
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let order = {
            let mut out = vec![child];
            let mut i = 0;
            while i < out.len() {
                out.extend(self.nodes[out[i]].children.iter().copied());
                i += 1;
            }
            out
        };
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut nodes = Vec::with_capacity(order.len());
        for &old in &order {
            let mut node = self.nodes[old].clone();
            node.parent = if old == child { None } else { node.parent.map(|p| remap[p]) };
            node.children.iter_mut().for_each(|c| *c = remap[*c]);
            node.visited.iter_mut().for_each(|c| *c = remap[*c]);
            node.by_prior.iter_mut().for_each(|c| *c = remap[*c]);
            nodes.push(node);
        }
        self.nodes = nodes;
        self.root = 0;
        self.root_state = state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Alphabet;

    fn dist(actions: &[(usize, usize)], probs: &[f64]) -> PriorDistribution<f64> {
        PriorDistribution {
            actions: actions.iter().map(|&(p, r)| MutationAction::new(p, r)).collect(),
            probs: probs.to_vec(),
        }
    }

    fn tree() -> SearchTree<f64> {
        let a = Alphabet::new("ACD").unwrap();
        SearchTree::new(SequenceState::parse(&a, "AC").unwrap(), 0)
    }

    #[test]
    fn puct_examples() {
        assert_eq!(puct_score(0, 0.0, 0.5, 4, 10.0), 10.0);
        assert_eq!(puct_score(2, 4.0, 0.3, 9, 0.0), 2.0);
        assert_eq!(puct_score(0, 0.0, 0.0, 9, 10.0), 0.0);
        assert_eq!(puct_score(1, 5.0, 0.1, 1, 10.0), 5.5);
    }

    #[test]
    fn expansion_is_guarded() {
        let mut t = tree();
        let d = dist(&[(1, 0), (0, 1), (0, 2), (1, 2)], &[0.25; 4]);
        t.expand(0, &d).unwrap();
        assert_eq!(t.node(0).children.len(), 4);
        let total: f64 = t.node(0).children.iter().map(|&c| t.node(c).prior).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(t.expand(0, &d), Err(SearchError::AlreadyExpanded)));
        // children sorted by flat index regardless of input order
        let flats: Vec<usize> = t.node(0).children.iter().map(|&c| t.node(c).action.unwrap().flat_index(2)).collect();
        assert_eq!(flats, vec![1, 2, 4, 5]);
    }

    #[test]
    fn backup_updates_only_the_path() {
        let mut t = tree();
        t.expand(0, &dist(&[(0, 1), (0, 2)], &[0.5, 0.5])).unwrap();
        let c0 = t.node(0).children[0];
        let c1 = t.node(0).children[1];
        t.backup(c0, 0.5);
        t.backup(c0, 0.0);
        assert_eq!((t.node(c0).visits, t.node(c0).total_reward), (2, 0.5));
        assert_eq!((t.node(0).visits, t.node(0).total_reward), (2, 0.5));
        assert_eq!(t.node(c1).visits, 0);
    }

    #[test]
    fn choose_move_rules() {
        let mut t = tree();
        t.expand(0, &dist(&[(0, 1), (0, 2), (1, 0)], &[0.3, 0.3, 0.4])).unwrap();
        assert!(matches!(t.choose_move(), Err(SearchError::NoVisitedChildren)));
        let kids = t.node(0).children.clone();
        for _ in 0..4 {
            t.backup(kids[1], 1.0);
            t.backup(kids[2], 1.0);
        }
        let (id, _) = t.choose_move().unwrap();
        assert_eq!(id, kids[1]);
        t.backup(kids[2], 0.0);
        assert_eq!(t.choose_move().unwrap().0, kids[2]);
        assert_eq!(t.choose_move_where(|a| a.residue != 2).unwrap().0, kids[1]);
    }

    #[test]
    fn fast_selection_matches_scan() {
        use rand::Rng;
        let a = Alphabet::new("ACDE").unwrap();
        let mut rng = crate::rng::seeded(17);
        for case in 0..200 {
            let mut t = SearchTree::<f64>::new(SequenceState::parse(&a, "ACDE").unwrap(), 0);
            let actions: Vec<(usize, usize)> = (0..4).flat_map(|p| (0..4).filter(move |&r| r != p).map(move |r| (p, r))).collect();
            let mut raw: Vec<f64> = (0..actions.len()).map(|_| (rng.random_range(0..4) as f64) + 0.5).collect();
            if case % 3 == 0 {
                raw.iter_mut().for_each(|x| *x = 1.0);
            }
            let z: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|x| x / z).collect();
            t.expand(0, &dist(&actions, &probs)).unwrap();
            let c = [0.0, 0.1, 1.0, 10.0][case % 4];
            for _ in 0..30 {
                assert_eq!(t.best_child(0, c), t.best_child_scan(0, c));
                let pick = if rng.random_bool(0.7) {
                    t.best_child(0, c).unwrap()
                } else {
                    t.node(0).children[rng.random_range(0..12)]
                };
                t.backup(pick, rng.random_range(0..3) as f64 * 0.25);
            }
        }
    }

    #[test]
    fn advance_keeps_subtree() {
        let mut t = tree();
        t.expand(0, &dist(&[(0, 1), (0, 2)], &[0.5, 0.5])).unwrap();
        let c0 = t.node(0).children[0];
        t.expand(c0, &dist(&[(1, 0), (1, 2)], &[0.9, 0.1])).unwrap();
        let g = t.node(c0).children[1];
        t.backup(g, 2.0);
        t.advance(c0);
        assert_eq!(t.root_state().to_string(), "CC");
        assert_eq!(t.len(), 3);
        assert_eq!(t.node(0).visits, 1);
        assert_eq!(t.node(0).depth, 1);
        let g = t.node(0).children[1];
        assert_eq!(t.state_of(g).to_string(), "CD");
        assert_eq!(t.node(g).total_reward, 2.0);
    }
}
