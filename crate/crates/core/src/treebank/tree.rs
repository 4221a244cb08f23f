use std::collections::VecDeque;

use ndarray::Array2;
use thiserror::Error;

use super::conllu::Sentence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("sentence has no tokens")]
    Empty,
    #[error("no token is attached to the root")]
    NoRoot,
    #[error("multiple root tokens: {tokens:?}")]
    MultipleRoots { tokens: Vec<usize> },
    #[error("token {token} has head {head}, outside 0..={n}")]
    HeadOutOfRange { token: usize, head: usize, n: usize },
    #[error("token {token} is its own head")]
    SelfLoop { token: usize },
    #[error("cycle through tokens {tokens:?}")]
    Cycle { tokens: Vec<usize> },
}

/// A validated rooted dependency tree. `heads[i]` is the head of token
/// `i + 1`; 0 denotes the artificial root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DepTree {
    heads: Vec<usize>,
}

impl DepTree {
    pub fn from_heads(heads: Vec<usize>) -> Result<Self, TreeError> {
        let n = heads.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        for (i, &h) in heads.iter().enumerate() {
            let token = i + 1;
            if h > n {
                return Err(TreeError::HeadOutOfRange { token, head: h, n });
            }
            if h == token {
                return Err(TreeError::SelfLoop { token });
            }
        }
        let roots: Vec<usize> = (1..=n).filter(|&t| heads[t - 1] == 0).collect();
        match roots.len() {
            0 => return Err(TreeError::NoRoot),
            1 => {}
            _ => return Err(TreeError::MultipleRoots { tokens: roots }),
        }
        if let Some(tokens) = find_cycle(&heads) {
            return Err(TreeError::Cycle { tokens });
        }
        Ok(DepTree { heads })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    /// Head of 1-based `token`.
    pub fn head(&self, token: usize) -> usize {
        self.heads[token - 1]
    }

    pub fn root(&self) -> usize {
        self.heads
            .iter()
            .position(|&h| h == 0)
            .map(|i| i + 1)
            .expect("validated tree has a root")
    }

    /// Non-root arcs as `(head, dependent)` pairs in dependent order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads
            .iter()
            .enumerate()
            .filter(|(_, &h)| h != 0)
            .map(|(i, &h)| (h, i + 1))
    }

    /// Root distance of every token, root token at depth 0.
    pub fn depths(&self) -> Vec<usize> {
        let n = self.len();
        let mut depth = vec![usize::MAX; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while depth[cur] == usize::MAX {
                path.push(cur);
                match self.heads[cur] {
                    0 => {
                        depth[cur] = 0;
                        path.pop();
                        break;
                    }
                    h => cur = h - 1,
                }
            }
            let mut d = depth[cur];
            for &node in path.iter().rev() {
                d += 1;
                depth[node] = d;
            }
        }
        depth
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }
}

/// Tokens on the first head-cycle found, sorted ascending.
fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    const UNSEEN: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;

    let n = heads.len();
    let mut state = vec![UNSEEN; n];
    for start in 0..n {
        if state[start] != UNSEEN {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(node) = cur {
            match state[node] {
                DONE => break,
                ACTIVE => {
                    let pos = path.iter().position(|&p| p == node).expect("on path");
                    let mut tokens: Vec<usize> = path[pos..].iter().map(|&p| p + 1).collect();
                    tokens.sort_unstable();
                    return Some(tokens);
                }
                _ => {
                    state[node] = ACTIVE;
                    path.push(node);
                    cur = heads[node].checked_sub(1);
                }
            }
        }
        for node in path {
            state[node] = DONE;
        }
    }
    None
}

pub fn validate_tree(sentence: &Sentence) -> Result<DepTree, TreeError> {
    DepTree::from_heads(sentence.heads())
}

/// Path-length geometry of a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeGeometry {
    /// `distance[[i, j]]` is the number of edges between tokens `i+1` and `j+1`.
    pub distance: Array2<usize>,
    pub depth: Vec<usize>,
    pub height: usize,
    /// `|head - dependent|` for each non-root arc, in dependent order.
    pub arc_lengths: Vec<usize>,
}

impl TreeGeometry {
    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

pub fn tree_geometry(tree: &DepTree) -> TreeGeometry {
    let n = tree.len();
    let mut neighbours = vec![Vec::new(); n];
    for (h, d) in tree.arcs() {
        neighbours[h - 1].push(d - 1);
        neighbours[d - 1].push(h - 1);
    }

    let mut distance = Array2::from_elem((n, n), usize::MAX);
    let mut queue = VecDeque::new();
    for source in 0..n {
        distance[[source, source]] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = distance[[source, u]];
            for &v in &neighbours[u] {
                if distance[[source, v]] == usize::MAX {
                    distance[[source, v]] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    let depth = tree.depths();
    let height = depth.iter().copied().max().unwrap_or(0);
    let arc_lengths = tree.arcs().map(|(h, d)| h.abs_diff(d)).collect();
    TreeGeometry {
        distance,
        depth,
        height,
        arc_lengths,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token() {
        let t = DepTree::from_heads(vec![0]).unwrap();
        assert_eq!(t.root(), 1);
        let g = tree_geometry(&t);
        assert_eq!(g.height, 0);
        assert!(g.arc_lengths.is_empty());
    }

    #[test]
    fn middle_root() {
        let t = DepTree::from_heads(vec![2, 0, 2]).unwrap();
        assert_eq!(t.root(), 2);
        assert_eq!(t.depths(), vec![1, 0, 1]);
    }

    #[test]
    fn error_kinds() {
        assert_eq!(
            DepTree::from_heads(vec![2, 1, 0]),
            Err(TreeError::Cycle { tokens: vec![1, 2] })
        );
        assert_eq!(DepTree::from_heads(vec![2, 1]), Err(TreeError::NoRoot));
        assert_eq!(
            DepTree::from_heads(vec![0, 0, 1]),
            Err(TreeError::MultipleRoots { tokens: vec![1, 2] })
        );
        assert_eq!(
            DepTree::from_heads(vec![0, 7]),
            Err(TreeError::HeadOutOfRange {
                token: 2,
                head: 7,
                n: 2
            })
        );
        assert_eq!(
            DepTree::from_heads(vec![0, 2]),
            Err(TreeError::SelfLoop { token: 2 })
        );
        assert_eq!(DepTree::from_heads(vec![]), Err(TreeError::Empty));
    }

    #[test]
    fn chain() {
        let n = 7;
        let heads: Vec<usize> = (0..n).collect();
        let g = tree_geometry(&DepTree::from_heads(heads).unwrap());
        assert_eq!(g.height, n - 1);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(g.distance[[i, j]], i.abs_diff(j));
            }
        }
        assert_eq!(g.arc_lengths, vec![1; n - 1]);
    }
}
