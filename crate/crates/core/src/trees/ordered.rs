use crate::error::{domain, Result};

/// A rooted ordered (plane) graph tree.
///
/// Vertices are `0..n`. Each vertex keeps its children in order; the root has
/// no parent. Adjacency is also stored flat for the random-walk hot loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    adj_start: Vec<u32>,
    adj: Vec<u32>,
}

impl OrderedTree {
    /// Builds a tree from per-vertex ordered child lists.
    pub fn from_children(root: usize, children: Vec<Vec<usize>>) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return domain("a tree needs at least one vertex");
        }
        if root >= n {
            return domain(format!("root {root} out of range for {n} vertices"));
        }
        let mut parent = vec![None; n];
        for (v, kids) in children.iter().enumerate() {
            for &c in kids {
                if c >= n {
                    return domain(format!("child {c} of vertex {v} out of range"));
                }
                if c == root {
                    return domain("the root cannot be a child");
                }
                if parent[c].is_some() {
                    return domain(format!("vertex {c} has more than one parent"));
                }
                parent[c] = Some(v);
            }
        }
        // Connectivity + acyclicity: every vertex must be reached from the root.
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if depth[c] != usize::MAX {
                    return domain("child lists contain a cycle");
                }
                depth[c] = depth[v] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return domain(format!("{} vertices are unreachable from the root", n - seen));
        }

        let mut adj_start = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(2 * (n - 1));
        for v in 0..n {
            adj_start.push(adj.len() as u32);
            if let Some(p) = parent[v] {
                adj.push(p as u32);
            }
            adj.extend(children[v].iter().map(|&c| c as u32));
        }
        adj_start.push(adj.len() as u32);

        Ok(Self {
            root,
            parent,
            children,
            depth,
            adj_start,
            adj,
        })
    }

    /// Builds a tree from a parent array; children are ordered by vertex index.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        let n = parents.len();
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match p {
                None if root.is_some() => return domain("more than one root"),
                None => root = Some(v),
                Some(p) if *p >= n => return domain(format!("parent {p} out of range")),
                Some(p) => children[*p].push(v),
            }
        }
        let Some(root) = root else {
            return domain("no root");
        };
        Self::from_children(root, children)
    }

    /// The path `0 - 1 - ... - (n-1)` rooted at 0.
    pub fn path(n: usize) -> Result<Self> {
        let parents: Vec<_> = (0..n).map(|v| v.checked_sub(1)).collect();
        Self::from_parents(&parents)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.adj_start[v + 1] - self.adj_start[v]) as usize
    }

    /// Neighbours of `v`: parent first (if any), then children in order.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.adj_start[v] as usize..self.adj_start[v + 1] as usize]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.len() - 1
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.len() {
            return domain(format!("vertex {v} out of range for {} vertices", self.len()));
        }
        Ok(())
    }

    /// Lowest common ancestor by climbing.
    pub fn lca(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u].unwrap();
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v].unwrap();
        }
        while u != v {
            u = self.parent[u].unwrap();
            v = self.parent[v].unwrap();
        }
        u
    }

    /// Number of edges on the unique path between `u` and `v`.
    pub fn graph_distance(&self, u: usize, v: usize) -> Result<usize> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        Ok(self.distance_unchecked(u, v))
    }

    pub(crate) fn distance_unchecked(&self, u: usize, v: usize) -> usize {
        let w = self.lca(u, v);
        self.depth[u] + self.depth[v] - 2 * self.depth[w]
    }

    /// Vertices in depth-first preorder (children visited in order).
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        order
    }

    /// Distances from `source` to every vertex (BFS).
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = std::collections::VecDeque::with_capacity(self.len());
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Relabels vertices in preorder so that vertex ids follow the
    /// depth-first traversal. The shape is unchanged.
    pub fn canonical(&self) -> Self {
        let order = self.preorder();
        let mut new_id = vec![0; self.len()];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i;
        }
        let children = order
            .iter()
            .map(|&v| self.children[v].iter().map(|&c| new_id[c]).collect())
            .collect();
        Self::from_children(0, children).expect("relabelling preserves validity")
    }
}
