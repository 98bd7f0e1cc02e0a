//! Fill-reducing orderings on the symmetric sparsity pattern.
//!
//! Nested dissection with level-set separators: a breadth-first search from a
//! pseudo-peripheral vertex splits the graph at its median level, the two
//! halves are ordered recursively and the separator is numbered last. On the
//! planar graphs produced by triangle meshes this keeps LU fill near
//! `O(n log n)`.

use std::collections::VecDeque;

use super::sparse::ComplexSparseMatrix;

const LEAF_SIZE: usize = 96;

/// Adjacency structure of `A + Aᵀ` without the diagonal.
#[derive(Debug, Clone)]
pub struct Graph {
    xadj: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn from_pattern(a: &ComplexSparseMatrix) -> Self {
        let n = a.nrows();
        let mut deg = vec![0usize; n + 1];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    deg[i + 1] += 1;
                    deg[j + 1] += 1;
                }
            }
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut next = deg.clone();
        let mut adj = vec![0usize; deg[n]];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    adj[next[i]] = j;
                    next[i] += 1;
                    adj[next[j]] = i;
                    next[j] += 1;
                }
            }
        }
        // sort and dedup each neighbour list
        let mut xadj = Vec::with_capacity(n + 1);
        let mut out = Vec::with_capacity(adj.len());
        xadj.push(0);
        for i in 0..n {
            let row = &mut adj[deg[i]..deg[i + 1]];
            row.sort_unstable();
            let mut last = usize::MAX;
            for &j in row.iter() {
                if j != last {
                    out.push(j);
                    last = j;
                }
            }
            xadj.push(out.len());
        }
        Self { xadj, adj: out }
    }

    pub fn len(&self) -> usize {
        self.xadj.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }
}

/// Returns `perm` with `perm[k]` the original index placed at position `k`.
pub fn nested_dissection(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let mut nd = Dissector {
        g,
        region: vec![0; n],
        stamp: vec![0; n],
        clock: 0,
        next_region: 1,
        order: Vec::with_capacity(n),
    };
    nd.dissect((0..n).collect(), 0);
    debug_assert_eq!(nd.order.len(), n);
    nd.order
}

struct Dissector<'a> {
    g: &'a Graph,
    region: Vec<usize>,
    stamp: Vec<usize>,
    clock: usize,
    next_region: usize,
    order: Vec<usize>,
}

impl Dissector<'_> {
    /// Level structure of the component of `root` inside region `r`.
    fn levels(&mut self, root: usize, r: usize) -> Vec<Vec<usize>> {
        self.clock += 1;
        let clock = self.clock;
        self.stamp[root] = clock;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &w in self.g.neighbours(v) {
                    if self.region[w] == r && self.stamp[w] != clock {
                        self.stamp[w] = clock;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    fn relabel(&mut self, verts: &[usize]) -> usize {
        let id = self.next_region;
        self.next_region += 1;
        for &v in verts {
            self.region[v] = id;
        }
        id
    }

    fn dissect(&mut self, verts: Vec<usize>, r: usize) {
        if verts.len() <= LEAF_SIZE {
            self.order_leaf(&verts, r);
            return;
        }
        // pseudo-peripheral root
        let mut root = verts[0];
        let mut levels = self.levels(root, r);
        for _ in 0..4 {
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| (self.g.neighbours(v).len(), v))
                .unwrap();
            let trial = self.levels(cand, r);
            if trial.len() > levels.len() {
                root = cand;
                levels = trial;
            } else {
                break;
            }
        }
        let _ = root;
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < verts.len() {
            // disconnected: split off this component
            let comp: Vec<usize> = levels.concat();
            let id = self.relabel(&comp);
            let clock = self.clock;
            let rest: Vec<usize> = verts
                .into_iter()
                .filter(|&v| self.stamp[v] != clock)
                .collect();
            let rid = self.relabel(&rest);
            self.dissect(comp, id);
            self.dissect(rest, rid);
            return;
        }
        if levels.len() < 3 {
            self.order_leaf(&verts, r);
            return;
        }
        let half = verts.len() / 2;
        let mut acc = 0;
        let mut m = 0;
        for (i, l) in levels.iter().enumerate() {
            acc += l.len();
            if acc >= half {
                m = i;
                break;
            }
        }
        let m = m.clamp(1, levels.len() - 2);
        let left: Vec<usize> = levels[..m].concat();
        let right: Vec<usize> = levels[m + 1..].concat();
        let sep = std::mem::take(&mut levels[m]);
        let lid = self.relabel(&left);
        let rid = self.relabel(&right);
        self.relabel(&sep);
        self.dissect(left, lid);
        self.dissect(right, rid);
        self.order.extend_from_slice(&sep);
    }

    /// Reverse Cuthill-McKee inside a small region.
    fn order_leaf(&mut self, verts: &[usize], r: usize) {
        let start = self.order.len();
        self.clock += 1;
        let clock = self.clock;
        let mut pending: Vec<usize> = verts.to_vec();
        pending.sort_by_key(|&v| (self.g.neighbours(v).len(), v));
        let mut queue = VecDeque::new();
        for &s in &pending {
            if self.stamp[s] == clock {
                continue;
            }
            self.stamp[s] = clock;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                self.order.push(v);
                let mut nbrs: Vec<usize> = self
                    .g
                    .neighbours(v)
                    .iter()
                    .copied()
                    .filter(|&w| self.region[w] == r && self.stamp[w] != clock)
                    .collect();
                nbrs.sort_by_key(|&w| (self.g.neighbours(w).len(), w));
                for w in nbrs {
                    self.stamp[w] = clock;
                    queue.push_back(w);
                }
            }
        }
        self.order[start..].reverse();
        let id = self.next_region;
        self.next_region += 1;
        for &v in verts {
            self.region[v] = id;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use crate::C64;

    fn grid_laplacian(nx: usize, ny: usize) -> ComplexSparseMatrix {
        let id = |i: usize, j: usize| j * nx + i;
        let mut b = TripletBuilder::new(nx * ny, nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                b.push(id(i, j), id(i, j), C64::new(4.0, 0.0));
                if i + 1 < nx {
                    b.push(id(i, j), id(i + 1, j), C64::new(-1.0, 0.0));
                    b.push(id(i + 1, j), id(i, j), C64::new(-1.0, 0.0));
                }
                if j + 1 < ny {
                    b.push(id(i, j), id(i, j + 1), C64::new(-1.0, 0.0));
                    b.push(id(i, j + 1), id(i, j), C64::new(-1.0, 0.0));
                }
            }
        }
        b.build()
    }

    #[test]
    fn permutation_is_complete() {
        let a = grid_laplacian(40, 23);
        let g = Graph::from_pattern(&a);
        assert_eq!(g.neighbours(0), &[1, 40]);
        let mut p = nested_dissection(&g);
        assert_eq!(p.len(), 40 * 23);
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(i, &v)| i == v));
    }

    #[test]
    fn handles_disconnected_graphs() {
        let a = ComplexSparseMatrix::identity(500);
        let g = Graph::from_pattern(&a);
        let mut p = nested_dissection(&g);
        p.sort_unstable();
        assert_eq!(p, (0..500).collect::<Vec<_>>());
    }
}
