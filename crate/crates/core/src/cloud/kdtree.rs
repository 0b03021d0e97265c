use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use super::CloudError;
use crate::Real;

const LEAF_SIZE: usize = 12;

enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: T, left: usize, right: usize },
}

/// Static kd-tree over a borrowed point slice. Queries are exact and order
/// results by `(distance, index)`, so equidistant points come out lowest
/// index first.
pub struct KdTree<'a, T: Real> {
    points: &'a [Vector3<T>],
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    dist2: T,
    index: usize,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Candidate<T> {}
impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp_finite(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl<'a, T: Real> KdTree<'a, T> {
    pub fn build(points: &'a [Vector3<T>]) -> Self {
        let mut tree = KdTree { points, order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &self.order[start..end];
        let mut lo = self.points[slice[0]];
        let mut hi = lo;
        for &i in slice {
            let p = self.points[i];
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        let spread = hi - lo;
        let dim = spread.imax();
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][dim].total_cmp_finite(&points[b][dim]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Indices of the `k` nearest points, nearest first.
    pub fn knn(&self, query: &Vector3<T>, k: usize) -> Result<Vec<usize>, CloudError<T>> {
        Ok(self.knn_with_dist2(query, k)?.into_iter().map(|(i, _)| i).collect())
    }

    /// Like [`KdTree::knn`] but also returns squared distances.
    pub fn knn_with_dist2(&self, query: &Vector3<T>, k: usize) -> Result<Vec<(usize, T)>, CloudError<T>> {
        if k == 0 || k > self.points.len() {
            return Err(CloudError::InsufficientPoints { needed: k.max(1), available: self.points.len() });
        }
        let mut heap: BinaryHeap<Candidate<T>> = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out: Vec<Candidate<T>> = heap.into_vec();
        out.sort();
        Ok(out.into_iter().map(|c| (c.index, c.dist2)).collect())
    }

    /// Nearest point and its squared distance.
    pub fn nearest(&self, query: &Vector3<T>) -> Option<(usize, T)> {
        self.knn_with_dist2(query, 1).ok().map(|v| v[0])
    }

    fn search(&self, node: usize, q: &Vector3<T>, k: usize, heap: &mut BinaryHeap<Candidate<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { dist2: (self.points[i] - q).norm_squared(), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < T::ZERO { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                let worst = heap.peek().map(|c| c.dist2);
                // Equal distances may still hide a lower-index tie on the far side.
                if heap.len() < k || worst.is_none_or(|w| diff * diff <= w) {
                    self.search(far, q, k, heap);
                }
            }
        }
    }

    /// All indices within `radius` of `query` (closed ball), ascending by index.
    pub fn within_radius(&self, query: &Vector3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_search(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_search(&self, node: usize, q: &Vector3<T>, r2: T, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(self.order[start..end].iter().copied().filter(|&i| (self.points[i] - q).norm_squared() <= r2));
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                if diff <= T::ZERO || diff * diff <= r2 {
                    self.radius_search(left, q, r2, out);
                }
                if diff >= T::ZERO || diff * diff <= r2 {
                    self.radius_search(right, q, r2, out);
                }
            }
        }
    }
}
