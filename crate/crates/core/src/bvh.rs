//! Bounding-volume hierarchy over axis-aligned boxes.

use crate::geom::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    /// `[start, end)` into `Bvh::order`.
    Leaf {
        start: u32,
        end: u32,
    },
    Inner {
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1),
            order: (0..boxes.len() as u32).collect(),
        };
        if !boxes.is_empty() {
            let centers: Vec<Vec3> = boxes.iter().map(|b| b.center()).collect();
            bvh.build_rec(boxes, &centers, 0, boxes.len());
        }
        bvh
    }

    fn build_rec(&mut self, boxes: &[Aabb], centers: &[Vec3], start: usize, end: usize) -> u32 {
        let mut bounds = Aabb::empty();
        let mut cbox = Aabb::empty();
        for &i in &self.order[start..end] {
            bounds = bounds.union(&boxes[i as usize]);
            cbox.grow(&centers[i as usize]);
        }
        let id = self.nodes.len() as u32;
        let ext = cbox.extent();
        let axis = ext.imax();
        if end - start <= LEAF_SIZE || ext[axis] <= 0.0 {
            self.nodes.push(Node {
                bounds,
                kind: Kind::Leaf {
                    start: start as u32,
                    end: end as u32,
                },
            });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a as usize][axis]
                .total_cmp(&centers[b as usize][axis])
                .then(a.cmp(&b))
        });
        self.nodes.push(Node {
            bounds,
            kind: Kind::Leaf { start: 0, end: 0 },
        });
        let left = self.build_rec(boxes, centers, start, mid);
        let right = self.build_rec(boxes, centers, mid, end);
        self.nodes[id as usize].kind = Kind::Inner { left, right };
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Calls `visit` for every item whose node bounds pass `test`, in a fixed
    /// traversal order.
    #[inline]
    pub fn query(&self, test: impl Fn(&Aabb) -> bool, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: [u32; 64] = [0; 64];
        let mut top = 1usize;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !test(&node.bounds) {
                continue;
            }
            match node.kind {
                Kind::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        visit(i as usize);
                    }
                }
                Kind::Inner { left, right } => {
                    stack[top] = right;
                    stack[top + 1] = left;
                    top += 2;
                }
            }
        }
    }

    /// Items whose boxes may contain `p`.
    #[inline]
    pub fn query_point(&self, p: &Vec3, visit: impl FnMut(usize)) {
        self.query(|b| b.contains(p), visit)
    }

    /// Minimizes `cost(item)` over all items, pruning nodes whose lower bound
    /// `bound(node box)` cannot beat the current best. Ties go to the lower
    /// item index.
    pub fn min_by(&self, bound: impl Fn(&Aabb) -> f64, cost: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if bound(&node.bounds) > best.1 {
                continue;
            }
            match node.kind {
                Kind::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        let i = i as usize;
                        let c = cost(i);
                        if c < best.1 || (c == best.1 && i < best.0) {
                            best = (i, c);
                        }
                    }
                }
                Kind::Inner { left, right } => {
                    let bl = bound(&self.nodes[left as usize].bounds);
                    let br = bound(&self.nodes[right as usize].bounds);
                    // Visit the closer child first.
                    if bl <= br {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        Some(best)
    }
}
