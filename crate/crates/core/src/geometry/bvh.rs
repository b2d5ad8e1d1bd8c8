//! Bounding-volume hierarchy over triangles for nearest-point queries.

use crate::Vec3;

use super::mesh::closest_point_on_triangle;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    // leaf: range into `order`; inner: children indices
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

fn bounds_of(tris: &[usize], boxes: &[(Vec3, Vec3)]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &t in tris {
        lo = lo.inf(&boxes[t].0);
        hi = hi.sup(&boxes[t].1);
    }
    (lo, hi)
}

fn dist_sq_to_box(q: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        let e = if q[i] < lo[i] {
            lo[i] - q[i]
        } else if q[i] > hi[i] {
            q[i] - hi[i]
        } else {
            0.0
        };
        d += e * e;
    }
    d
}

impl Bvh {
    pub(crate) fn build(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Self {
        let boxes: Vec<(Vec3, Vec3)> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
            })
            .collect();
        let centroids: Vec<Vec3> = boxes.iter().map(|(lo, hi)| (lo + hi) * 0.5).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::new();
        Self::split(&mut nodes, &mut order, 0, triangles.len(), &boxes, &centroids);
        Bvh { nodes, order }
    }

    fn split(
        nodes: &mut Vec<Node>,
        order: &mut [usize],
        start: usize,
        end: usize,
        boxes: &[(Vec3, Vec3)],
        centroids: &[Vec3],
    ) -> usize {
        let (lo, hi) = bounds_of(&order[start..end], boxes);
        let id = nodes.len();
        nodes.push(Node { lo, hi, kind: NodeKind::Leaf { start, end } });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let slice = &mut order[start..end];
        let mut clo = Vec3::repeat(f64::INFINITY);
        let mut chi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in slice.iter() {
            clo = clo.inf(&centroids[t]);
            chi = chi.sup(&centroids[t]);
        }
        let axis = (chi - clo).imax();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = Self::split(nodes, order, start, start + mid, boxes, centroids);
        let right = Self::split(nodes, order, start + mid, end, boxes, centroids);
        nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub(crate) fn root_bounds(&self) -> (Vec3, Vec3) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }

    /// Returns `(point, triangle, squared distance)`. Ties go to the lowest
    /// triangle index so the answer matches a linear scan.
    pub(crate) fn nearest(
        &self,
        q: &Vec3,
        vertices: &[Vec3],
        triangles: &[[usize; 3]],
    ) -> (Vec3, usize, f64) {
        let mut best = (Vec3::zeros(), usize::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if dist_sq_to_box(q, &node.lo, &node.hi) > best.2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = triangles[t].map(|i| vertices[i]);
                        let p = closest_point_on_triangle(q, &a, &b, &c);
                        let d2 = (q - p).norm_squared();
                        if d2 < best.2 || (d2 == best.2 && t < best.1) {
                            best = (p, t, d2);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = dist_sq_to_box(q, &self.nodes[left].lo, &self.nodes[left].hi);
                    let dr = dist_sq_to_box(q, &self.nodes[right].lo, &self.nodes[right].hi);
                    // visit the nearer child first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}
