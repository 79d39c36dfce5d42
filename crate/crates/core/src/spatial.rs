//! Static kd-tree over the support of a point measure.
//!
//! Masses are accumulated in fixed point (`i128` multiples of `2^-scale`), so a
//! region's mass does not depend on summation order: subtree shortcuts, brute
//! force and any regrouping give bit-identical results. Weighted sums of other
//! quantities visit points in tree order, which is the canonical order used
//! throughout the crate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{Point, Region, MAX_DIM};

const LEAF_SIZE: usize = 8;

/// Exact fixed-point representation of atom masses.
#[derive(Clone, Debug)]
pub struct MassScale {
    /// Weights are stored as integers in units of `2^-shift`.
    shift: i32,
}

impl MassScale {
    /// Choose the finest unit that keeps every weight exact and the total
    /// below `2^126`. Weights with more dynamic range than fits are rounded.
    pub fn for_weights(weights: &[f64]) -> Self {
        let mut finest = i32::MIN;
        let mut total = 0.0f64;
        for &w in weights {
            total += w;
            if w > 0.0 {
                // w = m * 2^e with m a 53-bit integer
                let e = w.log2().floor() as i32 - 52;
                finest = finest.max(-e);
            }
        }
        if finest == i32::MIN {
            return Self { shift: 0 };
        }
        let head = (total.max(f64::MIN_POSITIVE).log2().ceil() as i32) + 1;
        let shift = finest.min(126 - head);
        Self { shift }
    }

    #[inline]
    pub fn quantize(&self, w: f64) -> i128 {
        (w * 2f64.powi(self.shift)).round() as i128
    }

    #[inline]
    pub fn to_f64(&self, m: i128) -> f64 {
        (m as f64) * 2f64.powi(-self.shift)
    }
}

#[derive(Clone, Debug)]
struct Node {
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    start: u32,
    end: u32,
    /// Index of the left child; the right child follows its subtree. Zero for leaves.
    left: u32,
    right: u32,
    mass: i128,
}

/// A kd-tree with subtree masses, built once and then read-only.
#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    order: Vec<u32>,
    coords: Vec<[f64; MAX_DIM]>,
    mass: Vec<i128>,
    nodes: Vec<Node>,
    scale: MassScale,
}

impl KdTree {
    pub fn new(points: &[Point], weights: &[f64]) -> Self {
        assert_eq!(points.len(), weights.len());
        let dim = points.first().map_or(1, Point::dim);
        let scale = MassScale::for_weights(weights);
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut order, 0, points.len(), dim, &mut nodes);
        }
        let coords: Vec<[f64; MAX_DIM]> = order.iter().map(|&i| *points[i as usize].raw()).collect();
        let mass: Vec<i128> = order
            .iter()
            .map(|&i| scale.quantize(weights[i as usize]))
            .collect();
        let mut tree = Self {
            dim,
            order,
            coords,
            mass,
            nodes,
            scale,
        };
        if !tree.nodes.is_empty() {
            tree.fill_mass(0);
        }
        tree
    }

    fn fill_mass(&mut self, id: usize) -> i128 {
        let (left, right) = (self.nodes[id].left, self.nodes[id].right);
        let m = if left == 0 {
            let n = &self.nodes[id];
            self.mass[n.start as usize..n.end as usize].iter().sum()
        } else {
            self.fill_mass(left as usize) + self.fill_mass(right as usize)
        };
        self.nodes[id].mass = m;
        m
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn scale(&self) -> &MassScale {
        &self.scale
    }

    /// Exact fixed-point mass of the support points inside `region`.
    pub fn fixed_mass(&self, region: &Region) -> i128 {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut total = 0i128;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if region.misses_box(&n.lo, &n.hi) {
                continue;
            }
            if region.contains_box(&n.lo, &n.hi) {
                total += n.mass;
                continue;
            }
            if n.left == 0 {
                for k in n.start as usize..n.end as usize {
                    if region.contains_point(&Point::from_array(self.dim, self.coords[k])) {
                        total += self.mass[k];
                    }
                }
            } else {
                stack.push(n.right as usize);
                stack.push(n.left as usize);
            }
        }
        total
    }

    pub fn mass(&self, region: &Region) -> f64 {
        self.scale.to_f64(self.fixed_mass(region))
    }

    /// Visit the indices of support points in `include` but not in `exclude`,
    /// in canonical tree order.
    pub fn for_each_in<F: FnMut(usize)>(&self, include: &Region, exclude: Option<&Region>, mut f: F) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if include.misses_box(&n.lo, &n.hi) {
                continue;
            }
            if let Some(ex) = exclude {
                if ex.contains_box(&n.lo, &n.hi) {
                    continue;
                }
            }
            if n.left == 0 {
                for k in n.start as usize..n.end as usize {
                    let p = Point::from_array(self.dim, self.coords[k]);
                    if include.contains_point(&p) && !exclude.is_some_and(|ex| ex.contains_point(&p)) {
                        f(self.order[k] as usize);
                    }
                }
            } else {
                stack.push(n.right as usize);
                stack.push(n.left as usize);
            }
        }
    }

    /// Indices of support points in `region`, in canonical tree order.
    pub fn indices_in(&self, region: &Region) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in(region, None, |i| out.push(i));
        out
    }

    /// Visit support points by increasing distance of their subtree to `base`,
    /// accumulating `term(index, distance)` over points in `include \ exclude`.
    /// Stops as soon as the running sum reaches `stop_at` and reports whether
    /// it did. The partial sum is a lower bound for the full sum when terms are
    /// nonnegative.
    pub fn nearest_first_sum<F: FnMut(usize, f64) -> f64>(
        &self,
        base: &Point,
        include: &Region,
        exclude: &Region,
        stop_at: f64,
        mut term: F,
    ) -> (f64, bool) {
        if self.nodes.is_empty() {
            return (0.0, false);
        }
        let mut sum = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Pending {
            dist: self.box_distance(base, 0),
            id: 0,
        });
        while let Some(Pending { id, .. }) = heap.pop() {
            let n = &self.nodes[id];
            if include.misses_box(&n.lo, &n.hi) || exclude.contains_box(&n.lo, &n.hi) {
                continue;
            }
            if n.left == 0 {
                for k in n.start as usize..n.end as usize {
                    let p = Point::from_array(self.dim, self.coords[k]);
                    if include.contains_point(&p) && !exclude.contains_point(&p) {
                        sum += term(self.order[k] as usize, base.dist(&p));
                        if sum >= stop_at {
                            return (sum, true);
                        }
                    }
                }
            } else {
                for child in [n.left as usize, n.right as usize] {
                    heap.push(Pending {
                        dist: self.box_distance(base, child),
                        id: child,
                    });
                }
            }
        }
        (sum, false)
    }

    fn box_distance(&self, base: &Point, id: usize) -> f64 {
        let n = &self.nodes[id];
        let mut near = *base.raw();
        for (i, v) in near.iter_mut().enumerate().take(self.dim) {
            *v = v.clamp(n.lo[i], n.hi[i]);
        }
        base.dist(&Point::from_array(self.dim, near))
    }

    /// Distance from support point `i` to the nearest other support point.
    pub fn nearest_other(&self, points: &[Point], i: usize) -> f64 {
        let base = points[i];
        let mut best = f64::INFINITY;
        let mut heap = BinaryHeap::new();
        heap.push(Pending {
            dist: self.box_distance(&base, 0),
            id: 0,
        });
        while let Some(Pending { dist, id }) = heap.pop() {
            if dist >= best {
                break;
            }
            let n = &self.nodes[id];
            if n.left == 0 {
                for k in n.start as usize..n.end as usize {
                    if self.order[k] as usize != i {
                        best = best.min(base.dist(&Point::from_array(self.dim, self.coords[k])));
                    }
                }
            } else {
                for child in [n.left as usize, n.right as usize] {
                    heap.push(Pending {
                        dist: self.box_distance(&base, child),
                        id: child,
                    });
                }
            }
        }
        best
    }
}

#[derive(PartialEq)]
struct Pending {
    dist: f64,
    id: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node id for determinism
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn build(
    points: &[Point],
    order: &mut [u32],
    start: usize,
    end: usize,
    dim: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut lo = [f64::INFINITY; MAX_DIM];
    let mut hi = [f64::NEG_INFINITY; MAX_DIM];
    for &i in &order[start..end] {
        let c = points[i as usize].raw();
        for a in 0..dim {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    for a in dim..MAX_DIM {
        lo[a] = 0.0;
        hi[a] = 0.0;
    }
    let id = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        start: start as u32,
        end: end as u32,
        left: 0,
        right: 0,
        mass: 0,
    });
    if end - start <= LEAF_SIZE {
        return id as u32;
    }
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points[a as usize].raw()[axis]
            .total_cmp(&points[b as usize].raw()[axis])
            .then(a.cmp(&b))
    });
    let left = build(points, order, start, mid, dim, nodes);
    let right = build(points, order, mid, end, dim, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
    id as u32
}
