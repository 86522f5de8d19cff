//! Static 3-d tree for fixed-radius neighbor queries.

use nalgebra::Vector3;

/// Balanced k-d tree over a borrowed point slice. The tree is an index permutation:
/// the median of every sub-range is its node, split along `depth % 3`.
pub struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        Self::build_range(points, &mut order, 0);
        Self { points, order }
    }

    fn build_range(points: &[Vector3<f64>], order: &mut [usize], depth: usize) {
        if order.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |a, b| points[*a][axis].total_cmp(&points[*b][axis]));
        let (left, right) = order.split_at_mut(mid);
        Self::build_range(points, left, depth + 1);
        Self::build_range(points, &mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Indices of all points within `radius` (inclusive) of `center`.
    pub fn within(&self, center: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.search(0, self.order.len(), 0, center, radius, &mut out);
        out
    }

    fn search(&self, lo: usize, hi: usize, depth: usize, c: &Vector3<f64>, r: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        if (p - c).norm_squared() <= r * r {
            out.push(idx);
        }
        let axis = depth % 3;
        let diff = c[axis] - p[axis];
        // points equal to the split value can sit on either side after selection
        if diff <= r {
            self.search(lo, mid, depth + 1, c, r, out);
        }
        if diff >= -r {
            self.search(mid + 1, hi, depth + 1, c, r, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 1 + trial * 25;
            // quantized coordinates produce many ties on the split axis
            let pts: Vec<Vector3<f64>> = (0..n)
                .map(|_| {
                    Vector3::new(
                        (rng.gen_range(0..6) as f64) * 0.5,
                        rng.gen_range(-2.0..2.0),
                        if trial % 2 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) },
                    )
                })
                .collect();
            let tree = KdTree::build(&pts);
            assert_eq!(tree.len(), n);
            for _ in 0..20 {
                let c = pts[rng.gen_range(0..n)];
                let r = rng.gen_range(0.0..1.5);
                let mut got = tree.within(&c, r);
                got.sort_unstable();
                let want: Vec<usize> = (0..n).filter(|i| (pts[*i] - c).norm() <= r).collect();
                assert_eq!(got, want);
            }
        }
    }
}
