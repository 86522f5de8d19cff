//! Convex hulls of small 3-D point sets, in both vertex and half-space form.
//!
//! Sets here are tiny (at most a few dozen points), so full-dimensional hulls enumerate
//! candidate facets over point triples instead of running an incremental algorithm.

use nalgebra::{Matrix3, Vector2, Vector3};

/// Half-space `normal · x ≤ offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    pub vertices: Vec<Vector3<f64>>,
    /// Bounding half-spaces; for flat hulls this includes the two opposite planes of the
    /// supporting plane (and their analogues for segments and points).
    pub halfspaces: Vec<HalfSpace>,
    /// Affine dimension of the point set (0 to 3).
    pub dimension: usize,
}

impl ConvexHull {
    /// Largest signed distance to the bounding half-spaces: `≤ 0` inside, `> 0` outside.
    /// For flat hulls it is exact only for points on the supporting subspace; off it the
    /// value is still positive.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    /// Volume of a full-dimensional hull (zero for flat ones), by fan triangulation from
    /// the centroid over facet polygons.
    pub fn volume(&self) -> f64 {
        if self.dimension < 3 {
            return 0.0;
        }
        let c = self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64;
        let scale = self.scale();
        let mut vol = 0.0;
        for h in &self.halfspaces {
            // facet polygon: vertices on the plane, ordered by angle around their centroid
            let on: Vec<Vector3<f64>> = self
                .vertices
                .iter()
                .filter(|v| h.signed_distance(v).abs() <= 1e-9 * scale)
                .copied()
                .collect();
            if on.len() < 3 {
                continue;
            }
            let fc = on.iter().sum::<Vector3<f64>>() / on.len() as f64;
            let (e1, e2) = plane_basis(&h.normal);
            let mut ordered = on.clone();
            ordered.sort_by(|a, b| {
                let aa = (a - fc).dot(&e2).atan2((a - fc).dot(&e1));
                let bb = (b - fc).dot(&e2).atan2((b - fc).dot(&e1));
                aa.total_cmp(&bb)
            });
            let height = h.offset - h.normal.dot(&c);
            let mut area = 0.0;
            for k in 0..ordered.len() {
                let a = ordered[k] - fc;
                let b = ordered[(k + 1) % ordered.len()] - fc;
                area += 0.5 * a.cross(&b).dot(&h.normal);
            }
            vol += area.abs() * height / 3.0;
        }
        vol
    }

    fn scale(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.amax())
            .fold(1.0, f64::max)
    }
}

fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn cross2(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain; returns indices of the hull in counter-clockwise order.
fn hull_2d(pts: &[Vector2<f64>], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|a, b| pts[*a].x.total_cmp(&pts[*b].x).then(pts[*a].y.total_cmp(&pts[*b].y)));
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross2(&pts[lower[lower.len() - 2]], &pts[lower[lower.len() - 1]], &pts[i]) <= tol {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross2(&pts[upper[upper.len() - 2]], &pts[upper[upper.len() - 1]], &pts[i]) <= tol {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Hull of `points`. Duplicates and interior points are dropped from the vertex list.
pub fn convex_hull(points: &[Vector3<f64>]) -> ConvexHull {
    assert!(!points.is_empty(), "convex hull of an empty set");
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !pts.iter().any(|q| (q - p).amax() <= tol) {
            pts.push(*p);
        }
    }
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let axes: Vec<Vector3<f64>> = order.iter().map(|k| eig.eigenvectors.column(*k).into_owned()).collect();
    let extent = |axis: &Vector3<f64>| {
        let proj = pts.iter().map(|p| axis.dot(&(p - centroid)));
        let (lo, hi) = proj.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        hi - lo
    };
    let dimension = axes.iter().take_while(|a| extent(a) > 1e3 * tol).count();

    let mut halfspaces = Vec::new();
    let flat_planes = |halfspaces: &mut Vec<HalfSpace>, axes: &[Vector3<f64>]| {
        for a in axes {
            let off = a.dot(&centroid);
            halfspaces.push(HalfSpace { normal: *a, offset: off });
            halfspaces.push(HalfSpace { normal: -a, offset: -off });
        }
    };
    match dimension {
        0 => {
            flat_planes(&mut halfspaces, &[Vector3::x(), Vector3::y(), Vector3::z()]);
            ConvexHull {
                vertices: vec![centroid],
                halfspaces,
                dimension,
            }
        }
        1 => {
            let a = axes[0];
            let (imin, imax) = extreme_indices(&pts, &a);
            halfspaces.push(HalfSpace {
                normal: a,
                offset: a.dot(&pts[imax]),
            });
            halfspaces.push(HalfSpace {
                normal: -a,
                offset: -a.dot(&pts[imin]),
            });
            flat_planes(&mut halfspaces, &axes[1..]);
            ConvexHull {
                vertices: vec![pts[imin], pts[imax]],
                halfspaces,
                dimension,
            }
        }
        2 => {
            let (e1, e2, n) = (axes[0], axes[1], axes[2]);
            let p2: Vec<Vector2<f64>> = pts
                .iter()
                .map(|p| Vector2::new(e1.dot(&(p - centroid)), e2.dot(&(p - centroid))))
                .collect();
            let ring = hull_2d(&p2, tol * tol);
            for k in 0..ring.len() {
                let (a, b) = (p2[ring[k]], p2[ring[(k + 1) % ring.len()]]);
                let edge = b - a;
                // counter-clockwise ring: outward normal is the edge rotated clockwise
                let out2 = Vector2::new(edge.y, -edge.x).normalize();
                let normal = e1 * out2.x + e2 * out2.y;
                halfspaces.push(HalfSpace {
                    normal,
                    offset: normal.dot(&pts[ring[k]]),
                });
            }
            flat_planes(&mut halfspaces, &[n]);
            ConvexHull {
                vertices: ring.iter().map(|i| pts[*i]).collect(),
                halfspaces,
                dimension,
            }
        }
        _ => hull_3d(&pts, tol),
    }
}

fn extreme_indices(pts: &[Vector3<f64>], axis: &Vector3<f64>) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, p) in pts.iter().enumerate() {
        if axis.dot(p) < axis.dot(&pts[imin]) {
            imin = i;
        }
        if axis.dot(p) > axis.dot(&pts[imax]) {
            imax = i;
        }
    }
    (imin, imax)
}

fn hull_3d(pts: &[Vector3<f64>], tol: f64) -> ConvexHull {
    let n = pts.len();
    let mut halfspaces: Vec<HalfSpace> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let raw = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                let len = raw.norm();
                if len <= tol {
                    continue;
                }
                let mut normal = raw / len;
                let mut offset = normal.dot(&pts[i]);
                let mut above = false;
                let mut below = false;
                for p in pts {
                    let s = normal.dot(p) - offset;
                    above |= s > tol;
                    below |= s < -tol;
                    if above && below {
                        break;
                    }
                }
                if above && below {
                    continue;
                }
                if above {
                    normal = -normal;
                    offset = -offset;
                }
                let duplicate = halfspaces
                    .iter()
                    .any(|h| (h.normal - normal).amax() < 1e-9 && (h.offset - offset).abs() <= tol);
                if !duplicate {
                    halfspaces.push(HalfSpace { normal, offset });
                }
            }
        }
    }
    let vertices = pts
        .iter()
        .filter(|p| {
            let mut m = Matrix3::zeros();
            for h in halfspaces.iter().filter(|h| h.signed_distance(p).abs() <= tol) {
                m += h.normal * h.normal.transpose();
            }
            m.symmetric_eigen().eigenvalues.min() > 1e-9
        })
        .copied()
        .collect();
    ConvexHull {
        vertices,
        halfspaces,
        dimension: 3,
    }
}
