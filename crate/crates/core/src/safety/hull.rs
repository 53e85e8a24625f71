//! Incremental 3D quickhull and the convex fence built from it.

use super::SafetyError;
use crate::geometry::Vec3;

/// Planar face of the hull. Triangles sharing a plane are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFace {
    /// Triangles as indices into `FenceHull::vertices`, counter-clockwise seen
    /// from outside.
    pub triangles: Vec<[usize; 3]>,
    /// Outward unit normal.
    pub normal: Vec3,
    /// Plane offset: `normal . x = offset` on the face.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FenceHull {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<HullFace>,
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    n: Vec3,
    d: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Tri {
    fn new(pts: &[Vec3], v: [usize; 3]) -> Self {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]])).normalize();
        Self { v, n, d: n.dot(&pts[v[0]]), outside: Vec::new(), alive: true }
    }

    fn dist(&self, p: &Vec3) -> f64 {
        self.n.dot(p) - self.d
    }
}

/// Convex hull of a point cloud. Needs at least four non-coplanar points.
pub fn quickhull3(points: &[Vec3]) -> Result<FenceHull, SafetyError> {
    if points.len() < 4 {
        return Err(SafetyError::DegenerateHull("fewer than 4 points".into()));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(SafetyError::DegenerateHull("non-finite point".into()));
    }
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let eps = 1e-10 * scale;

    // initial simplex from axis extremes
    let mut ext = Vec::new();
    for axis in 0..3 {
        let lo = (0..points.len()).min_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis])).unwrap();
        let hi = (0..points.len()).max_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis])).unwrap();
        ext.push(lo);
        ext.push(hi);
    }
    let mut best = (0.0, 0, 0);
    for &i in &ext {
        for &j in &ext {
            let d = (points[i] - points[j]).norm();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (a, b) = (best.1, best.2);
    if best.0 <= eps {
        return Err(SafetyError::DegenerateHull("all points coincide".into()));
    }
    let ab = (points[b] - points[a]).normalize();
    let c = (0..points.len())
        .max_by(|&i, &j| {
            let di = (points[i] - points[a]).cross(&ab).norm();
            let dj = (points[j] - points[a]).cross(&ab).norm();
            di.total_cmp(&dj)
        })
        .unwrap();
    if (points[c] - points[a]).cross(&ab).norm() <= eps {
        return Err(SafetyError::DegenerateHull("points are collinear".into()));
    }
    let n = (points[b] - points[a]).cross(&(points[c] - points[a])).normalize();
    let d = (0..points.len())
        .max_by(|&i, &j| {
            let di = n.dot(&(points[i] - points[a])).abs();
            let dj = n.dot(&(points[j] - points[a])).abs();
            di.total_cmp(&dj)
        })
        .unwrap();
    if n.dot(&(points[d] - points[a])).abs() <= eps {
        return Err(SafetyError::DegenerateHull("points are coplanar".into()));
    }

    let inner = (points[a] + points[b] + points[c] + points[d]) / 4.0;
    let mut tris: Vec<Tri> = Vec::new();
    for f in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
        let mut t = Tri::new(points, f);
        if t.dist(&inner) > 0.0 {
            t = Tri::new(points, [f[0], f[2], f[1]]);
        }
        tris.push(t);
    }
    let simplex = [a, b, c, d];
    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        assign(&mut tris, 0..4, i, p, eps);
    }

    while let Some(fi) = tris.iter().position(|t| t.alive && !t.outside.is_empty()) {
        let eye = *tris[fi]
            .outside
            .iter()
            .max_by(|&&x, &&y| tris[fi].dist(&points[x]).total_cmp(&tris[fi].dist(&points[y])))
            .unwrap();
        let ep = points[eye];
        let visible: Vec<usize> = (0..tris.len()).filter(|&i| tris[i].alive && tris[i].dist(&ep) > eps).collect();
        // horizon: directed edges of visible faces whose twin is on a hidden face
        let mut edges = std::collections::BTreeSet::new();
        for &i in &visible {
            let v = tris[i].v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
        }
        let horizon: Vec<(usize, usize)> = edges.iter().filter(|(u, w)| !edges.contains(&(*w, *u))).copied().collect();
        let mut orphans = Vec::new();
        for &i in &visible {
            tris[i].alive = false;
            orphans.append(&mut tris[i].outside);
        }
        let first_new = tris.len();
        for (u, w) in horizon {
            tris.push(Tri::new(points, [u, w, eye]));
        }
        let end = tris.len();
        for o in orphans {
            if o != eye {
                assign(&mut tris, first_new..end, o, &points[o], eps);
            }
        }
    }

    Ok(build_fence(points, tris.into_iter().filter(|t| t.alive).collect()))
}

fn assign(tris: &mut [Tri], range: std::ops::Range<usize>, idx: usize, p: &Vec3, eps: f64) {
    let mut best: Option<(usize, f64)> = None;
    for i in range {
        let d = tris[i].dist(p);
        if d > eps && best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    if let Some((i, _)) = best {
        tris[i].outside.push(idx);
    }
}

fn build_fence(points: &[Vec3], tris: Vec<Tri>) -> FenceHull {
    let mut map = std::collections::BTreeMap::new();
    let mut vertices = Vec::new();
    let mut remap = |i: usize, vertices: &mut Vec<Vec3>| {
        *map.entry(i).or_insert_with(|| {
            vertices.push(points[i]);
            vertices.len() - 1
        })
    };
    let mut faces: Vec<HullFace> = Vec::new();
    for t in &tris {
        let v = [remap(t.v[0], &mut vertices), remap(t.v[1], &mut vertices), remap(t.v[2], &mut vertices)];
        let scale = t.d.abs().max(1.0);
        match faces.iter_mut().find(|f| (f.normal - t.n).norm() < 1e-9 && (f.offset - t.d).abs() < 1e-9 * scale) {
            Some(f) => f.triangles.push(v),
            None => faces.push(HullFace { triangles: vec![v], normal: t.n, offset: t.d }),
        }
    }
    FenceHull { vertices, faces }
}

impl FenceHull {
    /// Axis-aligned box.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Self, SafetyError> {
        let mut pts = Vec::new();
        for &x in &[min.x, max.x] {
            for &y in &[min.y, max.y] {
                for &z in &[min.z, max.z] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        quickhull3(&pts)
    }

    /// Largest signed plane distance; positive outside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.faces.iter().map(|f| f.normal.dot(p) - f.offset).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.signed_distance(p) <= 1e-9
    }

    pub fn triangle_count(&self) -> usize {
        self.faces.iter().map(|f| f.triangles.len()).sum()
    }

    pub fn volume(&self) -> f64 {
        let c = self.centroid();
        self.faces
            .iter()
            .flat_map(|f| f.triangles.iter())
            .map(|t| {
                let (a, b, d) = (self.vertices[t[0]] - c, self.vertices[t[1]] - c, self.vertices[t[2]] - c);
                a.dot(&b.cross(&d)) / 6.0
            })
            .sum()
    }

    /// Mean of the hull vertices (an interior point, not the volume centroid).
    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Closest point on a face polygon and its distance.
    pub fn face_distance(&self, face: &HullFace, p: &Vec3) -> (Vec3, f64) {
        face.triangles
            .iter()
            .map(|t| {
                let q = closest_on_triangle(p, &self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]);
                (q, (p - q).norm())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

/// Closest point to `p` on triangle `abc`.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
