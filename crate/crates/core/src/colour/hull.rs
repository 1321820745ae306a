//! Incremental 3D quickhull returning the indices of hull vertices.

use std::collections::HashMap;

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degenerate;

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vector3<f64>], v: [usize; 3]) -> Face {
        let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Face {
            v,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        [(self.v[0], self.v[1]), (self.v[1], self.v[2]), (self.v[2], self.v[0])]
    }
}

/// Sorted indices of the points that are vertices of the convex hull.
///
/// Points within a scale-relative tolerance of a face are treated as inside.
/// Fails when the points do not span three dimensions.
pub fn hull_vertices(points: &[Vector3<f64>]) -> Result<Vec<usize>, Degenerate> {
    if points.len() < 4 {
        return Err(Degenerate);
    }
    let scale: f64 = (0..3)
        .map(|a| points.iter().map(|p| p[a].abs()).fold(0.0, f64::max))
        .sum();
    let eps = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    // Initial simplex from extreme points.
    let mut extremes = Vec::with_capacity(6);
    for a in 0..3 {
        let lo = (0..points.len()).min_by(|&i, &j| points[i][a].total_cmp(&points[j][a])).unwrap();
        let hi = (0..points.len()).max_by(|&i, &j| points[i][a].total_cmp(&points[j][a])).unwrap();
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (0, 0, -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm_squared();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i0, i1) = (best.0, best.1);
    if best.2.sqrt() <= eps {
        return Err(Degenerate);
    }
    let dir = (points[i1] - points[i0]).normalize();
    let line_dist = |p: &Vector3<f64>| {
        let d = p - points[i0];
        (d - dir * d.dot(&dir)).norm()
    };
    let i2 = (0..points.len())
        .max_by(|&i, &j| line_dist(&points[i]).total_cmp(&line_dist(&points[j])))
        .unwrap();
    if line_dist(&points[i2]) <= eps {
        return Err(Degenerate);
    }
    let plane_n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let plane_dist = |p: &Vector3<f64>| plane_n.dot(&(p - points[i0]));
    let i3 = (0..points.len())
        .max_by(|&i, &j| plane_dist(&points[i]).abs().total_cmp(&plane_dist(&points[j]).abs()))
        .unwrap();
    if plane_dist(&points[i3]).abs() <= eps {
        return Err(Degenerate);
    }

    let mut faces: Vec<Face> = Vec::new();
    let mut edge_face: HashMap<(usize, usize), usize> = HashMap::new();
    let centroid = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = Face::new(points, tri);
        if f.distance(&centroid) > 0.0 {
            f = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        let id = faces.len();
        for e in f.edges() {
            edge_face.insert(e, id);
        }
        faces.push(f);
    }
    for (i, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(i);
        }
    }

    let mut pending: Vec<usize> = (0..faces.len()).collect();
    let mut visible = Vec::new();
    let mut horizon = Vec::new();
    let mut stack = Vec::new();
    let mut visited: HashMap<usize, bool> = HashMap::new();
    while let Some(fid) = pending.pop() {
        if !faces[fid].alive || faces[fid].outside.is_empty() {
            continue;
        }
        let eye = *faces[fid]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[fid]
                    .distance(&points[a])
                    .total_cmp(&faces[fid].distance(&points[b]))
                    .then(b.cmp(&a))
            })
            .unwrap();
        let eye_p = points[eye];

        visible.clear();
        horizon.clear();
        visited.clear();
        stack.clear();
        stack.push(fid);
        visited.insert(fid, true);
        while let Some(f) = stack.pop() {
            visible.push(f);
            for (a, b) in faces[f].edges() {
                let Some(&nb) = edge_face.get(&(b, a)) else {
                    continue;
                };
                match visited.get(&nb) {
                    Some(true) => {}
                    Some(false) => horizon.push((a, b)),
                    None => {
                        if faces[nb].alive && faces[nb].distance(&eye_p) > eps {
                            visited.insert(nb, true);
                            stack.push(nb);
                        } else {
                            visited.insert(nb, false);
                            horizon.push((a, b));
                        }
                    }
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            for e in faces[f].edges() {
                if edge_face.get(&e) == Some(&f) {
                    edge_face.remove(&e);
                }
            }
            orphans.append(&mut faces[f].outside);
        }
        let first_new = faces.len();
        for &(a, b) in &horizon {
            let face = Face::new(points, [a, b, eye]);
            let id = faces.len();
            for e in face.edges() {
                edge_face.insert(e, id);
            }
            faces.push(face);
        }
        for o in orphans {
            if o == eye {
                continue;
            }
            if let Some(f) = faces[first_new..].iter_mut().find(|f| f.distance(&points[o]) > eps) {
                f.outside.push(o);
            }
        }
        pending.extend(first_new..faces.len());
    }

    let mut verts: Vec<usize> = faces
        .iter()
        .filter(|f| f.alive)
        .flat_map(|f| f.v)
        .collect();
    verts.sort_unstable();
    verts.dedup();
    Ok(verts)
}
