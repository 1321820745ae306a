//! Repeatable local reference frame from a distance-weighted scatter matrix.

use nalgebra::{Matrix3, Vector3};

use crate::cloud::{sorted_eigen, Neighbour};

/// Rows are the x, y, z axes. `x` is the principal direction, `z` the
/// least-variance direction; each sign points toward the majority of the
/// neighbours, with the sum of projections breaking count ties. When a
/// surface normal is given, `z` takes its sign instead. `None` when the
/// scatter is degenerate.
pub fn local_reference_frame(
    points: &[Vector3<f64>],
    centre: &Vector3<f64>,
    neighbours: &[Neighbour],
    radius: f64,
    normal: Option<&Vector3<f64>>,
) -> Option<Matrix3<f64>> {
    let mut m = Matrix3::zeros();
    let mut wsum = 0.0;
    for nb in neighbours {
        let d = points[nb.index] - centre;
        let w = radius - nb.distance();
        if w <= 0.0 {
            continue;
        }
        m += w * d * d.transpose();
        wsum += w;
    }
    if wsum <= 0.0 {
        return None;
    }
    m /= wsum;
    let (vals, vecs) = sorted_eigen(m);
    if !(vals[0] > 0.0) || vals[1] <= 1e-12 * vals[0] {
        return None;
    }
    let orient = |axis: Vector3<f64>| {
        let (mut pos, mut neg, mut sum) = (0usize, 0usize, 0.0);
        for nb in neighbours {
            let p = (points[nb.index] - centre).dot(&axis);
            sum += p;
            if p > 0.0 {
                pos += 1;
            } else if p < 0.0 {
                neg += 1;
            }
        }
        if neg > pos || (neg == pos && sum < 0.0) {
            -axis
        } else {
            axis
        }
    };
    let x = orient(vecs[0]);
    let z = match normal {
        Some(n) if vecs[2].dot(n) < 0.0 => -vecs[2],
        Some(_) => vecs[2],
        None => orient(vecs[2]),
    };
    let y = z.cross(&x);
    Some(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
}
