//! Parametric objects resting on the seabed, each described by the height of
//! its upper surface over the horizontal plane.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::cloud::Rgb;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    /// Horizontal cylinder.
    Pipe {
        centre: [f64; 2],
        heading: f64,
        length: f64,
        radius: f64,
        axis_z: f64,
    },
    /// Box with vertical walls and a flat top.
    Block {
        centre: [f64; 2],
        heading: f64,
        /// Along-heading, across-heading, height.
        size: [f64; 3],
        base_z: f64,
    },
    /// Upper half of a sphere centred at `base_z`.
    Dome {
        centre: [f64; 2],
        radius: f64,
        base_z: f64,
    },
}

impl Primitive {
    /// Coordinates in the primitive's heading frame.
    fn local(centre: &[f64; 2], heading: f64, x: f64, y: f64) -> Vector2<f64> {
        let (s, c) = heading.sin_cos();
        let (dx, dy) = (x - centre[0], y - centre[1]);
        Vector2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Height of the upper surface above `(x, y)`, if the footprint covers it.
    pub fn height(&self, x: f64, y: f64) -> Option<f64> {
        match *self {
            Primitive::Pipe {
                centre,
                heading,
                length,
                radius,
                axis_z,
            } => {
                let l = Self::local(&centre, heading, x, y);
                (l.x.abs() <= length / 2.0 && l.y.abs() < radius).then(|| axis_z + (radius * radius - l.y * l.y).sqrt())
            }
            Primitive::Block {
                centre,
                heading,
                size,
                base_z,
            } => {
                let l = Self::local(&centre, heading, x, y);
                (l.x.abs() <= size[0] / 2.0 && l.y.abs() <= size[1] / 2.0).then_some(base_z + size[2])
            }
            Primitive::Dome { centre, radius, base_z } => {
                let d2 = (x - centre[0]).powi(2) + (y - centre[1]).powi(2);
                (d2 < radius * radius).then(|| base_z + (radius * radius - d2).sqrt())
            }
        }
    }

    pub fn top(&self) -> f64 {
        match *self {
            Primitive::Pipe { radius, axis_z, .. } => axis_z + radius,
            Primitive::Block { size, base_z, .. } => base_z + size[2],
            Primitive::Dome { radius, base_z, .. } => base_z + radius,
        }
    }

    pub fn albedo(&self) -> Rgb {
        match self {
            Primitive::Pipe { .. } => [0.85, 0.45, 0.15],
            Primitive::Block { .. } => [0.35, 0.25, 0.2],
            Primitive::Dome { .. } => [0.45, 0.45, 0.5],
        }
    }
}
