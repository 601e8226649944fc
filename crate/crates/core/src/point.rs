use serde::{Deserialize, Serialize};

/// A point `(x, y, z, t)` of the chart together with a value for the move
/// parameter `s`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub s: f64,
}

impl Point4 {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        Point4 { x, y, z, t, s: 0.0 }
    }

    pub fn from_coords(c: [f64; 4], s: f64) -> Self {
        Point4 {
            x: c[0],
            y: c[1],
            z: c[2],
            t: c[3],
            s,
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.t]
    }

    pub(crate) fn values(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.t, self.s]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}
