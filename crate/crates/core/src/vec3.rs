//! Minimal 3-vector used for velocities and collision directions.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3(a)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3([self.0[0] / s, self.0[1] / s, self.0[2] / s])
    }
}

/// Direction on the unit sphere. Construction checks the norm and renormalizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec(Vec3);

/// Allowed deviation of |σ| from one before a direction is rejected.
pub const UNIT_TOLERANCE: f64 = 1e-12;

impl UnitVec {
    pub fn new(v: Vec3) -> Result<Self, NotUnit> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(NotUnit(n));
        }
        Ok(UnitVec(v / n))
    }

    /// Normalizes an arbitrary nonzero vector; `None` for zero or non-finite input.
    pub fn normalize(v: Vec3) -> Option<Self> {
        let n = v.norm();
        (n > 0.0 && n.is_finite()).then(|| UnitVec(v / n))
    }

    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl Neg for UnitVec {
    type Output = UnitVec;
    fn neg(self) -> UnitVec {
        UnitVec(-self.0)
    }
}

impl From<UnitVec> for Vec3 {
    fn from(u: UnitVec) -> Vec3 {
        u.0
    }
}

impl TryFrom<Vec3> for UnitVec {
    type Error = NotUnit;
    fn try_from(v: Vec3) -> Result<Self, NotUnit> {
        UnitVec::new(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("direction has norm {0}, expected 1")]
pub struct NotUnit(pub f64);
