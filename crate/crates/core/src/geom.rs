//! Small fixed-convention linear algebra used across the pipeline.
//!
//! Conventions, pinned once here:
//! * world frame: right-handed, `z` up, meters;
//! * camera frame: `x` right, `y` down, `z` forward (optical axis);
//! * image: origin top-left, `u` right, `v` down, pixel centers at
//!   integer + 0.5.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn v2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

pub fn v3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        v2(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        v2(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        v2(self.x * s, self.y * s)
    }
}

impl Vec2 {
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product of two plane vectors.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        v2(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular (left normal).
    pub fn perp(self) -> Vec2 {
        v2(-self.y, self.x)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        v3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        v3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        v3(self.x * s, self.y * s, self.z * s)
    }
}

impl Vec3 {
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        v3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        v3(self.x / n, self.y / n, self.z / n)
    }
}

/// Rigid pose of a scene entity: translation plus rotation about the world
/// `z` axis. All scene motion (lane following, in-place rotation) is planar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3 { x: 0.0, y: 0.0, z: 0.0 },
        yaw: 0.0,
    };

    pub fn new(position: Vec3, yaw: f64) -> Pose {
        Pose { position, yaw }
    }

    /// Local → world.
    pub fn transform(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        v3(
            self.position.x + c * p.x - s * p.y,
            self.position.y + s * p.x + c * p.y,
            self.position.z + p.z,
        )
    }

    /// World → local.
    pub fn inverse_transform(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.position;
        v3(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }
}

/// Camera pose: position of the optical center and yaw of the horizontal
/// optical axis. The optical axis never pitches or rolls.
///
/// Camera basis in world coordinates for yaw `psi`:
/// right `x = (sin psi, -cos psi, 0)`, down `y = (0, 0, -1)`,
/// forward `z = (cos psi, sin psi, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl CameraPose {
    pub fn new(position: Vec3, yaw: f64) -> CameraPose {
        CameraPose { position, yaw }
    }

    /// World point → camera frame.
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.position;
        v3(s * d.x - c * d.y, -d.z, c * d.x + s * d.y)
    }

    /// Camera-frame point → world.
    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        v3(
            self.position.x + s * p.x + c * p.z,
            self.position.y - c * p.x + s * p.z,
            self.position.z - p.y,
        )
    }

    /// Unit forward (optical axis) direction in world coordinates.
    pub fn forward(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        v3(c, s, 0.0)
    }
}

/// Normalize an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
