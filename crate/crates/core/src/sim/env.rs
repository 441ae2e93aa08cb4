use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub position: [f64; 3],
    pub radius: f64,
}

/// A drawer on a 1-DoF prismatic joint. `axis` points in the opening
/// direction; the opening `s` is measured along it from the closed position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawerSpec {
    /// Centre of the front panel when fully closed.
    pub closed_front: [f64; 3],
    pub axis: [f64; 3],
    pub width: f64,
    pub panel_height: f64,
    pub initial_opening: f64,
    pub max_opening: f64,
    /// Constant force opposing closing (N).
    pub resistance: f64,
    /// Viscous damping of the slide (N·s/m).
    pub damping: f64,
}

impl DrawerSpec {
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.axis).normalize()
    }

    pub fn closed_front(&self) -> Vector3<f64> {
        Vector3::from(self.closed_front)
    }

    fn lateral_axis(&self) -> Vector3<f64> {
        Vector3::z().cross(&self.axis()).normalize()
    }

    /// Decomposes `p` into (along-axis, lateral, vertical) drawer coordinates.
    pub fn local(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        let r = p - self.closed_front();
        (r.dot(&self.axis()), r.dot(&self.lateral_axis()), r.z)
    }

    pub fn front_center(&self, opening: f64) -> Vector3<f64> {
        self.closed_front() + self.axis() * opening
    }

    /// Centre of the exposed interior at the rim height.
    pub fn interior_center(&self, opening: f64) -> Vector3<f64> {
        self.closed_front() + self.axis() * (0.5 * opening)
            + Vector3::z() * (0.5 * self.panel_height)
    }

    pub fn within_panel(&self, lateral: f64, vertical: f64) -> bool {
        lateral.abs() <= 0.5 * self.width && vertical.abs() <= 0.5 * self.panel_height
    }

    /// Whether `p` lies over the exposed part of the open drawer.
    pub fn over_interior(&self, p: &Vector3<f64>, opening: f64) -> bool {
        let (u, l, v) = self.local(p);
        u >= 0.0 && u <= opening && l.abs() <= 0.5 * self.width && v > -0.5 * self.panel_height
    }
}

/// Objects the robot interacts with during a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentScript {
    pub ball: BallSpec,
    pub drawer: DrawerSpec,
    /// Maximum tool-to-ball distance for a grasp to take (m).
    pub grasp_radius: f64,
    /// Base position from which the drawer is comfortably reachable.
    pub approach: [f64; 2],
}

impl Default for EnvironmentScript {
    fn default() -> Self {
        Self {
            ball: BallSpec {
                position: [0.62, 0.18, 0.55],
                radius: 0.03,
            },
            drawer: DrawerSpec {
                closed_front: [3.0, 0.4, 0.5],
                axis: [-1.0, 0.0, 0.0],
                width: 0.4,
                panel_height: 0.2,
                initial_opening: 0.2,
                max_opening: 0.3,
                resistance: 15.0,
                damping: 100.0,
            },
            grasp_radius: 0.03,
            approach: [2.15, 0.4],
        }
    }
}
