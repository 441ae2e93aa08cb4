use nalgebra::{Matrix3, Vector3};

/// One semi-implicit Euler step of the planar base admittance
/// `M v̇ + D v = F`:
/// `v⁺ = (M + dt·D)⁻¹ (M v + dt·F)`.
///
/// `wrench` holds `(F_x, F_y, τ_yaw)`; `velocity` is `(ẋ, ẏ, ψ̇)` in the world
/// frame.
pub fn admittance_step(
    wrench: &Vector3<f64>,
    velocity: &Vector3<f64>,
    inertia: &Matrix3<f64>,
    damping: &Matrix3<f64>,
    dt: f64,
) -> Vector3<f64> {
    debug_assert!(dt > 0.0 && dt <= 0.05, "admittance step {dt} outside (0, 0.05]");
    let lhs = inertia + damping * dt;
    let rhs = inertia * velocity + wrench * dt;
    lhs.lu().solve(&rhs).unwrap_or_else(Vector3::zeros)
}

/// Kinetic energy `½ vᵀ M v` of the virtual base.
pub fn kinetic_energy(velocity: &Vector3<f64>, inertia: &Matrix3<f64>) -> f64 {
    0.5 * velocity.dot(&(inertia * velocity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    #[test]
    fn rest_stays_at_rest() {
        let v = admittance_step(
            &Vector3::zeros(),
            &Vector3::zeros(),
            &diag(20.0, 20.0, 4.0),
            &diag(40.0, 40.0, 8.0),
            0.002,
        );
        assert_eq!(v, Vector3::zeros());
    }

    #[test]
    fn free_decay_after_five_time_constants() {
        let (m, d, dt) = (diag(20.0, 20.0, 4.0), diag(40.0, 40.0, 8.0), 0.002);
        let v0 = Vector3::new(1.0, -0.5, 0.3);
        let mut v = v0;
        let steps = (5.0 * 0.5 / dt) as usize;
        for _ in 0..steps {
            v = admittance_step(&Vector3::zeros(), &v, &m, &d, dt);
        }
        assert!(v.norm() < 0.01 * v0.norm());
    }

    #[test]
    fn constant_force_reaches_f_over_d() {
        let (m, d, dt) = (diag(20.0, 20.0, 4.0), diag(40.0, 40.0, 8.0), 0.002);
        let f = Vector3::new(10.0, 0.0, 0.0);
        let mut v = Vector3::zeros();
        for _ in 0..(2.5 / dt) as usize {
            v = admittance_step(&f, &v, &m, &d, dt);
        }
        assert!((v.x - 0.25).abs() / 0.25 < 0.01);
    }
}
