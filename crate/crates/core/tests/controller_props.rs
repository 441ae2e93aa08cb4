mod common;

use mcr_core::config::StackConfig;
use mcr_core::controller::{resolve_velocity, weighting_matrix, DynamicsModel, PriorityWeights};
use mcr_core::kinematics::{pose_error, whole_body_jacobian, ArmModel, Jacobian, Pose};
use nalgebra::{SymmetricEigen, Vector3, Vector6};
use proptest::prelude::*;

use common::{random_state, rng, Rig};

fn eta() -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_map(|e| 10f64.powf(e))
}

fn jacobian_at(seed: u64) -> Jacobian {
    let arm = ArmModel::default();
    let s = random_state(&mut rng(seed), &arm);
    whole_body_jacobian(&s, &arm).unwrap()
}

fn twist() -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(-0.5..0.5f64).prop_map(Vector6::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weighting_is_spd(eta_arm in eta(), eta_base in eta()) {
        let w = weighting_matrix(&DynamicsModel::default(), &PriorityWeights::new(eta_arm, eta_base).unwrap()).unwrap();
        prop_assert_eq!(w, w.transpose());
        let eig = SymmetricEigen::new(w).eigenvalues;
        prop_assert!(eig.iter().all(|l| *l > 0.0), "{eig:?}");
    }

    // The resolution minimizes q̇ᵀWq̇ plus the damped residual, and the base
    // block of W is η_B² M_v⁻¹, so the guaranteed monotone quantity is the
    // M_v⁻¹-weighted base speed.
    #[test]
    fn raising_base_weight_never_speeds_the_base(seed in any::<u64>(), x in twist(), e1 in eta(), e2 in eta()) {
        let j = jacobian_at(seed);
        let d = DynamicsModel::default();
        let m_inv = d.base_inertia.try_inverse().unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let solve = |eta_base: f64| {
            let w = weighting_matrix(&d, &PriorityWeights::new(1.0, eta_base).unwrap()).unwrap();
            let v = resolve_velocity(&j, &x, &w, 1e-3).unwrap().fixed_rows::<3>(0).into_owned();
            v.dot(&(m_inv * v)).sqrt()
        };
        let (slow, fast) = (solve(hi), solve(lo));
        prop_assert!(slow <= fast * (1.0 + 1e-9) + 1e-15, "{slow} > {fast}");
    }

    // With an isotropic base inertia the weighted and plain norms coincide.
    #[test]
    fn isotropic_base_speed_is_monotone(seed in any::<u64>(), x in twist(), e1 in eta(), e2 in eta()) {
        let j = jacobian_at(seed);
        let d = DynamicsModel {
            base_inertia: nalgebra::Matrix3::identity() * 20.0,
            ..DynamicsModel::default()
        };
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let solve = |eta_base: f64| {
            let w = weighting_matrix(&d, &PriorityWeights::new(1.0, eta_base).unwrap()).unwrap();
            resolve_velocity(&j, &x, &w, 1e-3).unwrap().fixed_rows::<3>(0).norm()
        };
        let (slow, fast) = (solve(hi), solve(lo));
        prop_assert!(slow <= fast * (1.0 + 1e-9) + 1e-15, "{slow} > {fast}");
    }

    #[test]
    fn uniform_weight_scaling_is_invisible_without_damping(seed in any::<u64>(), x in twist(), c in eta()) {
        let j = jacobian_at(seed);
        let d = DynamicsModel::default();
        let base = PriorityWeights::new(1.0, 100.0).unwrap();
        let scaled = PriorityWeights::new(c, 100.0 * c).unwrap();
        let a = resolve_velocity(&j, &x, &weighting_matrix(&d, &base).unwrap(), 0.0).unwrap();
        let b = resolve_velocity(&j, &x, &weighting_matrix(&d, &scaled).unwrap(), 0.0).unwrap();
        prop_assert!((a - b).amax() <= 1e-9 * a.amax().max(1.0), "{:e}", (a - b).amax());
    }

    #[test]
    fn undamped_solve_reproduces_the_twist(seed in any::<u64>(), x in twist(), eta_base in eta()) {
        let j = jacobian_at(seed);
        let w = weighting_matrix(&DynamicsModel::default(), &PriorityWeights::new(1.0, eta_base).unwrap()).unwrap();
        let qd = resolve_velocity(&j, &x, &w, 0.0).unwrap();
        prop_assert!((j * qd - x).norm() < 1e-8, "{:e}", (j * qd - x).norm());
    }
}

#[test]
fn closed_loop_converges_to_reachable_targets() {
    let config = StackConfig::default();
    let offsets = [
        (Vector3::new(0.1, 0.0, 0.0), 0.0),
        (Vector3::new(0.0, -0.15, 0.05), 0.3),
        (Vector3::new(-0.05, 0.1, -0.1), -0.4),
        (Vector3::new(0.4, 0.3, 0.0), 0.8),
    ];
    let weights = PriorityWeights::manipulation();
    for (dp, yaw) in offsets {
        let mut rig = Rig::new(&config);
        let start = rig.ee();
        let target = Pose::new(
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * start.rotation,
            start.translation + dp,
        );
        let mut errors = Vec::new();
        for _ in 0..1000 {
            rig.tick(&target, &weights);
            let e = pose_error(&target, &rig.ee());
            errors.push((e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm()));
        }
        let (et, er) = *errors.last().unwrap();
        assert!(et < 1e-3 && er < 1e-3, "{dp:?} {yaw}: {et:e} m {er:e} rad");
        // After the transient the combined error only shrinks.
        let combined: Vec<f64> = errors.iter().map(|(t, r)| t + r).collect();
        let settled = combined.len() / 2;
        assert!(
            combined[settled..].windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{dp:?} {yaw}: error not monotone after transient"
        );
    }
}
