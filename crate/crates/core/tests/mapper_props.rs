use std::f64::consts::PI;

use mcr_core::kinematics::Pose;
use mcr_core::mapper::{
    manipulation_reference, virtual_wrench, Axis, AxisLockState, LocomotionLimits, StiffnessParams,
};
use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;

fn limits() -> LocomotionLimits {
    LocomotionLimits::default()
}

fn stiffness() -> StiffnessParams {
    StiffnessParams::default()
}

fn displacement() -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(-2.0..2.0f64).prop_map(Vector6::from)
}

fn twist() -> impl Strategy<Value = Vector3<f64>> {
    prop_oneof![
        Just(Vector3::zeros()),
        prop::array::uniform3(-0.02..0.02f64).prop_map(Vector3::from),
        prop::array::uniform3(-1.0..1.0f64).prop_map(Vector3::from),
    ]
}

fn lock() -> impl Strategy<Value = AxisLockState> {
    (
        prop_oneof![Just(None), Just(Some(Axis::X)), Just(Some(Axis::Y)), Just(Some(Axis::Yaw))],
        any::<bool>(),
    )
        .prop_map(|(axis, engaged)| AxisLockState { axis, engaged })
}

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-5.0..5.0f64), prop::array::uniform3(-PI..PI))
        .prop_map(|(t, r)| Pose::from_rpy(Vector3::from(t), r[0], r[1], r[2]))
}

/// Stream of (displacement, base twist) pairs.
fn stream(max_planar: f64) -> impl Strategy<Value = Vec<(Vector6<f64>, Vector3<f64>)>> {
    prop::collection::vec(
        (
            (0.0..max_planar, -PI..PI, prop::array::uniform4(-1.0..1.0f64)),
            twist(),
        )
            .prop_map(|((r, heading, rest), v)| {
                let d = Vector6::new(r * heading.cos(), r * heading.sin(), rest[0], rest[1], rest[2], rest[3]);
                (d, v)
            }),
        1..120,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn wrench_is_saturated(d in displacement(), v in twist(), l in lock()) {
        let (k, lim) = (stiffness(), limits());
        let (w, _) = virtual_wrench(&d, &k, &lim, l, &v).unwrap();
        for i in 0..3 {
            prop_assert!(w.force[i].abs() <= k.linear[i] * lim.saturation);
            prop_assert!(w.torque[i].abs() <= k.rotational[i] * lim.saturation);
        }
    }

    #[test]
    fn at_most_one_channel(d in displacement(), v in twist(), l in lock()) {
        let (w, _) = virtual_wrench(&d, &stiffness(), &limits(), l, &v).unwrap();
        prop_assert!(w.to_vector().iter().filter(|c| **c != 0.0).count() <= 1);
    }

    #[test]
    fn silent_inside_the_dead_zone(s in stream(0.05)) {
        let mut l = AxisLockState::default();
        for (d, v) in s {
            let (w, next) = virtual_wrench(&d, &stiffness(), &limits(), l, &v).unwrap();
            prop_assert!(w.is_zero());
            l = next;
        }
    }

    #[test]
    fn axis_changes_only_at_rest(s in stream(0.5)) {
        let lim = limits();
        let mut l = AxisLockState::default();
        for (d, v) in s {
            let (_, next) = virtual_wrench(&d, &stiffness(), &lim, l, &v).unwrap();
            if l.axis.is_some() && next.axis != l.axis {
                prop_assert!(lim.is_stopped(&v), "switched {:?} -> {:?} at {v:?}", l.axis, next.axis);
            }
            l = next;
        }
    }

    #[test]
    fn unit_scale_replays_the_interface_delta(v0 in pose(), v in pose(), ee0 in pose()) {
        let target = manipulation_reference(&v0, &v, &ee0, 1.0).unwrap();
        let cmd = ee0.relative(&target);
        let want = v0.relative(&v);
        prop_assert!((cmd.translation - want.translation).norm() < 1e-12);
        prop_assert!(cmd.rotation.angle_to(&want.rotation) < 1e-12);
    }

    #[test]
    fn translation_scales_linearly(v0 in pose(), step in prop::array::uniform3(-1.0..1.0f64), ee0 in pose(), alpha in 0.1..5.0f64) {
        let v = Pose::new(v0.rotation, v0.translation + Vector3::from(step));
        let cmd = ee0.relative(&manipulation_reference(&v0, &v, &ee0, alpha).unwrap());
        let iface = v0.relative(&v);
        prop_assert!((cmd.translation.norm() - alpha * iface.translation.norm()).abs() < 1e-12);
        prop_assert!(cmd.rotation.angle_to(&iface.rotation) < 1e-12);
    }
}
