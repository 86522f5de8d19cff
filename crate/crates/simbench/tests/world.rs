use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;

use pa_simbench::{trefoil_position, trefoil_velocity, World};

#[test]
fn trefoil_starts_below_the_center() {
    let p = trefoil_position(0.0, &Vector3::repeat(1.0), &Vector3::zeros(), 1.3);
    assert!((p - Vector3::new(0.0, -1.0, 0.0)).amax() < 1e-15);
}

#[test]
fn scenario_obstacle_matches_the_benchmark_box() {
    let w = World::trefoil_scenario();
    assert_eq!(w.obstacles.len(), 1);
    assert_eq!(w.obstacles[0].half_sides, Vector3::repeat(0.4));
    assert_eq!(w.image_size, 480.0);
    let three = World::three_obstacle_scenario();
    assert_eq!(three.obstacles.len(), 3);
    let ids: Vec<usize> = three.obstacles.iter().map(|o| o.id).collect();
    assert_eq!(ids, [0, 1, 2]);
}

#[test]
fn goal_schedule_is_seeded() {
    let w = World::trefoil_scenario();
    assert_eq!(w.goal_schedule(4, 60.0), w.goal_schedule(4, 60.0));
    assert_ne!(w.goal_schedule(4, 60.0), w.goal_schedule(5, 60.0));
    for g in &w.goal_schedule(4, 60.0).goals {
        assert_eq!(g.z, 1.0);
        assert_eq!(g.x.abs(), 5.0);
        assert_eq!(g.y.abs(), 5.0);
    }
}

proptest! {
    #[test]
    fn trefoil_is_periodic(
        t in -50.0..50.0f64,
        omega in 0.1..2.0f64,
        scale in prop::array::uniform3(0.1..3.0f64),
        center in prop::array::uniform3(-5.0..5.0f64),
    ) {
        let (scale, center) = (Vector3::from(scale), Vector3::from(center));
        let a = trefoil_position(t, &scale, &center, omega);
        let b = trefoil_position(t + 2.0 * PI / omega, &scale, &center, omega);
        prop_assert!((a - b).amax() < 1e-12 * (1.0 + t.abs() * omega), "{a} vs {b}");
    }

    #[test]
    fn trefoil_velocity_matches_central_difference(
        t in -20.0..20.0f64,
        omega in 0.1..2.0f64,
        scale in prop::array::uniform3(0.1..3.0f64),
    ) {
        let scale = Vector3::from(scale);
        let h = 1e-5;
        let fd = (trefoil_position(t + h, &scale, &Vector3::zeros(), omega)
            - trefoil_position(t - h, &scale, &Vector3::zeros(), omega))
            / (2.0 * h);
        prop_assert!((fd - trefoil_velocity(t, &scale, omega)).amax() < 1e-6);
    }
}
