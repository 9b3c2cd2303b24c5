use proptest::prelude::*;

use evsynth::sampler::{plan_schedule, verify_schedule};
use evsynth::scene::{gen_scene, gen_trajectory, CameraIntrinsics, SceneConfig, TrajectoryConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_interval_moves_at_most_max_disp(seed in any::<u64>(), max_disp in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let k = CameraIntrinsics::from_fov(40, 30, 70.0).unwrap();
        let scene = gen_scene(&SceneConfig::default(), seed).unwrap();
        let cfg = TrajectoryConfig { duration_us: 40_000, ..TrajectoryConfig::default() };
        let traj = gen_trajectory(&cfg, &scene, seed.wrapping_add(1)).unwrap();
        let s = plan_schedule(&scene, &traj, &k, 0, cfg.duration_us, max_disp).unwrap();
        prop_assert_eq!(s.start(), 0);
        prop_assert_eq!(s.end(), cfg.duration_us);
        prop_assert!(s.times.windows(2).all(|w| w[0] < w[1]));
        let worst = verify_schedule(&scene, &traj, &k, &s).unwrap();
        prop_assert!(worst <= max_disp + 1e-3, "worst {}", worst);
    }
}

#[test]
fn sub_windows_can_be_planned_independently() {
    let k = CameraIntrinsics::from_fov(40, 30, 70.0).unwrap();
    let scene = gen_scene(&SceneConfig::default(), 5).unwrap();
    let traj = gen_trajectory(&TrajectoryConfig::default(), &scene, 6).unwrap();
    let s = plan_schedule(&scene, &traj, &k, 16_667, 33_333, 1.0).unwrap();
    assert_eq!((s.start(), s.end()), (16_667, 33_333));
    assert!(verify_schedule(&scene, &traj, &k, &s).unwrap() <= 1.001);
}
