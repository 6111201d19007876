//! Property tests for the invariants the benchmark relies on.

use proptest::prelude::*;

use wmbench::episodes::{generate_episode, read_episode, write_episode};
use wmbench::geometry::{back_project, project, CameraPose, Intrinsics};
use wmbench::harness::{evaluate, radar_ratios, Cell, EvalReport};
use wmbench::math::{child_seed, solve_spd, Rng};
use wmbench::predictors::{adam_step, AdamState, Normalizer, ZeroOrderHold};
use wmbench::tasks::{self, default_spec, pendulum_energy, TaskId};
use wmbench::{Matrix, Quat, Vec3};

fn task() -> impl Strategy<Value = TaskId> {
    proptest::sample::select(TaskId::ALL.to_vec())
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_preserves_length(rv in vec3(4.0), v in vec3(10.0)) {
        let q = Quat::from_rotation_vector(rv);
        prop_assert!((q.rotate(v).norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
        prop_assert!((q.inverse_rotate(q.rotate(v)) - v).norm() <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn uniform_stays_in_range(seed: u64, lo in -1e3..1e3f64, width in 1e-9..1e3f64) {
        let mut rng = Rng::new(seed);
        for _ in 0..100 {
            let x = rng.uniform(lo, lo + width).unwrap();
            prop_assert!(x >= lo && x < lo + width);
        }
    }

    #[test]
    fn child_seeds_differ(base: u64, i in 0u64..1_000_000) {
        prop_assert_ne!(child_seed(base, i), child_seed(base, i + 1));
    }

    #[test]
    fn spd_solve_residual(seed: u64, n in 1usize..12) {
        let mut rng = Rng::new(seed);
        let b = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect()).unwrap();
        let a = b.transpose().matmul(&b).unwrap().add(&Matrix::identity(n)).unwrap();
        let rhs = Matrix::column(&(0..n).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect::<Vec<_>>());
        let x = solve_spd(&a, &rhs).unwrap();
        let resid = a.matmul(&x).unwrap().add(&Matrix::column(&rhs.as_slice().iter().map(|v| -v).collect::<Vec<_>>())).unwrap();
        prop_assert!(resid.max_abs() <= 1e-10);
    }

    #[test]
    fn episodes_round_trip_bit_exactly(t in task(), seed: u64) {
        let e = generate_episode(&default_spec(t), seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        write_episode(&e, &path).unwrap();
        let back = read_episode(&path).unwrap();
        for (a, b) in e.states.iter().flatten().zip(back.states.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back, e);
    }

    #[test]
    fn transitions_resimulate(t in task(), seed: u64) {
        let e = generate_episode(&default_spec(t), seed).unwrap();
        prop_assert!(e.verify_transitions().is_ok());
        prop_assert_eq!(e.states.len(), e.actions.len() + 1);
    }

    #[test]
    fn bouncing_ball_stays_inside(seed: u64) {
        let e = generate_episode(&default_spec(TaskId::BouncingBall), seed).unwrap();
        let (side, r) = (e.params.get("box_side").unwrap(), e.params.get("radius").unwrap());
        let speed = e.states[0][2].hypot(e.states[0][3]);
        for s in &e.states {
            prop_assert!(s[0] >= r - 1e-9 && s[0] <= side - r + 1e-9 && s[1] >= r - 1e-9 && s[1] <= side - r + 1e-9);
            prop_assert!((s[2].hypot(s[3]) - speed).abs() <= 1e-12);
        }
    }

    #[test]
    fn elastic_energy_conserved(seed: u64) {
        let e = generate_episode(&default_spec(TaskId::ElasticCollision), seed).unwrap();
        let (m1, m2) = (e.params.get("mass1").unwrap(), e.params.get("mass2").unwrap());
        let ke = |s: &[f64]| 0.5 * m1 * (s[2] * s[2] + s[3] * s[3]) + 0.5 * m2 * (s[6] * s[6] + s[7] * s[7]);
        let k0 = ke(&e.states[0]);
        for s in &e.states {
            prop_assert!((ke(s) - k0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pendulum_energy_bounded(seed: u64) {
        let e = generate_episode(&default_spec(TaskId::Pendulum), seed).unwrap();
        let (g, l) = (e.params.get("g").unwrap(), e.params.get("length").unwrap());
        let e0 = pendulum_energy(g, l, &e.states[0]);
        for s in &e.states {
            prop_assert!((pendulum_energy(g, l, s) - e0).abs() <= 1e-7 * g * l);
        }
    }

    #[test]
    fn rigid_body_quaternions_stay_unit(t in proptest::sample::select(vec![TaskId::Rotation, TaskId::Spin]), seed: u64) {
        let e = generate_episode(&default_spec(t), seed).unwrap();
        for s in &e.states {
            prop_assert!((Quat::from_slice(&s[..4]).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_round_trip(pos in vec3(5.0), rv in vec3(3.0), dir in vec3(1.0), depth in 0.1..50.0f64) {
        let pose = CameraPose { position: pos, orientation: Quat::from_rotation_vector(rv) };
        let intr = Intrinsics::new(640.0, 480.0, 1.0).unwrap();
        let cam = Vec3::new(dir.x * depth, dir.y * depth, -depth);
        let world = pose.position + pose.orientation.rotate(cam);
        let p = project(&pose, &intr, world);
        prop_assert!((back_project(&pose, &intr, p.u, p.v, depth) - world).norm() <= 1e-9);
    }

    #[test]
    fn normalizer_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e3..1e3f64, 3), 1..20)) {
        let n = Normalizer::fit(rows.iter().map(Vec::as_slice), 3);
        for r in &rows {
            for (a, b) in n.denormalize(&n.normalize(r)).iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn adam_ignores_zero_gradients(params in proptest::collection::vec(-10.0..10.0f64, 1..16), steps in 1usize..5) {
        let mut p = params.clone();
        let mut opt = AdamState::new(p.len());
        for _ in 0..steps {
            adam_step(&mut opt, &mut p, &vec![0.0; params.len()]);
        }
        prop_assert_eq!(p, params);
    }

    #[test]
    fn radar_normalisation(mses in proptest::collection::vec(1e-9..1e3f64, 1..6), reference in 0usize..6) {
        let reference = reference % mses.len();
        let mut report = EvalReport::new(10, 90);
        for (i, &m) in mses.iter().enumerate() {
            report.cells.push(Cell { predictor: format!("p{i}"), task: TaskId::Rotation, episodes: 1, mse: m, curve: vec![] });
        }
        let t = radar_ratios(&report, &format!("p{reference}")).unwrap();
        let row = &t.normalized[0];
        prop_assert_eq!(row.iter().copied().fold(0.0, f64::max), 1.0);
        prop_assert_eq!(t.ratios[0][reference], 1.0);
        for i in 0..mses.len() {
            for j in 0..mses.len() {
                if mses[i] < mses[j] {
                    prop_assert!(row[i] <= row[j]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evaluation_ignores_episode_order(t in task(), seed: u64, perm_seed: u64) {
        let spec = default_spec(t);
        let eval: Vec<_> = (0..6).map(|i| generate_episode(&spec, child_seed(seed, i)).unwrap()).collect();
        let mut shuffled = eval.clone();
        let order = Rng::new(perm_seed).permutation(eval.len());
        for (dst, &src) in shuffled.iter_mut().zip(&order) {
            *dst = eval[src].clone();
        }
        prop_assert_eq!(evaluate(&ZeroOrderHold, &eval, 10, 90).unwrap(), evaluate(&ZeroOrderHold, &shuffled, 10, 90).unwrap());
    }

    #[test]
    fn sampled_params_lie_in_ranges(t in task(), seed: u64) {
        let spec = default_spec(t);
        let (params, _) = tasks::sample_init(&spec, &mut Rng::new(seed)).unwrap();
        for (k, r) in &spec.param_ranges {
            let v = params.get(k).unwrap();
            prop_assert!(r.contains(v), "{k} = {v} outside {r:?}");
        }
    }
}
