mod oracles;

use nalgebra::DMatrix;
use reprocs_core::synth::{
    generate_basis_columns, stream_rng, truncated_normal, uniform_support, variance_ladder, LowRankProcess, LowRankSpec,
    Motion, ObjectSpec, ScheduleEvent, SupportProcess, SupportProcessSpec,
};
use reprocs_core::tracker::FrameShape;

fn spec(schedule: Vec<ScheduleEvent>) -> LowRankSpec {
    LowRankSpec {
        n: 10,
        variances: vec![100.0, 10.0, 40.0, 25.0],
        f: 0.5,
        f_d: 0.1,
        theta: 0.5,
        initial: vec![0, 1, 2],
        schedule,
    }
}

fn identity_process(s: LowRankSpec) -> LowRankProcess {
    let k = s.columns_used();
    LowRankProcess::new(s, DMatrix::identity(10, k)).unwrap()
}

#[test]
fn steady_coordinates_reach_their_variance() {
    let mut p = identity_process(spec(Vec::new()));
    let mut rng = stream_rng(4, 1);
    let steps = 40_000;
    let mut sq = [0.0; 3];
    for t in 0..steps + 20 {
        let x = p.step_latent(&mut rng).clone();
        if t >= 20 {
            for i in 0..3 {
                sq[i] += x[i] * x[i];
            }
        }
    }
    for (i, target) in [100.0, 10.0, 40.0].iter().enumerate() {
        let v = sq[i] / steps as f64;
        assert!((v / target - 1.0).abs() < 0.05, "index {i}: {v}");
    }
}

#[test]
fn added_coordinates_start_with_a_fraction_of_their_variance() {
    let mut first = Vec::new();
    for seed in 0..4000 {
        let mut p = identity_process(spec(vec![ScheduleEvent {
            time: 3,
            added: vec![3],
            decayed: vec![],
        }]));
        let mut rng = stream_rng(seed, 1);
        for t in 1..=3 {
            let x = p.step_latent(&mut rng);
            if t < 3 {
                assert_eq!(x[3], 0.0);
            } else {
                first.push(x[3]);
            }
        }
    }
    let v = first.iter().map(|x| x * x).sum::<f64>() / first.len() as f64;
    // theta * 25
    assert!((v / 12.5 - 1.0).abs() < 0.06, "{v}");
}

#[test]
fn decayed_coordinates_shrink_geometrically() {
    let mut p = identity_process(spec(vec![ScheduleEvent {
        time: 5,
        added: vec![],
        decayed: vec![2],
    }]));
    let mut rng = stream_rng(8, 1);
    let mut prev = 0.0;
    for t in 1..=12 {
        let x = p.step_latent(&mut rng)[2];
        if t > 5 {
            assert_eq!(x, 0.1 * prev);
        }
        prev = x;
    }
}

#[test]
fn basis_is_orthonormal_and_prefix_stable() {
    let full = generate_basis_columns(12, 12, &mut stream_rng(3, 0)).unwrap();
    let part = generate_basis_columns(12, 5, &mut stream_rng(3, 0)).unwrap();
    assert!((full.transpose() * &full - DMatrix::<f64>::identity(12, 12)).norm() < 1e-12);
    assert_eq!(part, full.columns(0, 5));
}

#[test]
fn truncated_noise_is_bounded_with_the_truncated_variance() {
    let mut rng = stream_rng(1, 2);
    let q = 0.04;
    let draws: Vec<f64> = (0..200_000).map(|_| truncated_normal(&mut rng, q)).collect();
    assert!(draws.iter().all(|x| x.abs() < 2.0 * q.sqrt()));
    let v = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
    // Variance of a standard normal truncated to (-2, 2).
    assert!((v / q - 0.773_7).abs() < 0.01, "{}", v / q);
    assert_eq!(truncated_normal(&mut rng, 0.0), 0.0);
}

#[test]
fn random_walk_moves_with_the_given_probabilities() {
    let spec = SupportProcessSpec::Objects {
        // Balanced per axis so the walk stays far from the border.
        shape: FrameShape::new(601, 601),
        motion: Motion::RandomWalk {
            up: 0.05,
            down: 0.05,
            left: 0.2,
            right: 0.2,
        },
        objects: vec![ObjectSpec {
            half_height: 1,
            half_width: 1,
            center: (300.0, 300.0),
            velocity: (0.0, 0.0),
            magnitude: 1.0,
        }],
    };
    let mut p = SupportProcess::new(spec).unwrap();
    let mut rng = stream_rng(2, 2);
    let mut counts = [0usize; 5];
    let first = p.step(&mut rng);
    let mut last = first.objects[0].center;
    let steps = 10_000;
    for _ in 0..steps {
        let frame = p.step(&mut rng);
        assert!(!frame.clipped);
        let c = frame.objects[0].center;
        let k = match (c.0 - last.0, c.1 - last.1) {
            (d, _) if d < 0.0 => 0,
            (d, _) if d > 0.0 => 1,
            (_, d) if d < 0.0 => 2,
            (_, d) if d > 0.0 => 3,
            _ => 4,
        };
        counts[k] += 1;
        last = c;
    }
    for (k, p) in [0.05, 0.05, 0.2, 0.2, 0.5].iter().enumerate() {
        let f = counts[k] as f64 / steps as f64;
        assert!((f - p).abs() < 0.015, "direction {k}: {f}");
    }
}

#[test]
fn uniform_supports_have_exact_size_and_flat_marginals() {
    let mut rng = stream_rng(6, 2);
    let mut hits = [0usize; 20];
    for _ in 0..10_000 {
        let s = uniform_support(20, 5, &mut rng);
        assert_eq!(s.len(), 5);
        for i in s.iter() {
            hits[i] += 1;
        }
    }
    assert!(hits.iter().all(|&h| (h as f64 / 2500.0 - 1.0).abs() < 0.08));
}

#[test]
fn ladder_is_geometric() {
    let v = variance_ladder(1e4, 0.5, 4);
    assert_eq!(v, vec![1e4, 5e3, 2.5e3, 1.25e3]);
}
