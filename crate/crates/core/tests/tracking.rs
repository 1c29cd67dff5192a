mod checks;
mod oracles;

use checks::{omega_sweep, riccati_check};
use reprocs_core::tracker::TrackState;

#[test]
fn filter_matches_joseph_recursion() {
    for seed in 0..20 {
        let c = riccati_check(seed, 2.5e-5, 1e-4, 500);
        assert!(c.discrepancy <= 1e-12, "seed {seed}: {}", c.discrepancy);
        assert!(c.psd, "seed {seed}");
    }
}

#[test]
fn filter_matches_with_large_noise() {
    for seed in 0..10 {
        let c = riccati_check(100 + seed, 0.005, 1.0, 500);
        assert!(c.discrepancy <= 1e-12, "seed {seed}: {}", c.discrepancy);
        assert!(c.psd);
    }
}

#[test]
fn innovation_variance_settles() {
    let mut s = TrackState::exact(0.0, 0.0, 2.5e-5, 1e-4, 2).unwrap();
    let mut prev = f64::NAN;
    for k in 0..400 {
        s.predict();
        let v = s.innovation_variance();
        s.update(s.position);
        if k >= 200 {
            assert!((v - prev).abs() <= 1e-8, "cycle {k}");
        }
        prev = v;
    }
}

#[test]
fn omega_bound_holds_exhaustively() {
    for w in 0..=5 {
        let sweep = omega_sweep(w, 4);
        assert_eq!(sweep.violations, 0, "w = {w}: worst slack {}", sweep.worst_slack);
        assert_eq!(sweep.cases, ((1 << (2 * w + 1)) - 1) << 8);
    }
}
