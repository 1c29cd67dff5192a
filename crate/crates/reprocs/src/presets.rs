//! Built-in experiment presets. Each preset is a list of cases that share a
//! protocol and differ in one setting, e.g. the support size.

use crate::config::{
    ComposeName, Config, EventSection, LowRankSection, ModeName, ObjectSection, ObserveName, RecoverySection, RunSection,
    SparseKind, SparseSection, SubspaceSection, TrackingInitName, TrackingSection, TriggerName,
};

/// Desk scale keeps every case within minutes; full scale restores the
/// original frame sizes and run counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

pub const PRESETS: [&str; 6] = [
    "table1_large",
    "table1_small",
    "table2_random",
    "table2_correlated",
    "twoblocks_modcs",
    "overlay_realbg",
];

pub fn preset(name: &str, scale: Scale) -> Option<Vec<Config>> {
    Some(match name {
        "table1_large" => table1(100.0, 0.2, scale),
        "table1_small" => table1(10.0, 0.3, scale),
        "table2_random" => table2(false, scale),
        "table2_correlated" => table2(true, scale),
        "twoblocks_modcs" => twoblocks(scale),
        "overlay_realbg" => overlay(scale),
        _ => return None,
    })
}

fn run(mc_runs: usize, t0: usize, horizon: usize, modes: Vec<ModeName>) -> RunSection {
    RunSection {
        seed: 1,
        mc_runs,
        t0,
        horizon,
        modes,
    }
}

fn ladder(n: usize, top: f64, ratio: f64, count: usize, events: Vec<EventSection>) -> LowRankSection {
    LowRankSection {
        n,
        background_file: None,
        ladder_top: top,
        ladder_ratio: ratio,
        ladder_count: count,
        f: 0.5,
        f_d: 0.1,
        theta: 0.5,
        mean: 0.0,
        events,
    }
}

fn event(after_t0: usize, add: &[f64], decay: &[usize]) -> EventSection {
    EventSection {
        after_t0,
        add: add.to_vec(),
        decay: decay.to_vec(),
    }
}

fn sparse(kind: SparseKind, rows: usize, cols: usize) -> SparseSection {
    SparseSection {
        kind,
        rows,
        cols,
        compose: ComposeName::Additive,
        p_up: 0.0,
        p_down: 0.0,
        p_left: 0.0,
        p_right: 0.0,
        q_row: 0.0,
        q_col: 0.0,
        size: 0,
        magnitude: 0.0,
        objects: Vec::new(),
    }
}

fn block(half_height: usize, half_width: usize, center: [f64; 2], velocity: [f64; 2], magnitude: f64) -> ObjectSection {
    ObjectSection {
        half_height,
        half_width,
        center,
        velocity,
        magnitude,
    }
}

fn subspace(alpha0: f64, tau: usize, alpha: f64) -> SubspaceSection {
    SubspaceSection {
        alpha0: Some(alpha0),
        energy: None,
        checkpoint: None,
        tau,
        alpha,
        trigger: TriggerName::Periodic,
        projected_threshold: 0.0,
        subtract_mean: false,
    }
}

fn recovery(gamma: Option<f64>, a: Option<f64>, alpha_add: f64, alpha_del: f64) -> RecoverySection {
    RecoverySection {
        gamma,
        a,
        alpha_add,
        alpha_del,
        max_iters: 5000,
        tol: 1e-10,
        epsilon_floor: 1e-8,
        observe: ObserveName::Median,
    }
}

/// Strips of 9 entries on a length-100 signal, random-walking up and down.
fn table1(magnitude: f64, a: f64, scale: Scale) -> Vec<Config> {
    let mc = match scale {
        Scale::Desk => 10,
        Scale::Full => 100,
    };
    let cases: [(&str, &[f64]); 2] = [("9pct", &[50.0]), ("36pct", &[12.0, 37.0, 62.0, 87.0])];
    cases
        .iter()
        .map(|(case, centers)| {
            let mut sp = sparse(SparseKind::RandomWalk, 100, 1);
            sp.p_up = 0.1;
            sp.p_down = 0.1;
            sp.objects = centers.iter().map(|&c| block(4, 0, [c, 0.0], [0.0, 0.0], magnitude)).collect();
            Config {
                name: case.to_string(),
                run: run(mc, 2000, 100, vec![ModeName::Reprocs]),
                lowrank: ladder(100, 1e4, 0.7079, 20, vec![event(5, &[50.0, 60.0], &[18, 19])]),
                sparse: sp,
                subspace: subspace(1.0, 20, 5.0),
                recovery: recovery(None, Some(a), 0.5, 1.0),
                tracking: None,
            }
        })
        .collect()
}

/// Random or block supports of three sizes with magnitude-5 entries.
fn table2(correlated: bool, scale: Scale) -> Vec<Config> {
    let (side, t0, mc) = match scale {
        Scale::Desk => (16, 2000, 10),
        Scale::Full => (32, 10_000, 100),
    };
    let n = side * side;
    let lowrank = ladder(
        n,
        1e4,
        0.8058,
        32,
        vec![event(5, &[50.0, 60.0], &[30, 31]), event(50, &[55.0, 65.0], &[28, 29])],
    );
    let make = |name: String, sp: SparseSection| Config {
        name,
        run: run(mc, t0, 200, vec![ModeName::Reprocs]),
        lowrank: lowrank.clone(),
        sparse: sp,
        subspace: subspace(1.0, 20, 5.0),
        recovery: recovery(Some(1.0), None, 0.5, 1.0),
        tracking: None,
    };
    let q = (side / 4) as f64;
    let far = (side - 1) as f64 - q;
    // Block layouts as (half-size, center) lists.
    type Layout = (&'static str, Vec<(usize, [f64; 2])>);
    let layouts: Vec<Layout> = match scale {
        Scale::Desk => vec![
            ("small", vec![(2, [q, q])]),
            ("medium", vec![(3, [q, q])]),
            ("large", vec![(3, [q, q]), (2, [far, far])]),
        ],
        Scale::Full => {
            let corners = [[q, q], [far, far], [q, far], [far, q], [q, 2.0 * q], [far, 2.0 * q]];
            [("small", 2), ("medium", 4), ("large", 6)]
                .into_iter()
                .map(|(name, k)| (name, corners[..k].iter().map(|&c| (3, c)).collect()))
                .collect()
        }
    };
    layouts
        .into_iter()
        .map(|(name, blocks)| {
            let size: usize = blocks.iter().map(|(h, _)| (2 * h + 1) * (2 * h + 1)).sum();
            let mut sp;
            if correlated {
                sp = sparse(SparseKind::RandomWalk, side, side);
                sp.p_up = 0.05;
                sp.p_down = 0.05;
                sp.p_left = 0.05;
                sp.p_right = 0.05;
                sp.objects = blocks.iter().map(|&(h, c)| block(h, h, c, [0.0, 0.0], 5.0)).collect();
            } else {
                sp = sparse(SparseKind::Uniform, n, 1);
                sp.size = size;
                sp.magnitude = 5.0;
            }
            make(format!("{name}_{size}"), sp)
        })
        .collect()
}

/// Two blocks crossing the frame in opposite directions.
fn twoblocks(scale: Scale) -> Vec<Config> {
    // (rows, cols, ladder count, ladder ratio, half sizes, centers, t0, mc runs)
    let (rows, cols, count, ratio, (hh, hw), centers, t0, mc) = match scale {
        Scale::Desk => (20, 64, 256, 0.97327, (4, 17), [[4.0, 18.0], [14.0, 45.0]], 2000, 5),
        Scale::Full => (64, 80, 1024, 0.9933, (14, 22), [[14.0, 22.0], [49.0, 57.0]], 5000, 100),
    };
    let n = rows * cols;
    let mut sp = sparse(SparseKind::ConstantVelocity, rows, cols);
    sp.q_col = 2.5e-5;
    sp.objects = vec![
        block(hh, hw, centers[0], [0.0, 0.25], 10.0),
        block(hh, hw, centers[1], [0.0, -0.25], 20.0),
    ];
    vec![Config {
        name: "modcs".into(),
        run: run(mc, t0, 100, vec![ModeName::Reprocs, ModeName::Modcs]),
        lowrank: ladder(n, 1e4, ratio, count, vec![event(5, &[50.0, 55.0], &[count - 2, count - 1])]),
        sparse: sp,
        subspace: subspace(1.0, 20, 5.0),
        recovery: recovery(Some(1.0), None, 0.5, 1.0),
        tracking: Some(TrackingSection {
            init: TrackingInitName::Truth,
            warmup_frames: 0,
            r: 1e-4,
            q_row: 0.0,
            q_col: 2.5e-5,
            intensity_ranges: vec![[5.0, 15.0], [15.0, 25.0]],
        }),
    }]
}

/// One bright block overlaid on a background with a nonzero mean. Without
/// a `background_file` the background is a synthetic stand-in.
fn overlay(scale: Scale) -> Vec<Config> {
    let (rows, cols, t0, horizon, (hh, hw), mc) = match scale {
        Scale::Desk => (36, 45, 400, 40, (6, 11), 5),
        Scale::Full => (72, 90, 1420, 80, (12, 22), 20),
    };
    let n = rows * cols;
    let mut lowrank = ladder(n, 400.0, 0.9, 40, Vec::new());
    lowrank.mean = 120.0;
    let mut sp = sparse(SparseKind::ConstantVelocity, rows, cols);
    sp.compose = ComposeName::Overlay;
    sp.q_col = 0.005;
    sp.objects = vec![block(hh, hw, [(rows / 2) as f64, hw as f64], [0.0, 0.5], 200.0)];
    let mut sub = subspace(1.0, 10, 0.1);
    sub.subtract_mean = true;
    vec![Config {
        name: "block".into(),
        run: run(mc, t0, horizon, vec![ModeName::Reprocs, ModeName::Modcs]),
        lowrank,
        sparse: sp,
        subspace: sub,
        recovery: recovery(Some(10.0), None, 10.0, 20.0),
        tracking: Some(TrackingSection {
            init: TrackingInitName::Truth,
            warmup_frames: 0,
            r: 1e-4,
            q_row: 0.0,
            q_col: 0.005,
            intensity_ranges: vec![[10.0, 1e6]],
        }),
    }]
}
