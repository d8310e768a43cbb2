//! Acceptance suite: one test per release criterion, each printing a
//! pass line on success (run with `--nocapture` to see them). A failed
//! criterion shows up as the corresponding failed test.

use std::collections::HashSet;

use hsieval::datamodel::{ConfusionMatrix, HyperCube, SplitState};
use hsieval::features::{
    dwt3d_features, dwt_subcubes, emp_features, morph_close, morph_open, DwtAxis,
    EmpSpec,
};
use hsieval::harness::{
    evaluate_once, ClassifierKind, FeatureKind, DEFAULT_SVM_EPOCHS,
};
use hsieval::leakage::{correlation_decay, overlap_rate, pairwise_window_overlap, Axis};
use hsieval::metrics::oa_aa_kappa;
use hsieval::rng::{derive_stream, CounterRng};
use hsieval::sampling::{
    connected_partitions, controlled_random_split, stratified_random_split, SamplingStrategy,
};
use hsieval::synthgen::{generate_scene, Layout, SceneConfig};

fn pass(n: usize, what: &str) {
    println!("acceptance criterion {n}: PASS — {what}");
}

fn grid_scene(seed: u64) -> SceneConfig {
    SceneConfig {
        height: 64,
        width: 64,
        bands: 16,
        classes: 4,
        layout: Layout::GridBlocks { block: 8 },
        signature_separation: 1.0,
        noise_sigma: 0.5,
        rng_seed: seed,
    }
}

// -------------------------------------------------------------------------
// 1. Window-overlap closed form
// -------------------------------------------------------------------------

/// Independent oracle: count grid cells shared by two w x w windows
/// whose centers differ by (dy, dx).
fn brute_overlap(w: usize, offset: (i64, i64)) -> f64 {
    let r = (w as i64 - 1) / 2;
    let mut shared = 0usize;
    for y in -3 * r..=3 * r {
        for x in -3 * r..=3 * r {
            let in_a = y.abs() <= r && x.abs() <= r;
            let in_b = (y - offset.0).abs() <= r && (x - offset.1).abs() <= r;
            if in_a && in_b {
                shared += 1;
            }
        }
    }
    shared as f64 / (w * w) as f64
}

#[test]
fn criterion_01_window_overlap_closed_form() {
    assert_eq!(pairwise_window_overlap(3, (0, 1)).unwrap(), 2.0 / 3.0);
    assert_eq!(pairwise_window_overlap(5, (0, 1)).unwrap(), 4.0 / 5.0);
    for w in (1..=15usize).step_by(2) {
        let got = pairwise_window_overlap(w, (0, 1)).unwrap();
        assert!(
            (got - (w as f64 - 1.0) / w as f64).abs() < 1e-15,
            "w={w}: {got}"
        );
        // full oracle sweep over offsets
        for dy in -(w as i64 + 1)..=(w as i64 + 1) {
            for dx in -(w as i64 + 1)..=(w as i64 + 1) {
                let got = pairwise_window_overlap(w, (dy, dx)).unwrap();
                let want = brute_overlap(w, (dy, dx));
                assert!((got - want).abs() < 1e-12, "w={w} ({dy},{dx})");
            }
        }
    }
    pass(1, "pairwise window overlap matches 2/3, 4/5, (w-1)/w and the cell-count oracle");
}

// -------------------------------------------------------------------------
// 2. Sampling quotas + connectivity
// -------------------------------------------------------------------------

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn is_8_connected(pixels: &[(usize, usize)]) -> bool {
    if pixels.is_empty() {
        return true;
    }
    let set: HashSet<(usize, usize)> = pixels.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut stack = vec![pixels[0]];
    seen.insert(pixels[0]);
    while let Some((y, x)) = stack.pop() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let ny = y as i64 + dy;
                let nx = x as i64 + dx;
                if ny < 0 || nx < 0 {
                    continue;
                }
                let p = (ny as usize, nx as usize);
                if set.contains(&p) && seen.insert(p) {
                    stack.push(p);
                }
            }
        }
    }
    seen.len() == pixels.len()
}

#[test]
fn criterion_02_sampling_quotas_and_connectivity() {
    for trial in 0..100u64 {
        let mut rng = CounterRng::new(derive_stream(trial, 0xacce));
        let classes = 2 + (trial % 4) as u16;
        let layout = if trial % 2 == 0 {
            Layout::GridBlocks {
                block: [4, 8, 16][(trial as usize / 2) % 3],
            }
        } else {
            Layout::VoronoiBlobs {
                seeds_per_class: 1 + (trial as usize / 2) % 3,
            }
        };
        let config = SceneConfig {
            height: 32,
            width: 32,
            bands: 4,
            classes,
            layout,
            signature_separation: 1.0,
            noise_sigma: 0.2,
            rng_seed: trial,
        };
        let (_, labels) = match generate_scene(&config) {
            Ok(v) => v,
            // rare voronoi draws can starve a class; not under test here
            Err(_) => continue,
        };
        let rate = 0.02 + 0.28 * rng.next_f64();
        let counts = labels.class_counts();
        if counts.values().any(|&n| n < 2) {
            continue;
        }
        for strategy in [
            SamplingStrategy::StratifiedRandom,
            SamplingStrategy::ControlledRandom,
        ] {
            let split = match strategy {
                SamplingStrategy::StratifiedRandom => {
                    stratified_random_split(&labels, rate, trial).unwrap()
                }
                SamplingStrategy::ControlledRandom => {
                    controlled_random_split(&labels, rate, trial).unwrap()
                }
            };
            for (&class, &n_c) in &counts {
                let quota = round_half_up(n_c as f64 * rate).max(1);
                let got = labels
                    .pixels_of_class(class)
                    .iter()
                    .filter(|&&(y, x)| split.get(y, x) == SplitState::Train)
                    .count();
                assert_eq!(
                    got, quota,
                    "trial {trial} {strategy:?} class {class}: {got} != quota {quota}"
                );
            }
            if strategy == SamplingStrategy::ControlledRandom {
                for &class in counts.keys() {
                    for part in connected_partitions(&labels, class).unwrap() {
                        let region: Vec<(usize, usize)> = part
                            .pixels
                            .iter()
                            .copied()
                            .filter(|&(y, x)| split.get(y, x) == SplitState::Train)
                            .collect();
                        assert!(
                            is_8_connected(&region),
                            "trial {trial} class {class} partition {}: train region disconnected",
                            part.id
                        );
                    }
                }
            }
        }
    }
    pass(2, "per-class quotas exact for both strategies; controlled train regions 8-connected");
}

// -------------------------------------------------------------------------
// 3. Leakage reduction
// -------------------------------------------------------------------------

#[test]
fn criterion_03_controlled_sampling_reduces_overlap() {
    let (_, labels) = generate_scene(&grid_scene(0)).unwrap();
    let mut wins = 0usize;
    let mut ratios = Vec::new();
    for seed in 0..100u64 {
        let controlled = controlled_random_split(&labels, 0.1, seed).unwrap();
        let stratified = stratified_random_split(&labels, 0.1, seed).unwrap();
        let oc = overlap_rate(&controlled, 3).unwrap();
        let os = overlap_rate(&stratified, 3).unwrap();
        if oc < os {
            wins += 1;
        }
        ratios.push(oc / os);
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (ratios[49] + ratios[50]) / 2.0;
    assert!(wins >= 95, "controlled < stratified in only {wins}/100 seeds");
    assert!(median <= 0.5, "median overlap ratio {median} > 0.5");
    pass(3, "controlled overlap < stratified in >= 95/100 seeds with median ratio <= 0.5");
}

// -------------------------------------------------------------------------
// 4. Overlap monotonicity
// -------------------------------------------------------------------------

#[test]
fn criterion_04_overlap_monotone_in_window_and_rate() {
    let (_, labels) = generate_scene(&grid_scene(0)).unwrap();
    // non-decreasing in window for every fixed split
    for seed in 0..10u64 {
        for strategy in ["stratified", "controlled"] {
            let split = if strategy == "stratified" {
                stratified_random_split(&labels, 0.1, seed).unwrap()
            } else {
                controlled_random_split(&labels, 0.1, seed).unwrap()
            };
            let mut prev = -1.0;
            for w in (1..=13usize).step_by(2) {
                let r = overlap_rate(&split, w).unwrap();
                assert!(r >= prev, "{strategy} seed {seed}: overlap fell at w={w}");
                prev = r;
            }
        }
    }
    // mean over 50 seeds non-decreasing in rate
    for strategy in ["stratified", "controlled"] {
        let mut prev = -1.0;
        for rate in [0.05, 0.1, 0.25] {
            let mut sum = 0.0;
            for seed in 0..50u64 {
                let split = if strategy == "stratified" {
                    stratified_random_split(&labels, rate, seed).unwrap()
                } else {
                    controlled_random_split(&labels, rate, seed).unwrap()
                };
                sum += overlap_rate(&split, 3).unwrap();
            }
            let mean = sum / 50.0;
            assert!(
                mean >= prev,
                "{strategy}: mean overlap fell from {prev} at rate {rate}"
            );
            prev = mean;
        }
    }
    pass(4, "overlap non-decreasing in window per split and in rate on 50-seed means");
}

// -------------------------------------------------------------------------
// 5. Dependence amplification by smoothing
// -------------------------------------------------------------------------

#[test]
fn criterion_05_smoothing_amplifies_correlation() {
    use hsieval::filters::{mean_filter, WindowSpec};
    let mut ordered = 0usize;
    let mut raw_tail = Vec::new();
    let mut w3_tail = Vec::new();
    for seed in 0..50u64 {
        let mut rng = CounterRng::new(derive_stream(seed, 0xdec0));
        let values: Vec<f64> = (0..40 * 40 * 8).map(|_| rng.next_gaussian()).collect();
        let cube = HyperCube::new(40, 40, 8, values).unwrap();
        let w3 = mean_filter(&cube, WindowSpec::square(3)).unwrap();
        let w5 = mean_filter(&cube, WindowSpec::square(5)).unwrap();
        let rho = |c: &HyperCube| {
            let curve = correlation_decay(c, Axis::X, 8).unwrap();
            assert_eq!(curve.rho[0], Some(1.0), "rho(0) must be 1");
            curve
        };
        let (c0, c3, c5) = (rho(&cube), rho(&w3), rho(&w5));
        let lag1 = |c: &hsieval::leakage::CorrelationCurve| c.rho[1].unwrap();
        if lag1(&c5) > lag1(&c3) && lag1(&c3) > lag1(&c0) {
            ordered += 1;
        }
        // beyond support: unfiltered at any lag >= 1; 3x3 at lag > 2
        raw_tail.push(c0.rho[1].unwrap().abs());
        w3_tail.extend((3..=8).map(|l| c3.rho[l].unwrap().abs()));
    }
    assert!(ordered >= 48, "lag-1 ordering held in only {ordered}/50 seeds");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&raw_tail) < 0.05, "iid noise shows lag-1 correlation");
    assert!(
        mean(&w3_tail) < 0.05,
        "3x3-filtered correlation persists beyond its support"
    );
    pass(5, "mean-filter smoothing raises lag-1 correlation (5x5 > 3x3 > raw), rho(0)=1, tails ~0");
}

// -------------------------------------------------------------------------
// 6. Spatial features beat spectral features only under leaky sampling
// -------------------------------------------------------------------------

#[test]
fn criterion_06_spatial_advantage_depends_on_sampling() {
    let scene = SceneConfig {
        height: 48,
        width: 48,
        bands: 8,
        classes: 5,
        layout: Layout::VoronoiBlobs { seeds_per_class: 3 },
        signature_separation: 1.0,
        noise_sigma: 1.2,
        rng_seed: 5,
    };
    let (cube, labels) = generate_scene(&scene).unwrap();
    let knn = ClassifierKind::Knn { k: 1 };
    let svm = ClassifierKind::LinearSvm {
        cost_grid: vec![1.0],
        epochs: DEFAULT_SVM_EPOCHS,
    };
    let mean_gap = |strategy: SamplingStrategy| -> f64 {
        let mut gaps = Vec::new();
        for rep in 0..5u64 {
            let seed = derive_stream(60, rep);
            let (spatial, _) = evaluate_once(
                &cube,
                &labels,
                strategy,
                0.05,
                FeatureKind::SpatialCoords,
                &knn,
                seed,
            )
            .unwrap();
            let (spectral, _) = evaluate_once(
                &cube,
                &labels,
                strategy,
                0.05,
                FeatureKind::RawSpectral,
                &svm,
                seed,
            )
            .unwrap();
            gaps.push(spatial.oa - spectral.oa);
        }
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    let gap_stratified = mean_gap(SamplingStrategy::StratifiedRandom);
    let gap_controlled = mean_gap(SamplingStrategy::ControlledRandom);
    assert!(
        gap_stratified > 0.0,
        "spatial coords + 1-NN should beat raw spectra + SVM under stratified sampling \
         (gap {gap_stratified})"
    );
    assert!(
        gap_controlled <= gap_stratified * 0.5,
        "controlled sampling should shrink the spatial advantage by >= 50% or reverse it: \
         stratified gap {gap_stratified}, controlled gap {gap_controlled}"
    );
    pass(6, "spatial-coordinate advantage exists under stratified sampling and collapses under controlled");
}

// -------------------------------------------------------------------------
// 7. Mean-filter sweep shapes
// -------------------------------------------------------------------------

#[test]
fn criterion_07_filter_sweep_shapes() {
    let scene = SceneConfig {
        height: 64,
        width: 64,
        bands: 8,
        classes: 5,
        layout: Layout::VoronoiBlobs { seeds_per_class: 3 },
        signature_separation: 1.0,
        noise_sigma: 0.6,
        rng_seed: 7,
    };
    let (cube, labels) = generate_scene(&scene).unwrap();
    let knn = ClassifierKind::Knn { k: 1 };
    let sweep = |strategy: SamplingStrategy| -> Vec<f64> {
        [1usize, 3, 5, 7, 9]
            .iter()
            .map(|&w| {
                let mut sum = 0.0;
                for rep in 0..10u64 {
                    let seed = derive_stream(700, rep);
                    let (report, _) = evaluate_once(
                        &cube,
                        &labels,
                        strategy,
                        0.15,
                        FeatureKind::MeanFilterThenRaw(w),
                        &knn,
                        seed,
                    )
                    .unwrap();
                    sum += report.oa;
                }
                sum / 10.0
            })
            .collect()
    };
    let s = sweep(SamplingStrategy::StratifiedRandom);
    let c = sweep(SamplingStrategy::ControlledRandom);
    println!("stratified OA by window [1,3,5,7,9]: {s:?}");
    println!("controlled OA by window [1,3,5,7,9]: {c:?}");
    assert!(s[1] > s[0], "stratified: OA(w=3) {} <= OA(w=1) {}", s[1], s[0]);
    assert!(c[1] > c[0], "controlled: OA(w=3) {} <= OA(w=1) {}", c[1], c[0]);
    assert!(c[4] < c[1], "controlled: OA(w=9) {} should fall below OA(w=3) {}", c[4], c[1]);
    assert!(
        s[4] >= s[1],
        "stratified: OA should plateau, not fall: OA(w=9) {} < OA(w=3) {}",
        s[4],
        s[1]
    );
    pass(7, "OA rises with smoothing under stratified sampling and rises-then-falls under controlled");
}

// -------------------------------------------------------------------------
// 8. Metrics oracle
// -------------------------------------------------------------------------

#[test]
fn criterion_08_metrics_oracle() {
    let fill = |rows: &[[u64; 2]]| -> ConfusionMatrix {
        let mut m = ConfusionMatrix::zeros(2).unwrap();
        for (t, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    m.increment(t, p);
                }
            }
        }
        m
    };
    let (oa, aa, kappa) = oa_aa_kappa(&fill(&[[40, 10], [20, 30]])).unwrap();
    assert!((oa - 0.7).abs() < 1e-12);
    assert!((aa - 0.7).abs() < 1e-12);
    assert!((kappa - 0.4).abs() < 1e-12);
    let (oa, aa, kappa) = oa_aa_kappa(&fill(&[[50, 0], [0, 50]])).unwrap();
    assert_eq!((oa, aa, kappa), (1.0, 1.0, 1.0));
    let (oa, _, kappa) = oa_aa_kappa(&fill(&[[25, 25], [25, 25]])).unwrap();
    assert_eq!(oa, 0.5);
    assert_eq!(kappa, 0.0);
    pass(8, "oa/aa/kappa reproduce (0.7, 0.7, 0.4) plus the kappa=1 and kappa=0 cases");
}

// -------------------------------------------------------------------------
// 9. Feature dimension contracts
// -------------------------------------------------------------------------

#[test]
fn criterion_09_feature_contracts() {
    // dimension grid
    for bands in [8usize, 16] {
        let mut rng = CounterRng::new(bands as u64);
        let values: Vec<f64> = (0..10 * 10 * bands).map(|_| rng.next_f64()).collect();
        let cube = HyperCube::new(10, 10, bands, values).unwrap();
        let f = dwt3d_features(&cube, &[(4, 4)]).unwrap();
        assert_eq!(f.dim(), 45 * bands);
        for m in [1usize, 3] {
            for n in [1usize, 2, 4] {
                let spec = EmpSpec {
                    pca_components: m,
                    max_se_radius: n,
                };
                let f = emp_features(&cube, &[(4, 4)], spec).unwrap();
                assert_eq!(f.dim(), m * (2 * n + 1) + bands, "m={m} n={n} B={bands}");
            }
        }
    }
    // Haar reconstruction: each packet node is the sum of its two
    // children (smoothing is linear, so the identity survives it)
    {
        let mut rng = CounterRng::new(91);
        let values: Vec<f64> = (0..9 * 9 * 8).map(|_| rng.next_f64()).collect();
        let cube = HyperCube::new(9, 9, 8, values).unwrap();
        for axis in [DwtAxis::X, DwtAxis::Y, DwtAxis::Lambda] {
            let nodes = dwt_subcubes(&cube, axis).unwrap();
            for k in 0..7 {
                let (parent, lo, hi) = (
                    nodes[k].values(),
                    nodes[2 * k + 1].values(),
                    nodes[2 * k + 2].values(),
                );
                for i in 0..parent.len() {
                    assert!(
                        (lo[i] + hi[i] - parent[i]).abs() < 1e-12,
                        "{axis:?} node {k} sample {i}"
                    );
                }
            }
        }
    }
    // granulometry ordering on 100 random planes
    let mut rng = CounterRng::new(99);
    for trial in 0..100 {
        let plane: Vec<f64> = (0..16 * 16).map(|_| rng.next_f64()).collect();
        for r in 1..=3usize {
            let (a, b) = (
                morph_open(&plane, 16, 16, r + 1),
                morph_open(&plane, 16, 16, r),
            );
            let (ca, cb) = (
                morph_close(&plane, 16, 16, r + 1),
                morph_close(&plane, 16, 16, r),
            );
            for i in 0..plane.len() {
                assert!(a[i] <= b[i] + 1e-12, "trial {trial} open r={r} idx {i}");
                assert!(ca[i] + 1e-12 >= cb[i], "trial {trial} close r={r} idx {i}");
            }
        }
    }
    pass(9, "Dwt3d D=45B, Emp D=m(2n+1)+B, Haar reconstruction to 1e-12, granulometry ordering on 100 planes");
}

// -------------------------------------------------------------------------
// 10. Full-run determinism through the CLI
// -------------------------------------------------------------------------

#[test]
fn criterion_10_run_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_hsieval");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let config = format!(
            "scene.height = 48\nscene.width = 48\nscene.bands = 8\nscene.classes = 4\n\
             scene.layout = grid:8\nscene.separation = 1.5\nscene.noise_sigma = 0.5\n\
             scene.seed = 3\nstrategy = controlled\nrates = 0.05,0.1\nfeature = mean:3\n\
             classifier = knn:1\nrepetitions = 3\nmaster_seed = 12\noutput_dir = {}\n",
            out.display()
        );
        let cfg_path = dir.path().join(format!("cfg_{name}.txt"));
        std::fs::write(&cfg_path, config).unwrap();
        let status = std::process::Command::new(exe)
            .args(["run", "--config"])
            .arg(&cfg_path)
            .status()
            .unwrap();
        assert!(status.success(), "run {name} failed");
        outputs.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "results.csv differ between runs");
    assert!(!outputs[0].is_empty());
    pass(10, "two identical `run` invocations produce byte-identical results.csv");
}
