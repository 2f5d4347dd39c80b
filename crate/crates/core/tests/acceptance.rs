//! Acceptance criteria A1 to A9. Each test prints one `PASS`/`FAIL` line
//! and then asserts it. Run with `--nocapture` to see the lines.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skil_core::autodiff::{central_differences, compare_gradients, Tape};
use skil_core::deform::{branch_cuts, deform_combined, deform_combined_traced, deform_width, DeformConfig, PerlinConfig};
use skil_core::grid::{distance_transform_l1, dist_inf};
use skil_core::losses::{fit_logits, loss, skil_dice_loss, LossConfig, LossKind};
use skil_core::metrics::{dice, lineacc_length, lineacc_pos, MetricConfig, MetricScores};
use skil_core::morphology::{hard_skeleton, smooth_diffuse, DiffusionConfig};
use skil_core::{BinaryMask, ScalarField};

fn verdict(id: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let within = elapsed <= limit;
    let ok = pass && within;
    println!(
        "{id} {} ({:.2?} of {:.0?}) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(pass, "{id}: {detail}");
    assert!(within, "{id}: took {elapsed:.2?}, limit {limit:.0?}");
}

fn hline(h: usize, w: usize, top: usize, width: usize) -> BinaryMask {
    BinaryMask::from_fn(h, w, |r, _| r >= top && r < top + width)
}

fn subset_count(a: &BinaryMask, b: &BinaryMask) -> usize {
    a.and(b).unwrap().count()
}

#[test]
fn a1_distance_transform_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut mismatches = 0;
    for _ in 0..100 {
        let h = rng.gen_range(1..=16);
        let w = rng.gen_range(1..=16);
        let density = rng.gen_range(0.0..0.5);
        let mask = BinaryMask::from_fn(h, w, |_, _| rng.gen_bool(density));
        let ones: Vec<(usize, usize)> = mask.ones().collect();
        let d = distance_transform_l1(&mask);
        for r in 0..h {
            for c in 0..w {
                let expected = ones
                    .iter()
                    .map(|&(y, x)| (r.abs_diff(y) + c.abs_diff(x)) as f64)
                    .fold(dist_inf(h, w), f64::min);
                if d.get(r, c) != expected {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        "A1",
        mismatches == 0,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("{mismatches} mismatching pixels over 100 masks"),
    );
}

/// Distinct prediction values spread evenly over (0.05, 0.95) in random
/// order, with a Bernoulli(0.3) label.
fn gradient_instance(seed: u64, n: usize) -> (ScalarField, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..n * n)
        .map(|k| 0.05 + 0.9 * (k as f64 + 0.5) / (n * n) as f64)
        .collect();
    values.shuffle(&mut rng);
    let pred = ScalarField::new(n, n, values).unwrap();
    let label = BinaryMask::from_fn(n, n, |_, _| rng.gen_bool(0.3));
    (pred, label)
}

#[test]
fn a2_gradients_match_finite_differences() {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let mut summary = Vec::new();
    let mut pass = true;
    for kind in LossKind::ALL {
        let mut worst: f64 = 0.0;
        let mut failing = 0;
        for seed in 0..10 {
            let (pred, label) = gradient_instance(0xA2_00 + seed, 24);
            let tape = Tape::new();
            let x = tape.leaf(pred.clone());
            let root = loss(kind, x, &label, &cfg).unwrap();
            let analytic = root.backward().unwrap().get(x).unwrap().clone();
            let numeric = central_differences(
                |p| {
                    let t = Tape::new();
                    loss(kind, t.leaf(p.clone()), &label, &cfg)?
                        .scalar()
                        .ok_or_else(|| skil_core::Error::InvalidField("non-scalar".into()))
                },
                &pred,
                1e-4,
            )
            .unwrap();
            let cmp = compare_gradients(&analytic, &numeric);
            worst = worst.max(cmp.max_rel_error);
            if cmp.max_rel_error >= 1e-3 {
                failing += 1;
            }
        }
        pass &= failing == 0;
        summary.push(format!("{kind}: max rel {worst:.2e}, {failing}/10 seeds over 1e-3"));
    }
    verdict("A2", pass, start.elapsed(), Duration::from_secs(120), &summary.join("; "));
}

#[test]
fn a3_translation_contrast() {
    let start = Instant::now();
    let cfg = MetricConfig::default();
    let label = hline(64, 48, 20, 1);
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1usize, 5, 10, 15] {
        let pred = hline(64, 48, 20 + d, 1);
        let expected = (-((d * d) as f64) / (cfg.sigma * cfg.sigma)).exp();
        let pos = lineacc_pos(&pred, &label, &cfg).unwrap();
        let dsc = dice(&pred, &label).unwrap();
        pass &= dsc == 0.0 && (pos - expected).abs() <= 1e-9;
        parts.push(format!("D={d}: dice {dsc}, pos {pos:.6} (want {expected:.6})"));
    }
    verdict("A3", pass, start.elapsed(), Duration::from_secs(1), &parts.join("; "));
}

#[test]
fn a4_position_ignores_width() {
    let start = Instant::now();
    let cfg = MetricConfig::default();
    let label = hline(40, 50, 20, 1);
    let scores: Vec<f64> = [1usize, 3, 5]
        .iter()
        .map(|&w| lineacc_pos(&hline(40, 50, 20 - w / 2, w), &label, &cfg).unwrap())
        .collect();
    let pass = scores.iter().all(|&s| s == scores[0]);
    verdict(
        "A4",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("widths 1, 3, 5 score {scores:?}"),
    );
}

#[test]
fn a5_skil_dice_grows_with_offset() {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let (h, w) = (80, 24);
    let label = hline(h, w, 30, 1);
    let values: Vec<f64> = (1..=20)
        .map(|d| {
            let tape = Tape::new();
            let pred = tape.constant(hline(h, w, 30 + d, 1).to_field());
            skil_dice_loss(pred, &label, &cfg).unwrap().scalar().unwrap()
        })
        .collect();
    let pass = values.windows(2).all(|p| p[1] > p[0]);
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    verdict(
        "A5",
        pass,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("D=1..20: {}", shown.join(" ")),
    );
}

/// Branches of widths 1, 5 and 9 on a 256×256 grid.
fn vessel_label() -> BinaryMask {
    BinaryMask::from_fn(256, 256, |r, c| {
        let horizontal = (76..81).contains(&r) && (16..240).contains(&c);
        let vertical = (150..159).contains(&c) && (80..240).contains(&r);
        let diagonal = r + 16 == c && (112..240).contains(&c);
        let thin = r == 200 && (20..140).contains(&c);
        horizontal || vertical || diagonal || thin
    })
}

#[test]
fn a6_equal_dice_different_combined() {
    let start = Instant::now();
    let label = vessel_label();
    let mcfg = MetricConfig::default();
    let scores: Vec<MetricScores> = (0..200)
        .map(|seed| {
            let cfg = DeformConfig {
                seed,
                ..DeformConfig::default()
            };
            let pred = deform_combined(&label, &cfg).unwrap();
            MetricScores::compute(&pred, &label, &mcfg).unwrap()
        })
        .collect();

    let mut pairs = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let gap = (scores[i].lineacc_combined - scores[j].lineacc_combined).abs();
            if (scores[i].dice - scores[j].dice).abs() <= 0.01 && gap >= 0.15 {
                pairs.push((gap, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Count pairs that share no deformation.
    let mut used = vec![false; scores.len()];
    let mut disjoint = Vec::new();
    for &(gap, i, j) in &pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            disjoint.push(gap);
        }
    }
    let top: Vec<String> = disjoint.iter().take(3).map(|g| format!("{g:.3}")).collect();
    verdict(
        "A6",
        disjoint.len() >= 3,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "{} qualifying pairs, {} disjoint; largest combined gaps {}",
            pairs.len(),
            disjoint.len(),
            top.join(", ")
        ),
    );
}

#[test]
fn a7_mixture_fit_lands_closer() {
    let start = Instant::now();
    let (h, w, offset) = (32, 48, 10);
    let label = hline(h, w, 11, 1);
    let cfg = LossConfig::default();
    let mcfg = MetricConfig::default();
    let (steps, lr) = (60, 30.0);
    let mut totals = [0.0; 2];
    for seed in 0..5 {
        // A confident line at the wrong offset over uncertain background.
        let mut rng = ChaCha8Rng::seed_from_u64(0xA7_00 + seed);
        let init = ScalarField::from_fn(h, w, |r, _| {
            let base = if r == 11 + offset { 3.0 } else { -1.0 };
            base + rng.gen_range(-2.0..2.0)
        });
        for (total, kind) in totals.iter_mut().zip([LossKind::Dice, LossKind::SkilDice]) {
            let out = fit_logits(&label, &init, kind, &cfg, steps, lr).unwrap();
            *total += lineacc_pos(&out.prediction.harden(), &label, &mcfg).unwrap();
        }
    }
    let [dice_only, mixture] = totals.map(|t| t / 5.0);
    verdict(
        "A7",
        mixture - dice_only >= 0.05,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("mean lineacc_pos: 4*dice {dice_only:.3}, 3*dice+skil-dice {mixture:.3}"),
    );
}

#[test]
fn a8_deformation_statistics() {
    let start = Instant::now();

    let thin = hline(48, 64, 10, 1);
    let thick = hline(48, 64, 26, 9);
    let bars = thin.or(&thick).unwrap();
    let (mut thin_cuts, mut thick_cuts) = (0, 0);
    for seed in 0..100 {
        let perlin = PerlinConfig {
            seed,
            ..PerlinConfig::default()
        };
        let noise = skil_core::deform::perlin_field(48, 64, &perlin).unwrap();
        let cfg = DeformConfig::default();
        let cuts = branch_cuts(&bars, &noise, cfg.alpha, cfg.p).unwrap();
        thin_cuts += subset_count(&cuts, &thin);
        thick_cuts += subset_count(&cuts, &thick);
    }
    let cuts_ok = thin_cuts > thick_cuts;

    let label = vessel_label();
    let base = hard_skeleton(&label).count() as f64;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let cfg = DeformConfig {
            seed,
            ..DeformConfig::default()
        };
        let n = hard_skeleton(&deform_width(&label, &cfg).unwrap()).count() as f64;
        worst = worst.max((n - base).abs() / base);
    }
    let width_ok = worst <= 0.2;

    let small = hline(16, 16, 7, 2);
    let mut fired = [0usize; 3];
    for seed in 0..400 {
        let cfg = DeformConfig {
            seed,
            apply_probability: 0.75,
            ..DeformConfig::default()
        };
        let (_, trace) = deform_combined_traced(&small, &cfg).unwrap();
        for (n, f) in fired.iter_mut().zip(trace.fired) {
            *n += f as usize;
        }
    }
    let rates = fired.map(|n| n as f64 / 400.0);
    let rates_ok = rates.iter().all(|r| (r - 0.75).abs() <= 0.05);

    verdict(
        "A8",
        cuts_ok && width_ok && rates_ok,
        start.elapsed(),
        Duration::from_secs(180),
        &format!(
            "cuts thin {thin_cuts} vs thick {thick_cuts}; worst skeleton change {:.1}%; firing rates {rates:?}",
            100.0 * worst
        ),
    );
}

#[test]
fn a9_metric_identities() {
    let start = Instant::now();
    let mcfg = MetricConfig::default();
    let shapes = [
        hline(20, 30, 8, 3),
        BinaryMask::from_fn(24, 24, |r, c| r == c || (r == 12 && c > 3)),
    ];
    let identical_ok = shapes.iter().all(|m| {
        MetricScores::compute(m, m, &mcfg)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 1.0)
    });

    let pred = BinaryMask::from_fn(3, 120, |r, c| r == 1 && c < 50);
    let label = BinaryMask::from_fn(3, 120, |r, c| r == 1 && c < 100);
    let length = lineacc_length(&pred, &label, &mcfg).unwrap();
    let length_err = (length - (-0.5f64).exp()).abs();
    let length_ok = hard_skeleton(&pred).count() == 50
        && hard_skeleton(&label).count() == 100
        && length_err <= 1e-6;

    let point = BinaryMask::from_fn(9, 9, |r, c| (r, c) == (4, 4)).to_field();
    let tape = Tape::new();
    let one_step = DiffusionConfig {
        s_border: 1,
        ..DiffusionConfig::default()
    };
    let diffused = smooth_diffuse(tape.constant(point), &one_step).unwrap().value().clone();
    let ring: Vec<f64> = [(3, 4), (5, 4), (4, 3), (4, 5)]
        .iter()
        .map(|&(r, c)| diffused.get(r, c))
        .collect();
    let diffusion_ok = one_step.iterations() == 1
        && diffused.get(4, 4) == 1.0
        && ring.iter().all(|v| (v - 0.18).abs() <= 1e-12);

    verdict(
        "A9",
        identical_ok && length_ok && diffusion_ok,
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "identical pairs {identical_ok}; length(50 vs 100) {length:.9} (|err| {length_err:.2e}); \
             diffusion support {} ring {ring:?}",
            diffused.get(4, 4)
        ),
    );
}
