use super::*;
use proptest::prelude::*;

fn hbar(h: usize, w: usize, top: usize, width: usize) -> BinaryMask {
    BinaryMask::from_fn(h, w, |r, _| r >= top && r < top + width)
}

fn vbar(h: usize, w: usize, left: usize, width: usize) -> BinaryMask {
    BinaryMask::from_fn(h, w, |_, c| c >= left && c < left + width)
}

#[test]
fn dice_and_iou_counts() {
    let line = BinaryMask::from_fn(5, 5, |r, c| r == 2 && c < 3);
    let longer = BinaryMask::from_fn(5, 5, |r, c| r == 2 && c < 4);
    assert!((dice(&line, &longer).unwrap() - 6.0 / 7.0).abs() < 1e-12);
    assert!((iou(&line, &longer).unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(dice(&line, &line).unwrap(), 1.0);
    assert_eq!(iou(&line, &line).unwrap(), 1.0);
    let other = BinaryMask::from_fn(5, 5, |r, _| r == 4);
    assert_eq!(dice(&line, &other).unwrap(), 0.0);
    assert_eq!(iou(&line, &other).unwrap(), 0.0);
    let empty = BinaryMask::zeros(5, 5);
    assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
    assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
    assert_eq!(dice(&line, &empty).unwrap(), 0.0);
    assert!(dice(&line, &BinaryMask::zeros(4, 5)).is_err());
}

#[test]
fn identical_masks_score_one_everywhere() {
    let cfg = MetricConfig::default();
    let shapes = [
        hbar(20, 30, 8, 3),
        BinaryMask::from_fn(20, 20, |r, c| r == c || (r == 10 && c > 4)),
        BinaryMask::from_fn(16, 16, |r, c| (4..12).contains(&r) && (4..12).contains(&c)),
    ];
    for m in shapes {
        let s = MetricScores::compute(&m, &m, &cfg).unwrap();
        for (name, v) in MetricScores::FIELDS.iter().zip(s.values()) {
            assert_eq!(v, 1.0, "{name}");
        }
    }
}

#[test]
fn parallel_lines_follow_closed_form() {
    let cfg = MetricConfig::default();
    for d in [1usize, 5, 10, 15] {
        let label = hbar(60, 40, 20, 1);
        let pred = hbar(60, 40, 20 + d, 1);
        let expected = (-((d * d) as f64) / (cfg.sigma * cfg.sigma)).exp();
        let got = lineacc_pos(&pred, &label, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-9, "D={d}: {got} vs {expected}");
        assert_eq!(dice(&pred, &label).unwrap(), 0.0);
    }
    let at_sigma = lineacc_pos(&hbar(60, 40, 30, 1), &hbar(60, 40, 20, 1), &cfg).unwrap();
    assert!((at_sigma - (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn position_ignores_width() {
    let cfg = MetricConfig::default();
    let label = hbar(30, 40, 14, 1);
    for w in [1, 3, 5] {
        let pred = hbar(30, 40, 15 - (w + 1) / 2, w);
        assert_eq!(lineacc_pos(&pred, &label, &cfg).unwrap(), 1.0, "width {w}");
    }
}

#[test]
fn position_empty_conventions() {
    let cfg = MetricConfig::default();
    let empty = BinaryMask::zeros(8, 8);
    let line = hbar(8, 8, 3, 1);
    assert_eq!(lineacc_pos(&empty, &empty, &cfg).unwrap(), 1.0);
    assert_eq!(lineacc_pos(&line, &empty, &cfg).unwrap(), 0.0);
    assert_eq!(lineacc_pos(&empty, &line, &cfg).unwrap(), 0.0);
    assert_eq!(lineacc_length(&empty, &empty, &cfg).unwrap(), 1.0);
    assert_eq!(lineacc_width(&empty, &empty, &cfg).unwrap(), 1.0);
}

#[test]
fn length_score_values() {
    let eps = 1e-3;
    assert_eq!(length_score(40, 40, eps), 1.0);
    let expected = (-(1.0 - 50.001 / 100.001f64)).exp();
    assert!((length_score(50, 100, eps) - expected).abs() < 1e-15);
    assert!((length_score(50, 100, eps) - (-0.5f64).exp()).abs() < 1e-5);

    let cfg = MetricConfig::default();
    let pred = BinaryMask::from_fn(5, 120, |r, c| r == 2 && c < 50);
    let label = BinaryMask::from_fn(5, 120, |r, c| r == 2 && c < 100);
    assert!((lineacc_length(&pred, &label, &cfg).unwrap() - expected).abs() < 1e-12);
    for r in [1.0f64, 1.5, 2.0] {
        let sp = (100.0 * r) as usize;
        assert!((length_score(sp, 100, eps) - (-(r - 1.0)).exp()).abs() < 1e-5);
    }
}

#[test]
fn width_score_values() {
    let eps = 1e-3;
    // Twice the area over the same skeleton.
    assert!((width_score(200, 100, 50, 50, eps) - (-0.5f64).exp()).abs() < 1e-5);
    // Half the length at the same width.
    assert!((width_score(50, 100, 25, 50, eps) - 1.0).abs() < 1e-5);

    let cfg = MetricConfig::default();
    for (wp, wl) in [(3usize, 1usize), (5, 3), (1, 3), (3, 5)] {
        let pred = hbar(30, 40, 15 - (wp + 1) / 2, wp);
        let label_w = hbar(30, 40, 15 - (wl + 1) / 2, wl);
        let expected = (-((wl as f64 / wp as f64) - 1.0).abs()).exp();
        let got = lineacc_width(&pred, &label_w, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-5, "{wp} vs {wl}: {got} vs {expected}");
    }

    // One of two full-height bars: half the area and half the skeleton.
    let both = vbar(20, 30, 5, 3).or(&vbar(20, 30, 20, 3)).unwrap();
    let one = vbar(20, 30, 5, 3);
    assert!((lineacc_width(&one, &both, &cfg).unwrap() - 1.0).abs() < 1e-5);
}

#[test]
fn combined_score() {
    let cfg = MetricConfig::default();
    assert_eq!(combine(1.0, 1.0, 1.0, 1.0, 1.0, &cfg), 1.0);
    assert_eq!(combine(0.5, 1.0, 1.0, 1.0, 1.0, &cfg), 0.75);
    assert_eq!(combine(0.0, 0.0, 0.0, 0.0, 0.0, &cfg), 0.0);
    let raw = MetricConfig {
        normalize_combined: false,
        ..cfg
    };
    assert_eq!(combine(1.0, 1.0, 1.0, 1.0, 1.0, &raw), 4.0);
    let m = hbar(10, 10, 4, 2);
    assert_eq!(lineacc_combined(&m, &m, &cfg).unwrap(), 1.0);
}

#[test]
fn config_validation() {
    let bad = MetricConfig {
        sigma: 0.0,
        ..MetricConfig::default()
    };
    assert!(bad.validate().is_err());
    let m = hbar(6, 6, 2, 1);
    assert!(lineacc_pos(&m, &m, &bad).is_err());
    assert!(lineacc_pos(&m, &BinaryMask::zeros(6, 7), &MetricConfig::default()).is_err());
}

proptest! {
    #[test]
    fn scores_in_unit_interval_and_position_symmetric(
        a in proptest::collection::vec(any::<bool>(), 144),
        b in proptest::collection::vec(any::<bool>(), 144),
    ) {
        let cfg = MetricConfig::default();
        let pa = BinaryMask::new(12, 12, a).unwrap();
        let pb = BinaryMask::new(12, 12, b).unwrap();
        let s = MetricScores::compute(&pa, &pb, &cfg).unwrap();
        for v in s.values() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let ab = lineacc_pos(&pa, &pb, &cfg).unwrap();
        let ba = lineacc_pos(&pb, &pa, &cfg).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}
