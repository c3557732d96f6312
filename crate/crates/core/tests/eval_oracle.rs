mod common;

use common::XorShift;
use probfuse::{
    average_precision, evaluate, iou, BBox, Detection, EvalOptions, GroundTruth, Interpolation,
};
use proptest::prelude::*;

type B = BBox<f64>;

fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> B {
    BBox::new(x0, y0, x1, y1).unwrap()
}

fn opts(classes: &[&str]) -> EvalOptions<f64> {
    EvalOptions {
        classes: classes.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
}

fn oracle_iou(a: &B, b: &B) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let ua = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min)
        - inter;
    if ua <= 0.0 {
        0.0
    } else {
        inter / ua
    }
}

/// Greedy matching and precision-envelope AP written from scratch for a
/// single image and class.
fn oracle_ap(dets: &[(f64, B)], gts: &[B], thr: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].0.partial_cmp(&dets[a].0).unwrap().then(a.cmp(&b)));
    let mut used = vec![false; gts.len()];
    let mut tp_flags = Vec::new();
    for &i in &order {
        let mut best = -1.0;
        let mut best_j = None;
        for (j, g) in gts.iter().enumerate() {
            if used[j] {
                continue;
            }
            let o = oracle_iou(&dets[i].1, g);
            if o > best {
                best = o;
                best_j = Some(j);
            }
        }
        let hit = best_j.is_some() && (best > thr);
        if hit {
            used[best_j.unwrap()] = true;
        }
        tp_flags.push(hit);
    }
    let n = tp_flags.len();
    let prec: Vec<f64> = (0..n)
        .map(|k| tp_flags[..=k].iter().filter(|&&t| t).count() as f64 / (k + 1) as f64)
        .collect();
    let mut ap = 0.0;
    for k in 0..n {
        if tp_flags[k] {
            let envelope = prec[k..].iter().cloned().fold(0.0, f64::max);
            ap += envelope / gts.len() as f64;
        }
    }
    Some(ap)
}

fn random_box(rng: &mut XorShift) -> B {
    let x = (rng.below(40)) as f64;
    let y = (rng.below(40)) as f64;
    let w = 1.0 + rng.below(15) as f64;
    let h = 1.0 + rng.below(15) as f64;
    bx(x, y, x + w, y + h)
}

fn jitter(rng: &mut XorShift, b: &B) -> B {
    let mut j = || rng.below(7) as f64 - 3.0;
    let (dx, dy, dw, dh) = (j(), j(), j(), j());
    bx(
        b.x_min + dx,
        b.y_min + dy,
        (b.x_max + dx + dw).max(b.x_min + dx + 1.0),
        (b.y_max + dy + dh).max(b.y_min + dy + 1.0),
    )
}

#[test]
fn iou_fixture() {
    let v = iou(&bx(0.0, 0.0, 10.0, 10.0), &bx(5.0, 5.0, 15.0, 15.0));
    assert!((v - 1.0 / 7.0).abs() <= 1e-12);
}

#[test]
fn tp_fp_tp_against_two_truths() {
    let scored = [(0.9f64, true), (0.8, false), (0.7, true)];
    let ap = average_precision(&scored, 2, Interpolation::AllPoint).unwrap();
    assert!((ap - 0.833_333_333_333).abs() <= 1e-9, "{ap}");
}

#[test]
fn iou_exactly_at_threshold_is_false_positive() {
    let g = bx(0.0, 0.0, 10.0, 10.0);
    let d = bx(0.0, 0.0, 10.0, 5.0);
    assert_eq!(iou(&d, &g), 0.5);
    let gts = [GroundTruth::new("a", "ship", g, false)];
    let dets = [Detection::new("a", "ship", d, 0.9).unwrap()];
    let strict = evaluate(&dets, &gts, &opts(&["ship"])).unwrap();
    assert_eq!(strict.class("ship").unwrap().n_fp, 1);
    assert_eq!(strict.map, 0.0);
    let inclusive = evaluate(
        &dets,
        &gts,
        &EvalOptions {
            inclusive: true,
            ..opts(&["ship"])
        },
    )
    .unwrap();
    assert_eq!(inclusive.map, 1.0);
}

#[test]
fn random_instances_match_oracle() {
    let mut rng = XorShift(0x00c0_ffee);
    for inst in 0..100 {
        let n_gt = rng.below(6) as usize;
        let gts: Vec<B> = (0..n_gt).map(|_| random_box(&mut rng)).collect();
        let mut dets = Vec::new();
        for g in &gts {
            if rng.below(4) != 0 {
                dets.push((rng.unit(), jitter(&mut rng, g)));
            }
        }
        for _ in 0..rng.below(5) {
            dets.push((rng.unit(), random_box(&mut rng)));
        }
        let gt_list: Vec<_> = gts
            .iter()
            .map(|b| GroundTruth::new("i", "ship", *b, false))
            .collect();
        let det_list: Vec<_> = dets
            .iter()
            .map(|(c, b)| Detection::new("i", "ship", *b, *c).unwrap())
            .collect();
        let report = evaluate(&det_list, &gt_list, &opts(&["ship"])).unwrap();
        let got = report.class("ship").unwrap().ap;
        let want = oracle_ap(&dets, &gts, 0.5);
        match (got, want) {
            (None, None) => {}
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "instance {inst}: {a} vs {b}"),
            other => panic!("instance {inst}: {other:?}"),
        }
    }
}

fn scene() -> impl Strategy<Value = (Vec<GroundTruth<f64>>, Vec<Detection<f64>>)> {
    let boxes = prop::collection::vec(
        (0u8..3, 0u8..2, 0u32..40, 0u32..40, 1u32..12, 1u32..12),
        0..12,
    );
    (
        boxes.clone(),
        prop::collection::vec(
            (0u8..3, 0u8..2, 0u32..40, 0u32..40, 1u32..12, 1u32..12),
            0..16,
        ),
    )
        .prop_map(|(g, d)| {
            let classes = ["ship", "harbor", "plane"];
            let gts = g
                .into_iter()
                .map(|(c, im, x, y, w, h)| {
                    let b = bx(x as f64, y as f64, (x + w) as f64, (y + h) as f64);
                    GroundTruth::new(&format!("im{im}"), classes[c as usize], b, false)
                })
                .collect();
            let n = d.len();
            let dets = d
                .into_iter()
                .enumerate()
                .map(|(i, (c, im, x, y, w, h))| {
                    let b = bx(x as f64, y as f64, (x + w) as f64, (y + h) as f64);
                    let conf = (i as f64 + 1.0) / (n as f64 + 1.0);
                    Detection::new(&format!("im{im}"), classes[c as usize], b, conf).unwrap()
                })
                .collect();
            (gts, dets)
        })
}

const CLASSES: [&str; 3] = ["ship", "harbor", "plane"];

proptest! {
    #[test]
    fn permutation_invariant((gts, dets) in scene(), seed in any::<u64>()) {
        let base = evaluate(&dets, &gts, &opts(&CLASSES)).unwrap();
        let mut rng = XorShift(seed | 1);
        let mut d2 = dets.clone();
        let mut g2 = gts.clone();
        for i in (1..d2.len()).rev() {
            d2.swap(i, rng.below(i as u64 + 1) as usize);
        }
        for i in (1..g2.len()).rev() {
            g2.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let other = evaluate(&d2, &g2, &opts(&CLASSES)).unwrap();
        for (a, b) in base.per_class.iter().zip(&other.per_class) {
            prop_assert_eq!(a.n_tp, b.n_tp);
            prop_assert_eq!(a.n_gt, b.n_gt);
            match (a.ap, b.ap) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn stricter_threshold_never_adds_true_positives((gts, dets) in scene(), t in 0.05f64..0.9, dt in 0.0f64..0.09) {
        let lo = evaluate(&dets, &gts, &EvalOptions { iou_threshold: t, ..opts(&CLASSES) }).unwrap();
        let hi = evaluate(&dets, &gts, &EvalOptions { iou_threshold: t + dt, ..opts(&CLASSES) }).unwrap();
        let tp = |r: &probfuse::EvalReport<f64>| r.per_class.iter().map(|c| c.n_tp).sum::<usize>();
        prop_assert!(tp(&hi) <= tp(&lo));
    }

    #[test]
    fn confidence_scaling_invariant((gts, dets) in scene(), k in 0.01f64..1.0) {
        let a = evaluate(&dets, &gts, &opts(&CLASSES)).unwrap();
        let scaled: Vec<_> = dets.iter().map(|d| Detection { confidence: d.confidence * k, ..d.clone() }).collect();
        let b = evaluate(&scaled, &gts, &opts(&CLASSES)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn map_bounds_and_perfect_detector((gts, dets) in scene()) {
        let r = evaluate(&dets, &gts, &opts(&CLASSES)).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.map));
        for c in &r.per_class {
            prop_assert_eq!(c.ap.is_none(), c.n_gt == 0);
            prop_assert!(c.n_tp <= c.n_gt);
        }
        let perfect: Vec<_> = gts
            .iter()
            .map(|g| Detection::new(&g.image_id, &g.class_name, g.bbox, 0.9).unwrap())
            .collect();
        let p = evaluate(&perfect, &gts, &opts(&CLASSES)).unwrap();
        if !gts.is_empty() {
            prop_assert_eq!(p.map, 1.0);
        }
    }

    #[test]
    fn all_point_ap_matches_envelope_sum(flags in prop::collection::vec(any::<bool>(), 0..40), extra in 0usize..5) {
        let n_tp = flags.iter().filter(|&&f| f).count();
        let n_gt = n_tp + extra;
        prop_assume!(n_gt > 0);
        let scored: Vec<(f64, bool)> = flags.iter().enumerate().map(|(i, &f)| (1.0 - i as f64 / 64.0, f)).collect();
        let got = average_precision(&scored, n_gt, Interpolation::AllPoint).unwrap();
        let prec: Vec<f64> = (0..flags.len())
            .map(|k| flags[..=k].iter().filter(|&&t| t).count() as f64 / (k + 1) as f64)
            .collect();
        let want: f64 = (0..flags.len())
            .filter(|&k| flags[k])
            .map(|k| prec[k..].iter().cloned().fold(0.0, f64::max) / n_gt as f64)
            .sum();
        prop_assert!((got - want).abs() <= 1e-12);
    }
}
