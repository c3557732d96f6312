mod common;

use common::XorShift;
use probfuse::{parse_annotations, rasterize, AnnotationRecord};

/// Even-odd ray casting with boundary points counted as inside.
fn inside(poly: &[(f64, f64); 4], px: f64, py: f64) -> bool {
    for i in 0..4 {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % 4];
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        let within = px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by);
        if cross == 0.0 && within {
            return true;
        }
    }
    let mut odd = false;
    for i in 0..4 {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % 4];
        if (ay > py) != (by > py) {
            let t = (py - ay) / (by - ay);
            if px < ax + t * (bx - ax) {
                odd = !odd;
            }
        }
    }
    odd
}

fn oracle(records: &[AnnotationRecord], class: &str, w: usize, h: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(
                records
                    .iter()
                    .filter(|r| r.class_name == class)
                    .any(|r| inside(&r.polygon, x as f64, y as f64)),
            );
        }
    }
    out
}

fn random_quad(rng: &mut XorShift, span: f64, step: f64) -> [(f64, f64); 4] {
    let steps = (span / step) as u64;
    let mut c = || rng.below(steps + 1) as f64 * step;
    [(c(), c()), (c(), c()), (c(), c()), (c(), c())]
}

#[test]
fn square_from_fixture() {
    let recs = parse_annotations("2 2 5 2 5 5 2 5 ship 0").unwrap();
    let mask = rasterize(&recs, "ship", 8, 8).unwrap();
    assert_eq!(mask.cells(), oracle(&recs, "ship", 8, 8).as_slice());
    assert_eq!(mask.count(), 16);
}

#[test]
fn two_disjoint_squares_union() {
    let recs =
        parse_annotations("1 1 3 1 3 3 1 3 ship 0\n5.5 4 7 4 7 6.5 5.5 6.5 ship 1\n").unwrap();
    let mask = rasterize(&recs, "ship", 9, 9).unwrap();
    assert_eq!(mask.cells(), oracle(&recs, "ship", 9, 9).as_slice());
    assert_eq!(mask.count(), 9 + 2 * 3);
}

#[test]
fn random_quads_on_integer_and_quarter_grids() {
    let mut rng = XorShift(0xfeed_beef);
    for step in [1.0, 0.25, 0.5] {
        for trial in 0..400 {
            let w = 1 + rng.below(32) as usize;
            let h = 1 + rng.below(32) as usize;
            let n = 1 + rng.below(3) as usize;
            let records: Vec<AnnotationRecord> = (0..n)
                .map(|_| AnnotationRecord {
                    class_name: "ship".into(),
                    polygon: random_quad(&mut rng, 36.0, step),
                    difficulty: 0,
                })
                .collect();
            let mask = rasterize(&records, "ship", w, h).unwrap();
            assert_eq!(
                mask.cells(),
                oracle(&records, "ship", w, h).as_slice(),
                "step {step} trial {trial}: {records:?}"
            );
        }
    }
}

#[test]
fn random_real_valued_quads() {
    let mut rng = XorShift(77);
    for _ in 0..300 {
        let poly = [
            (rng.unit() * 30.0, rng.unit() * 30.0),
            (rng.unit() * 30.0, rng.unit() * 30.0),
            (rng.unit() * 30.0, rng.unit() * 30.0),
            (rng.unit() * 30.0, rng.unit() * 30.0),
        ];
        let rec = vec![AnnotationRecord {
            class_name: "bridge".into(),
            polygon: poly,
            difficulty: 0,
        }];
        let mask = rasterize(&rec, "bridge", 28, 28).unwrap();
        assert_eq!(
            mask.cells(),
            oracle(&rec, "bridge", 28, 28).as_slice(),
            "{poly:?}"
        );
    }
}
