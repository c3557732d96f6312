#![allow(dead_code)]

pub mod golden;
pub mod synth;

use probfuse::BinaryMask;
use proptest::prelude::*;

/// Small deterministic generator for fixtures that do not need shrinking.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Random mask with roughly `density` set cells and at least one set cell.
pub fn random_mask(rng: &mut XorShift, w: usize, h: usize, density: f64) -> BinaryMask {
    let mut m = BinaryMask::from_fn(w, h, "m", |_, _| rng.unit() < density).unwrap();
    if m.is_blank() {
        let i = rng.below((w * h) as u64) as usize;
        m.set(i % w, i / w, true);
    }
    m
}

/// Non-empty masks up to `max` x `max`.
pub fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max, 0.0f64..0.6, any::<u64>()).prop_map(|(w, h, density, seed)| {
        let mut rng = XorShift(seed | 1);
        random_mask(&mut rng, w, h, density)
    })
}

/// Independent Euclidean distance oracle in f64.
pub fn brute_distance(mask: &BinaryMask, x: usize, y: usize) -> f64 {
    mask.set_cells()
        .map(|(sx, sy)| {
            let dx = sx as f64 - x as f64;
            let dy = sy as f64 - y as f64;
            (dx * dx + dy * dy).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Every file under `root`, keyed by relative path.
pub fn tree_bytes(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(
        base: &std::path::Path,
        dir: &std::path::Path,
        out: &mut std::collections::BTreeMap<String, Vec<u8>>,
    ) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn mini_dataset() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_dataset")
}
