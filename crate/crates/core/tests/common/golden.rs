//! Golden `.fus` cases: edge shapes a reader must handle.

use probfuse::FusedTensor;

fn names(extra: &[&str]) -> Vec<String> {
    ["R", "G", "B"]
        .iter()
        .chain(extra)
        .map(|s| s.to_string())
        .collect()
}

fn fill(n: usize, salt: u32) -> Vec<f32> {
    (0..n as u32)
        .map(|i| ((i.wrapping_mul(2654435761) ^ salt) % 1021) as f32 / 1020.0)
        .collect()
}

pub fn cases() -> Vec<(&'static str, FusedTensor)> {
    let mk = |extra: &[&str], h: usize, w: usize, salt| {
        let n = names(extra);
        let len = n.len() * h * w;
        FusedTensor::new(n, h, w, fill(len, salt)).unwrap()
    };
    vec![
        ("one_by_one", mk(&["ship"], 1, 1, 1)),
        ("rgb_only", mk(&[], 5, 7, 2)),
        (
            "non_square",
            mk(&["ship", "small-vehicle", "large-vehicle"], 3, 11, 3),
        ),
        ("exact_values", {
            let n = names(&["harbor"]);
            let mut data = vec![
                0.0f32,
                1.0,
                0.5,
                f32::EPSILON,
                1.0 - f32::EPSILON / 2.0,
                1e-30,
            ];
            data.extend([0.25f32; 6]);
            data.extend([0.125f32, 0.0, 1.0, 0.75, 1.0 / 3.0, 2.0 / 3.0]);
            data.extend([0.0f32; 6]);
            FusedTensor::new(n, 2, 3, data).unwrap()
        }),
    ]
}
