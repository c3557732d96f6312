//! Regenerates the bundled test fixtures:
//!
//! ```text
//! cargo run -p probfuse --example make_fixtures -- crates/core/tests/fixtures
//! ```

use std::path::PathBuf;

use probfuse::fused_format::encode;
use probfuse::FusedTensor;

#[path = "../tests/common/synth.rs"]
mod synth;

#[path = "../tests/common/golden.rs"]
mod golden;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures".into())
        .into();

    let ds = root.join("mini_dataset");
    std::fs::create_dir_all(ds.join("images"))?;
    std::fs::create_dir_all(ds.join("annotations"))?;
    for i in 0..synth::SCENES {
        let s = synth::scene(i);
        s.image
            .save(ds.join("images").join(format!("{}.png", s.id)))?;
        if let Some(text) = s.annotations {
            std::fs::write(ds.join("annotations").join(format!("{}.txt", s.id)), text)?;
        }
    }

    let gd = root.join("golden");
    std::fs::create_dir_all(&gd)?;
    for (name, t) in golden::cases() {
        let t: FusedTensor = t;
        std::fs::write(gd.join(format!("{name}.fus")), encode(&t)?)?;
    }
    println!("fixtures written under {}", root.display());
    Ok(())
}
