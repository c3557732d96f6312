//! Deterministic synthetic scenes: a small RGB image plus DOTA-style
//! annotation text. Shared by the fixture generator and the tests that
//! check the bundled copies are current.

use image::{Rgb, RgbImage};

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u32 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) as u32
    }

    fn range(&mut self, lo: u32, hi: u32) -> u32 {
        lo + self.next() % (hi - lo + 1)
    }
}

pub struct Scene {
    pub id: String,
    pub image: RgbImage,
    /// `None` means the scene ships without an annotation file.
    pub annotations: Option<String>,
}

fn color(class: &str) -> Rgb<u8> {
    match class {
        "harbor" => Rgb([70, 90, 120]),
        "ship" => Rgb([230, 230, 220]),
        "bridge" => Rgb([150, 140, 120]),
        "roundabout" => Rgb([110, 150, 90]),
        "small-vehicle" => Rgb([200, 40, 40]),
        "large-vehicle" => Rgb([240, 180, 30]),
        "plane" => Rgb([245, 245, 245]),
        _ => Rgb([20, 20, 20]),
    }
}

fn paint(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, c: Rgb<u8>) {
    for y in y0..=y1.min(img.height() - 1) {
        for x in x0..=x1.min(img.width() - 1) {
            img.put_pixel(x, y, c);
        }
    }
}

fn rect_line(class: &str, x0: u32, y0: u32, x1: u32, y1: u32, difficult: u8) -> String {
    format!("{x0} {y0} {x1} {y0} {x1} {y1} {x0} {y1} {class} {difficult}\n")
}

/// Scene `i` of the mini dataset. Scenes 3 and 6 cover the missing-file and
/// missing-context cases; scene 8 carries a class outside the class list.
pub fn scene(i: usize) -> Scene {
    let mut rng = Lcg(0x9e37_79b9 ^ (i as u64 * 0x1000_0001));
    let w = 64 + 16 * (i as u32 % 4);
    let h = 48 + 8 * (i as u32 % 3);
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let g = ((x * 3 + y * 5 + i as u32 * 11) % 40) as u8;
        Rgb([40 + g, 70 + g / 2, 50 + g])
    });
    let mut text = String::from("imagesource:synthetic\ngsd:0.5\n");

    if i != 6 {
        let hx1 = rng.range(8, 16);
        paint(&mut img, 0, 0, hx1, h - 1, color("harbor"));
        text += &rect_line("harbor", 0, 0, hx1, h - 1, 0);
        for k in 0..rng.range(1, 3) {
            let y = 4 + k * 12;
            let x = hx1 + 2;
            paint(&mut img, x, y, x + 6, y + 3, color("ship"));
            text += &rect_line("ship", x, y, x + 6, y + 3, (k == 2) as u8);
        }
    } else {
        paint(&mut img, 30, 20, 36, 23, color("ship"));
        text += &rect_line("ship", 30, 20, 36, 23, 0);
    }

    let by = rng.range(h / 3, h / 2);
    paint(&mut img, 24, by, w - 1, by + 4, color("bridge"));
    text += &rect_line("bridge", 24, by, w - 1, by + 4, 0);
    let vx = rng.range(30, w - 12);
    paint(&mut img, vx, by + 1, vx + 3, by + 2, color("small-vehicle"));
    text += &rect_line("small-vehicle", vx, by + 1, vx + 3, by + 2, 0);
    if i.is_multiple_of(2) {
        paint(
            &mut img,
            vx + 6,
            by + 1,
            vx + 11,
            by + 3,
            color("large-vehicle"),
        );
        text += &rect_line("large-vehicle", vx + 6, by + 1, vx + 11, by + 3, 0);
    }

    if i % 3 == 1 {
        let (cx, cy) = (w as i64 - 14, h as i64 - 10);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let d = (x - cx).abs() + (y - cy).abs();
                if d <= 6 {
                    img.put_pixel(x as u32, y as u32, color("roundabout"));
                }
            }
        }
        text += &format!(
            "{} {} {} {} {} {} {} {} roundabout 0\n",
            cx,
            cy - 6,
            cx + 6,
            cy,
            cx,
            cy + 6,
            cx - 6,
            cy
        );
        let sx = cx as u32 - 2;
        paint(
            &mut img,
            sx,
            cy as u32 + 7,
            sx + 2,
            cy as u32 + 8,
            color("small-vehicle"),
        );
        text += &rect_line("small-vehicle", sx, cy as u32 + 7, sx + 2, cy as u32 + 8, 1);
    }

    if i == 8 {
        text += "40.5 3.25 52 3.25 52 9.75 40.5 9.75 container-crane 0\n";
    }

    Scene {
        id: format!("mini_{i:02}"),
        image: img,
        annotations: (i != 3).then_some(text),
    }
}

pub const SCENES: usize = 10;
