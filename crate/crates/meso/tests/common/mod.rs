//! Synthetic fixture images with a strong per-class color/texture signal.

use meso::preprocess::Image;
use rand::Rng;

/// Per-class base colors: red-, green- and blue-dominant.
const BASE: [[u8; 3]; 3] = [[200, 40, 40], [40, 200, 40], [40, 40, 200]];

/// Deterministic class-patterned image: class base color, a class-specific
/// stripe/checker texture, and seeded pixel noise.
pub fn class_image(class: usize, index: usize, size: usize, seed: u64) -> Image {
    let mut rng = meso::rng::stream(seed, 0xf1f7, (class as u64) << 32 | index as u64);
    let base = BASE[class % 3];
    let period = (size / 8).max(2);
    let mut img = Image::filled(size, size, [0, 0, 0]).unwrap();
    for y in 0..size {
        for x in 0..size {
            let on = match class % 3 {
                0 => (y / period) % 2 == 0,
                1 => (x / period) % 2 == 0,
                _ => (x / period + y / period) % 2 == 0,
            };
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let v = if on { base[ch] as i32 } else { base[ch] as i32 / 2 };
                let noise: i32 = rng.gen_range(-25..=25);
                px[ch] = (v + noise).clamp(0, 255) as u8;
            }
            img.set_pixel(x, y, px);
        }
    }
    img
}

/// Balanced in-memory dataset: `per_class` images for each named class.
pub fn synthetic_dataset(
    class_names: &[&str],
    per_class: usize,
    size: usize,
    seed: u64,
) -> meso::dataset::InMemoryDataset {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for class in 0..class_names.len() {
        for index in 0..per_class {
            images.push(class_image(class, index, size, seed));
            labels.push(class);
        }
    }
    meso::dataset::InMemoryDataset::new(
        images,
        labels,
        class_names.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}
