//! Directory-based dataset ingestion, label mapping, deterministic
//! shuffling/splitting and batch assembly.
//!
//! Layout contract: `root/<ClassName>/*.ppm` (PNG behind the `png`
//! feature), with optional `foo.landmarks.json` sidecars next to each
//! image. Class order is lexicographic over subdirectory names.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;


use crate::error::{Error, Result};
use crate::preprocess::{
    center_crop_resize, compute_alignment, to_tensor, warp, Image, LandmarkSet, CANONICAL_SIZE,
};
use crate::rng;
use crate::tensor::Tensor;

/// One dataset sample: a path and its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub path: PathBuf,
    pub class: usize,
}

/// Deterministic scan result: lexicographic class order, samples sorted by
/// path within each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub class_counts: Vec<usize>,
}

/// A loaded training batch: normalized pixels and one-hot labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Tensor,
    pub y: Tensor,
    pub indices: Vec<usize>,
}

/// Anything the training loop can draw batches from.
pub trait DataSource {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn class_names(&self) -> &[String];
    /// Class index of each sample, aligned with `0..len()`.
    fn label(&self, index: usize) -> usize;
    fn load(&self, indices: &[usize]) -> Result<Batch>;
}

fn is_image_file(path: &Path) -> bool {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => {
            let ext = ext.to_ascii_lowercase();
            ext == "ppm" || (cfg!(feature = "png") && ext == "png")
        }
        None => false,
    }
}

/// Scan `root`: every immediate subdirectory is a class; each must hold at
/// least one image file, and at least two classes are required.
pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root {} is not a directory", root.display())));
    }
    let mut class_dirs: Vec<PathBuf> = fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.len() < 2 {
        return Err(Error::Data(format!(
            "dataset root {} has {} class directories; classification needs at least 2",
            root.display(),
            class_dirs.len()
        )));
    }

    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    let mut class_counts = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Data(format!("non-UTF-8 class directory {}", dir.display())))?
            .to_string();
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Data(format!("class directory {} holds no images", dir.display())));
        }
        class_counts.push(files.len());
        samples.extend(files.into_iter().map(|path| Sample { path, class }));
        class_names.push(name);
    }

    Ok(DatasetManifest {
        root: root.to_path_buf(),
        class_names,
        samples,
        class_counts,
    })
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn from_parts(&self, mut samples: Vec<Sample>) -> Self {
        samples.sort_by(|a, b| (a.class, &a.path).cmp(&(b.class, &b.path)));
        let mut class_counts = vec![0usize; self.class_names.len()];
        for s in &samples {
            class_counts[s.class] += 1;
        }
        Self {
            root: self.root.clone(),
            class_names: self.class_names.clone(),
            samples,
            class_counts,
        }
    }

    /// Per-class stratified split: `fraction` of each class (rounded, at
    /// least 1 on each side) goes to the first manifest. Disjoint, and the
    /// union is the original sample set.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0 < fraction && fraction < 1.0) {
            return Err(Error::Config(format!("split fraction must lie in (0,1), got {fraction}")));
        }
        let mut stream = rng::stream(seed, rng::tag::SPLIT, 0);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for class in 0..self.num_classes() {
            let mut idx: Vec<usize> = self
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.class == class)
                .map(|(i, _)| i)
                .collect();
            if idx.len() < 2 {
                return Err(Error::Data(format!(
                    "class '{}' has {} sample(s); splitting needs at least 2",
                    self.class_names[class],
                    idx.len()
                )));
            }
            idx.shuffle(&mut stream);
            let take = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
            for (i, &sample_idx) in idx.iter().enumerate() {
                if i < take {
                    first.push(self.samples[sample_idx].clone());
                } else {
                    second.push(self.samples[sample_idx].clone());
                }
            }
        }
        Ok((self.from_parts(first), self.from_parts(second)))
    }

    /// Downsample every class to the smallest class count using the seeded
    /// stream; sample order stays deterministic.
    pub fn balance(&self, seed: u64) -> Result<Self> {
        let target = *self
            .class_counts
            .iter()
            .min()
            .ok_or_else(|| Error::Data("balance of an empty manifest".into()))?;
        let mut stream = rng::stream(seed, rng::tag::BALANCE, 0);
        let mut kept = Vec::new();
        for class in 0..self.num_classes() {
            let mut idx: Vec<usize> = self
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.class == class)
                .map(|(i, _)| i)
                .collect();
            idx.shuffle(&mut stream);
            idx.truncate(target);
            kept.extend(idx.into_iter().map(|i| self.samples[i].clone()));
        }
        Ok(self.from_parts(kept))
    }

    /// `path,class` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,class\n");
        for s in &self.samples {
            out.push_str(&format!("{},{}\n", s.path.display(), self.class_names[s.class]));
        }
        out
    }
}

/// Sidecar path for an image: `foo.ppm` → `foo.landmarks.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("landmarks.json")
}

/// Decode + geometry for one on-disk image: landmark alignment when a
/// sidecar exists and `align` is set, center-crop fallback when the image
/// is not already at the target size.
pub fn load_image_prepared(path: &Path, align: bool, target: (usize, usize)) -> Result<Image> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let img = decode_image(&bytes)
        .map_err(|e| Error::Data(format!("cannot decode {}: {e}", path.display())))?;
    let sidecar = sidecar_path(path);
    if align && sidecar.is_file() && target == (CANONICAL_SIZE, CANONICAL_SIZE) {
        let text = fs::read_to_string(&sidecar)?;
        let landmarks = LandmarkSet::from_json(&text)?;
        let t = compute_alignment(&landmarks)?;
        return Ok(warp(&img, &t));
    }
    if (img.height, img.width) == target {
        return Ok(img);
    }
    if target == (CANONICAL_SIZE, CANONICAL_SIZE) {
        return Ok(center_crop_resize(&img));
    }
    Err(Error::Data(format!(
        "{} is {}x{}, expected {}x{}",
        path.display(),
        img.width,
        img.height,
        target.1,
        target.0
    )))
}

/// Load the given manifest rows into a normalized batch with one-hot
/// labels. `target` is the (height, width) the model expects.
pub fn load_batch(
    manifest: &DatasetManifest,
    indices: &[usize],
    align: bool,
    target: (usize, usize),
) -> Result<Batch> {
    if indices.is_empty() {
        return Err(Error::Data("load_batch: empty index list".into()));
    }
    let mut images = Vec::with_capacity(indices.len());
    for &i in indices {
        let sample = self_sample(manifest, i)?;
        images.push(load_image_prepared(&sample.path, align, target)?);
    }
    let refs: Vec<&Image> = images.iter().collect();
    let x = to_tensor(&refs)?;
    let y = one_hot(
        &indices
            .iter()
            .map(|&i| manifest.samples[i].class)
            .collect::<Vec<_>>(),
        manifest.num_classes(),
    )?;
    Ok(Batch { x, y, indices: indices.to_vec() })
}

fn self_sample(manifest: &DatasetManifest, index: usize) -> Result<&Sample> {
    manifest
        .samples
        .get(index)
        .ok_or_else(|| Error::Data(format!("sample index {index} out of range")))
}

/// One-hot encode class indices into an `[N, C]` tensor.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0f32; labels.len() * num_classes];
    for (r, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::Data(format!("label {c} out of range for {num_classes} classes")));
        }
        data[r * num_classes + c] = 1.0;
    }
    Tensor::from_vec(&[labels.len(), num_classes], data)
}

/// Disk-backed data source: a manifest plus loading policy.
#[derive(Debug, Clone)]
pub struct DiskDataset {
    pub manifest: DatasetManifest,
    pub align: bool,
    /// (height, width) expected by the consuming model.
    pub target: (usize, usize),
}

impl DiskDataset {
    pub fn new(manifest: DatasetManifest, align: bool, target: (usize, usize)) -> Self {
        Self { manifest, align, target }
    }
}

impl DataSource for DiskDataset {
    fn len(&self) -> usize {
        self.manifest.len()
    }

    fn class_names(&self) -> &[String] {
        &self.manifest.class_names
    }

    fn label(&self, index: usize) -> usize {
        self.manifest.samples[index].class
    }

    fn load(&self, indices: &[usize]) -> Result<Batch> {
        load_batch(&self.manifest, indices, self.align, self.target)
    }
}

/// In-memory data source used by the synthetic fixtures and tests.
#[derive(Debug, Clone)]
pub struct InMemoryDataset {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl InMemoryDataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Data(format!("label {bad} out of range")));
        }
        Ok(Self { images, labels, class_names })
    }
}

impl DataSource for InMemoryDataset {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    fn load(&self, indices: &[usize]) -> Result<Batch> {
        let refs: Vec<&Image> = indices.iter().map(|&i| &self.images[i]).collect();
        let x = to_tensor(&refs)?;
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        let y = one_hot(&labels, self.class_names.len())?;
        Ok(Batch { x, y, indices: indices.to_vec() })
    }
}

// ---------------------------------------------------------------------------
// Image decoding
// ---------------------------------------------------------------------------

/// Decode image bytes. Binary PPM (`P6`, maxval 255) is always supported;
/// 8-bit RGB/RGBA PNG decodes behind the `png` feature (alpha dropped).
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"P6") {
        return decode_ppm(bytes);
    }
    #[cfg(feature = "png")]
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        return decode_png(bytes);
    }
    Err(Error::Format(format!(
        "unrecognized image magic {:02x?} (offset 0)",
        &bytes[..bytes.len().min(4)]
    )))
}

struct PpmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PpmCursor<'a> {
    fn skip_space_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n')) {
                        self.pos += 1;
                    }
                }
                Some(_) => return Ok(()),
                None => {
                    return Err(Error::Format(format!(
                        "unexpected end of PPM header (offset {})",
                        self.pos
                    )))
                }
            }
        }
    }

    fn read_uint(&mut self) -> Result<usize> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| {
                    Error::Format(format!("PPM header value overflows (offset {start})"))
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format(format!(
                "expected integer in PPM header (offset {start})"
            )));
        }
        Ok(value)
    }
}

/// Binary PPM: `P6`, whitespace/comments, width, height, maxval 255, one
/// whitespace byte, then `3·w·h` raw RGB bytes.
fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::Format("bad PPM magic, expected P6 (offset 0)".into()));
    }
    let mut cur = PpmCursor { bytes, pos: 2 };
    let width = cur.read_uint()?;
    let height = cur.read_uint()?;
    let maxval_at = cur.pos;
    let maxval = cur.read_uint()?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "unsupported PPM maxval {maxval}, only 8-bit depth is supported (offset {maxval_at})"
        )));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(Error::Format(format!(
                "expected single whitespace after maxval (offset {})",
                cur.pos
            )))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("degenerate PPM extents {width}x{height} (offset 2)")));
    }
    let need = 3usize
        .checked_mul(width)
        .and_then(|v| v.checked_mul(height))
        .ok_or_else(|| Error::Format("PPM extents overflow (offset 2)".into()))?;
    let data = &bytes[cur.pos.min(bytes.len())..];
    if data.len() < need {
        return Err(Error::Format(format!(
            "truncated PPM payload: need {need} bytes, have {} (offset {})",
            data.len(),
            cur.pos
        )));
    }
    Image::new(width, height, data[..need].to_vec())
}

/// Canonical-form PPM encoding; `decode_ppm(encode_ppm(img)) == img`.
pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> Result<Image> {
    let dynimg = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG decode failed: {e}")))?;
    let rgb = dynimg.to_rgb8();
    Image::new(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_red_pixel_decodes() {
        let img = decode_image(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!((img.width, img.height), (1, 1));
        assert_eq!(img.pixels, vec![255, 0, 0]);
    }

    #[test]
    fn sixteen_bit_ppm_is_rejected() {
        let err = decode_image(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("65535"));
    }

    #[test]
    fn truncated_ppm_reports_offset() {
        let err = decode_image(b"P6\n2 2\n255\n\xff").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated"), "{msg}");
        assert!(msg.contains("offset"), "{msg}");
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_image(b"P6\n# made by hand\n2 1\n# another\n255\n\x01\x02\x03\x04\x05\x06")
            .unwrap();
        assert_eq!((img.width, img.height), (2, 1));
    }

    #[test]
    fn gradient_round_trips_bitwise() {
        let mut img = Image::filled(16, 16, [0, 0, 0]).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                img.set_pixel(x, y, [(x * 16) as u8, (y * 16) as u8, ((x + y) * 8) as u8]);
            }
        }
        let encoded = encode_ppm(&img);
        let back = decode_image(&encoded).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_ppm(&back), encoded);
    }

    fn write_tree(root: &Path, classes: &[(&str, usize)]) {
        for (name, count) in classes {
            let dir = root.join(name);
            fs::create_dir_all(&dir).unwrap();
            for i in 0..*count {
                let img = Image::filled(4, 4, [i as u8, 0, 0]).unwrap();
                fs::write(dir.join(format!("img_{i:03}.ppm")), encode_ppm(&img)).unwrap();
            }
        }
    }

    #[test]
    fn scan_orders_classes_lexicographically() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("FaceSwap", 3), ("Bonafide", 2), ("DeepFake", 4)]);
        let m = scan_dataset(tmp.path()).unwrap();
        assert_eq!(m.class_names, vec!["Bonafide", "DeepFake", "FaceSwap"]);
        assert_eq!(m.class_counts, vec![2, 4, 3]);
        assert_eq!(m.len(), 9);
        // re-scan is identical
        assert_eq!(scan_dataset(tmp.path()).unwrap(), m);
    }

    #[test]
    fn single_class_tree_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("Only", 3)]);
        assert!(matches!(scan_dataset(tmp.path()), Err(Error::Data(_))));
    }

    #[test]
    fn empty_class_dir_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 2)]);
        fs::create_dir_all(tmp.path().join("B")).unwrap();
        assert!(matches!(scan_dataset(tmp.path()), Err(Error::Data(_))));
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 10), ("B", 10)]);
        let m = scan_dataset(tmp.path()).unwrap();
        let (train, val) = m.split(0.5, 7).unwrap();
        assert_eq!(train.class_counts, vec![5, 5]);
        assert_eq!(val.class_counts, vec![5, 5]);
        let (train2, val2) = m.split(0.5, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
    }

    #[test]
    fn split_rejects_underfilled_classes() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 1), ("B", 5)]);
        let m = scan_dataset(tmp.path()).unwrap();
        assert!(matches!(m.split(0.5, 1), Err(Error::Data(_))));
    }

    #[test]
    fn balance_downsamples_to_smallest_class() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 7), ("B", 3), ("C", 5)]);
        let m = scan_dataset(tmp.path()).unwrap();
        let b = m.balance(11).unwrap();
        assert_eq!(b.class_counts, vec![3, 3, 3]);
        assert_eq!(b.balance(11).unwrap(), b);
    }

    #[test]
    fn load_batch_normalizes_and_one_hots() {
        let tmp = tempfile::tempdir().unwrap();
        let dir_a = tmp.path().join("A");
        let dir_b = tmp.path().join("B");
        fs::create_dir_all(&dir_a).unwrap();
        fs::create_dir_all(&dir_b).unwrap();
        let white = Image::filled(CANONICAL_SIZE, CANONICAL_SIZE, [255, 255, 255]).unwrap();
        fs::write(dir_a.join("w.ppm"), encode_ppm(&white)).unwrap();
        let black = Image::filled(CANONICAL_SIZE, CANONICAL_SIZE, [0, 0, 0]).unwrap();
        fs::write(dir_b.join("b.ppm"), encode_ppm(&black)).unwrap();

        let m = scan_dataset(tmp.path()).unwrap();
        let batch = load_batch(&m, &[0, 1], false, (CANONICAL_SIZE, CANONICAL_SIZE)).unwrap();
        assert_eq!(batch.x.shape(), &[2, 3, 256, 256]);
        let plane = 3 * 256 * 256;
        assert!(batch.x.data()[..plane].iter().all(|&v| v == 1.0));
        assert!(batch.x.data()[plane..].iter().all(|&v| v == 0.0));
        assert_eq!(batch.y.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn load_batch_reference_bytes_survive_to_tensor() {
        // 4x4 reference image with known bytes, loaded at its native size
        let tmp = tempfile::tempdir().unwrap();
        for class in ["A", "B"] {
            fs::create_dir_all(tmp.path().join(class)).unwrap();
        }
        let mut img = Image::filled(4, 4, [0, 0, 0]).unwrap();
        for (i, px) in img.pixels.iter_mut().enumerate() {
            *px = (i * 5) as u8;
        }
        fs::write(tmp.path().join("A/ref.ppm"), encode_ppm(&img)).unwrap();
        fs::write(
            tmp.path().join("B/other.ppm"),
            encode_ppm(&Image::filled(4, 4, [9, 9, 9]).unwrap()),
        )
        .unwrap();
        let m = scan_dataset(tmp.path()).unwrap();
        let batch = load_batch(&m, &[0], false, (4, 4)).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                for ch in 0..3 {
                    let want = img.pixels[3 * (y * 4 + x) + ch] as f32 / 255.0;
                    assert_eq!(batch.x.data()[ch * 16 + y * 4 + x], want);
                }
            }
        }
    }

    #[test]
    fn undecodable_file_error_names_the_path() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 1), ("B", 1)]);
        fs::write(tmp.path().join("A/bad.ppm"), b"not a ppm at all").unwrap();
        let m = scan_dataset(tmp.path()).unwrap();
        let err = load_batch(&m, &[0], false, (4, 4)).unwrap_err();
        assert!(err.to_string().contains("bad.ppm"), "{err}");
    }

    #[test]
    fn manifest_csv_lists_paths_and_classes() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &[("A", 1), ("B", 1)]);
        let m = scan_dataset(tmp.path()).unwrap();
        let csv = m.to_csv();
        assert!(csv.starts_with("path,class\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains(",A\n"));
        assert!(csv.contains(",B\n"));
    }

    proptest! {
        #[test]
        fn split_partitions_every_manifest(
            count_a in 2usize..12,
            count_b in 2usize..12,
            fraction in 0.15f64..0.85,
            seed in 0u64..1000,
        ) {
            let tmp = tempfile::tempdir().unwrap();
            write_tree(tmp.path(), &[("A", count_a), ("B", count_b)]);
            let m = scan_dataset(tmp.path()).unwrap();
            let (first, second) = m.split(fraction, seed).unwrap();
            // disjoint and union == original
            let mut all: Vec<&PathBuf> = first.samples.iter().chain(&second.samples).map(|s| &s.path).collect();
            all.sort();
            let mut want: Vec<&PathBuf> = m.samples.iter().map(|s| &s.path).collect();
            want.sort();
            prop_assert_eq!(all.len(), want.len());
            prop_assert_eq!(all, want);
            // per-class proportion within ±1 sample
            for c in 0..2 {
                let expect = fraction * m.class_counts[c] as f64;
                prop_assert!((first.class_counts[c] as f64 - expect).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
