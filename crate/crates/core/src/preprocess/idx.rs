//! IDX container files (optionally gzip-compressed).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use super::ImageView;
use crate::error::{invalid, QbcError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Grayscale images with class labels. Pixels are kept as raw bytes and
/// exposed scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageDataset {
    rows: usize,
    cols: usize,
    labels: Vec<u8>,
    pixels: Vec<u8>,
}

impl ImageDataset {
    pub fn new(rows: usize, cols: usize, labels: Vec<u8>, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * rows * cols {
            return invalid(format!(
                "{} pixels do not hold {} images of {rows}x{cols}",
                pixels.len(),
                labels.len()
            ));
        }
        Ok(Self {
            rows,
            cols,
            labels,
            pixels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn image(&self, i: usize) -> ImageView<'_> {
        let size = self.rows * self.cols;
        ImageView::new(self.rows, self.cols, &self.pixels[i * size..(i + 1) * size])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, ImageView<'_>)> + '_ {
        (0..self.len()).map(move |i| (self.labels[i], self.image(i)))
    }

    pub fn contains_class(&self, class: u8) -> bool {
        self.labels.contains(&class)
    }

    /// Keeps only images whose label is in `classes`, preserving order.
    pub fn filter_classes(&self, classes: &[u8]) -> ImageDataset {
        let size = self.rows * self.cols;
        let mut labels = Vec::new();
        let mut pixels = Vec::new();
        for (i, &label) in self.labels.iter().enumerate() {
            if classes.contains(&label) {
                labels.push(label);
                pixels.extend_from_slice(&self.pixels[i * size..(i + 1) * size]);
            }
        }
        ImageDataset {
            rows: self.rows,
            cols: self.cols,
            labels,
            pixels,
        }
    }

    /// SHA-256 over dimensions, labels and pixels, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_be_bytes());
        h.update((self.cols as u64).to_be_bytes());
        h.update((self.labels.len() as u64).to_be_bytes());
        h.update(&self.labels);
        h.update(&self.pixels);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)
        .map_err(|e| QbcError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| QbcError::Format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| QbcError::Format(format!("{what}: truncated header")))
}

/// Parses an IDX image file body: magic, count, rows, cols, then pixels.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(QbcError::Format(format!(
            "images: magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let body = &bytes[16..];
    let want = count * rows * cols;
    if body.len() != want {
        return Err(QbcError::Format(format!(
            "images: header declares {want} pixel bytes, file has {}",
            body.len()
        )));
    }
    Ok((count, rows, cols, body.to_vec()))
}

/// Parses an IDX label file body: magic, count, then one byte per label.
pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(QbcError::Format(format!(
            "labels: magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(QbcError::Format(format!(
            "labels: header declares {count} labels, file has {}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

/// Loads an image file on its own: `(count, rows, cols, pixels)`.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    parse_images(&read_maybe_gzip(path.as_ref())?)
}

/// Loads an image file and its label file. Either may be gzip-compressed;
/// compression is detected from the leading bytes.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageDataset> {
    let (count, rows, cols, pixels) = parse_images(&read_maybe_gzip(images_path.as_ref())?)?;
    let labels = parse_labels(&read_maybe_gzip(labels_path.as_ref())?)?;
    if labels.len() != count {
        return Err(QbcError::Format(format!(
            "{count} images but {} labels",
            labels.len()
        )));
    }
    ImageDataset::new(rows, cols, labels, pixels)
}

/// Standard train/test split of an IDX dataset directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn existing(dir: &Path, stem: &str) -> PathBuf {
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(stem)
    }
}

/// Image and label paths of a split in the usual file layout
/// (`train-images-idx3-ubyte[.gz]`, `t10k-labels-idx1-ubyte[.gz]`, ...).
/// Gzipped files are preferred when both forms exist.
pub fn split_paths(dir: impl AsRef<Path>, split: Split) -> (PathBuf, PathBuf) {
    let dir = dir.as_ref();
    let p = split.prefix();
    (
        existing(dir, &format!("{p}-images-idx3-ubyte")),
        existing(dir, &format!("{p}-labels-idx1-ubyte")),
    )
}

pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<ImageDataset> {
    let (images, labels) = split_paths(dir, split);
    load_idx(images, labels)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    pub(crate) fn image_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [IMAGES_MAGIC, count, rows, cols] {
            out.extend(v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    pub(crate) fn label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(LABELS_MAGIC.to_be_bytes());
        out.extend((labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    fn gzip(bytes: &[u8]) -> Vec<u8> {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).unwrap();
        enc.finish().unwrap()
    }

    #[test]
    fn magic_constants() {
        assert_eq!(IMAGES_MAGIC, 2051);
        assert_eq!(LABELS_MAGIC, 2049);
    }

    #[test]
    fn raw_and_gzip_agree() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 28 * 28).map(|i| (i % 256) as u8).collect();
        let img = image_bytes(2, 28, 28, &pixels);
        let lab = label_bytes(&[3, 7]);
        fs::write(dir.path().join("i"), &img).unwrap();
        fs::write(dir.path().join("l"), &lab).unwrap();
        fs::write(dir.path().join("i.gz"), gzip(&img)).unwrap();
        fs::write(dir.path().join("l.gz"), gzip(&lab)).unwrap();
        let raw = load_idx(dir.path().join("i"), dir.path().join("l")).unwrap();
        let gz = load_idx(dir.path().join("i.gz"), dir.path().join("l.gz")).unwrap();
        assert_eq!(raw, gz);
        assert_eq!(raw.len(), 2);
        assert_eq!(raw.labels(), &[3, 7]);
        use crate::preprocess::Raster;
        assert_eq!(raw.image(1).pixel(0, 0), ((784 % 256) as f64) / 255.0);
    }

    #[test]
    fn count_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("i"), image_bytes(2, 2, 2, &[0; 8])).unwrap();
        fs::write(dir.path().join("l"), label_bytes(&[1, 2, 3])).unwrap();
        assert!(matches!(
            load_idx(dir.path().join("i"), dir.path().join("l")),
            Err(QbcError::Format(_))
        ));
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut img = image_bytes(1, 2, 2, &[0; 4]);
        assert!(parse_images(&img).is_ok());
        img[3] = 0x01;
        assert!(matches!(parse_images(&img), Err(QbcError::Format(_))));
        let short = image_bytes(1, 2, 2, &[0; 3]);
        assert!(matches!(parse_images(&short), Err(QbcError::Format(_))));
        assert!(matches!(parse_images(&[0, 0]), Err(QbcError::Format(_))));
        assert!(matches!(parse_labels(&image_bytes(1, 1, 1, &[0])), Err(QbcError::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_idx("/nonexistent/a", "/nonexistent/b"), Err(QbcError::Io(_))));
    }

    #[test]
    fn split_layout() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t10k-images-idx3-ubyte"), image_bytes(1, 1, 1, &[9])).unwrap();
        fs::write(dir.path().join("t10k-labels-idx1-ubyte.gz"), gzip(&label_bytes(&[4]))).unwrap();
        let (i, l) = split_paths(dir.path(), Split::Test);
        assert!(i.ends_with("t10k-images-idx3-ubyte"));
        assert!(l.ends_with("t10k-labels-idx1-ubyte.gz"));
        assert_eq!(load_split(dir.path(), Split::Test).unwrap().labels(), &[4]);
        assert!(matches!(load_split(dir.path(), Split::Train), Err(QbcError::Io(_))));
    }

    #[test]
    fn filter_and_digest() {
        let ds = ImageDataset::new(1, 2, vec![0, 1, 2, 1], vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let f = ds.filter_classes(&[1]);
        assert_eq!(f.labels(), &[1, 1]);
        assert_eq!(f.image(1).data(), &[7, 8]);
        assert_eq!(ds.digest(), ds.clone().digest());
        assert_ne!(ds.digest(), f.digest());
        assert_eq!(ds.digest().len(), 64);
    }
}
