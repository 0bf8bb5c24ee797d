//! Image preprocessing: IDX loading, block average pooling and Gaussian
//! binarization of the pooled features.

mod binarize;
mod idx;

pub use binarize::{
    fit_binarizer, fit_binarizer_with, fit_feature, gaussian_intersections, normal_density,
    BinarizerModel, FeatureGaussians, Intersections, SIGMA_FLOOR, SIGMA_REL_TOL, VALUE_RANGE,
};
pub use idx::{
    load_idx, load_idx_images, load_split, parse_images, parse_labels, split_paths, ImageDataset, Split, IMAGES_MAGIC,
    LABELS_MAGIC,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One pooled value per feature block.
pub type PooledVector = Vec<f64>;

/// A grayscale image with pixel values in `[0, 1]`.
pub trait Raster {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn pixel(&self, row: usize, col: usize) -> f64;
}

/// Borrowed 8-bit image; pixels read back divided by 255.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    rows: usize,
    cols: usize,
    data: &'a [u8],
}

impl<'a> ImageView<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [u8]) -> Self {
        assert_eq!(data.len(), rows * cols, "image buffer size");
        Self { rows, cols, data }
    }

    pub fn data(&self) -> &'a [u8] {
        self.data
    }
}

impl Raster for ImageView<'_> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn pixel(&self, row: usize, col: usize) -> f64 {
        f64::from(self.data[row * self.cols + col]) / 255.0
    }
}

/// Owned floating-point image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return invalid(format!("{} pixels for a {rows}x{cols} image", pixels.len()));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            pixels: vec![value; rows * cols],
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.cols + col] = value;
    }
}

impl Raster for GrayImage {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Block {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self {
            row,
            col,
            height,
            width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Average,
}

/// Sampling geometry: one block per feature, `blocks[i]` feeding `x_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub pooling: Pooling,
}

impl Default for FeatureSpec {
    /// Nine 7×7 blocks tiling the central 21×21 region of a 28×28 image,
    /// row-major.
    fn default() -> Self {
        let offsets = [3, 10, 17];
        let blocks = offsets
            .iter()
            .flat_map(|&r| offsets.iter().map(move |&c| Block::new(r, c, 7, 7)))
            .collect();
        Self {
            blocks,
            pooling: Pooling::Average,
        }
    }
}

impl FeatureSpec {
    pub fn n_features(&self) -> usize {
        self.blocks.len()
    }

    /// Checks that every block is non-empty and inside a `rows × cols` image.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.blocks.is_empty() {
            return invalid("feature spec has no blocks");
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.height == 0 || b.width == 0 {
                return invalid(format!("block {} is empty", i + 1));
            }
            if b.row + b.height > rows || b.col + b.width > cols {
                return invalid(format!(
                    "block {} ({},{} size {}x{}) exceeds the {rows}x{cols} image",
                    i + 1,
                    b.row,
                    b.col,
                    b.height,
                    b.width
                ));
            }
        }
        Ok(())
    }
}

/// Mean pixel value of each block.
pub fn pool_features<R: Raster + ?Sized>(image: &R, spec: &FeatureSpec) -> Result<PooledVector> {
    spec.validate(image.rows(), image.cols())?;
    Ok(spec
        .blocks
        .iter()
        .map(|b| {
            let mut sum = 0.0;
            for r in b.row..b.row + b.height {
                for c in b.col..b.col + b.width {
                    sum += image.pixel(r, c);
                }
            }
            sum / (b.height * b.width) as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_covers_centre() {
        let spec = FeatureSpec::default();
        assert_eq!(spec.n_features(), 9);
        assert_eq!(spec.blocks[0], Block::new(3, 3, 7, 7));
        assert_eq!(spec.blocks[4], Block::new(10, 10, 7, 7));
        assert_eq!(spec.blocks[8], Block::new(17, 17, 7, 7));
        assert!(spec.validate(28, 28).is_ok());
    }

    #[test]
    fn constant_image_pools_to_constant() {
        let img = GrayImage::filled(28, 28, 1.0);
        let pooled = pool_features(&img, &FeatureSpec::default()).unwrap();
        assert_eq!(pooled, vec![1.0; 9]);
    }

    #[test]
    fn partial_block_mean() {
        let mut img = GrayImage::filled(28, 28, 0.0);
        let spec = FeatureSpec {
            blocks: vec![Block::new(0, 0, 7, 7)],
            pooling: Pooling::Average,
        };
        for k in 0..10 {
            img.set(k / 7, k % 7, 1.0);
        }
        let pooled = pool_features(&img, &spec).unwrap();
        assert!((pooled[0] - 10.0 / 49.0).abs() < 1e-15);
        assert!((pooled[0] - 0.2041).abs() < 1e-4);
    }

    #[test]
    fn out_of_bounds_block() {
        let img = GrayImage::filled(28, 28, 0.5);
        let spec = FeatureSpec {
            blocks: vec![Block::new(22, 0, 7, 7)],
            pooling: Pooling::Average,
        };
        assert!(matches!(pool_features(&img, &spec), Err(crate::QbcError::InvalidArgument(_))));
    }

    #[test]
    fn blocks_are_independent() {
        let pixels: Vec<f64> = (0..28 * 28).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let img = GrayImage::new(28, 28, pixels).unwrap();
        let spec = FeatureSpec::default();
        let pooled = pool_features(&img, &spec).unwrap();
        let mut reversed = spec.clone();
        reversed.blocks.reverse();
        let mut back = pool_features(&img, &reversed).unwrap();
        back.reverse();
        assert_eq!(pooled, back);
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let text = serde_json::to_string(&FeatureSpec::default()).unwrap();
        assert_eq!(serde_json::from_str::<FeatureSpec>(&text).unwrap(), FeatureSpec::default());
        let bad = text.replacen("\"row\"", "\"rwo\"", 1);
        assert!(serde_json::from_str::<FeatureSpec>(&bad).is_err());
    }
}
