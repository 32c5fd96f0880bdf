//! IDX-format digit data: parsing, dataset assembly, splits, and seeded
//! mini-batch sampling.
//!
//! Features are flattened pixels scaled to `[0, 1]` by an exact `b / 255`,
//! with a constant-1 bias feature appended as the last row, so the bias-free
//! network algebra still absorbs an offset. For 28x28 digits this gives
//! `d_in = 785`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::Prng;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX image payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            need: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX image file (magic `0x00000803`, big-endian dims, raw bytes).
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::IdxBadMagic {
            expected: IMAGES_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            need: expected,
            have: bytes.len(),
        });
    }
    if bytes.len() != expected {
        return Err(Error::IdxDimMismatch {
            expected,
            got: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Parse an IDX label file (magic `0x00000801`); labels must lie in 0..=9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::IdxBadMagic {
            expected: LABELS_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            need: expected,
            have: bytes.len(),
        });
    }
    if bytes.len() != expected {
        return Err(Error::IdxDimMismatch {
            expected,
            got: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    for (position, &label) in labels.iter().enumerate() {
        if label > 9 {
            return Err(Error::LabelOutOfRange { label, position });
        }
    }
    Ok(labels)
}

/// Which part of the corpus a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        };
        f.write_str(s)
    }
}

/// An immutable classification dataset: features column-per-example plus
/// integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    labels: Vec<u8>,
    tag: SplitTag,
}

impl Dataset {
    /// Assemble from parsed IDX parts, scaling pixels and appending the bias
    /// feature.
    pub fn from_idx(images: &IdxImages, labels: &[u8], tag: SplitTag) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::CountMismatch {
                images: images.count,
                labels: labels.len(),
            });
        }
        let pixels_per_image = images.rows * images.cols;
        let d_in = pixels_per_image + 1;
        let mut features = DenseMatrix::zeros(d_in, images.count);
        for ex in 0..images.count {
            let col = features.column_mut(ex);
            let src = &images.pixels[ex * pixels_per_image..(ex + 1) * pixels_per_image];
            for (dst, &b) in col.iter_mut().zip(src) {
                *dst = f64::from(b) / 255.0;
            }
            col[pixels_per_image] = 1.0;
        }
        Ok(Dataset {
            features,
            labels: labels.to_vec(),
            tag,
        })
    }

    /// Wrap pre-built features (one column per example) and labels.
    pub fn from_parts(features: DenseMatrix, labels: Vec<u8>, tag: SplitTag) -> Result<Self> {
        if features.cols() != labels.len() {
            return Err(Error::CountMismatch {
                images: features.cols(),
                labels: labels.len(),
            });
        }
        for (position, &label) in labels.iter().enumerate() {
            if label > 9 {
                return Err(Error::LabelOutOfRange { label, position });
            }
        }
        Ok(Dataset {
            features,
            labels,
            tag,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d_in(&self) -> usize {
        self.features.rows()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn tag(&self) -> SplitTag {
        self.tag
    }

    /// Copy of the examples at `indices`, in the given order.
    pub fn select_examples(&self, indices: &[usize], tag: SplitTag) -> Dataset {
        assert!(!indices.is_empty(), "cannot select zero examples");
        let d_in = self.d_in();
        let mut features = DenseMatrix::zeros(d_in, indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for (dst, &src) in indices.iter().enumerate() {
            features
                .column_mut(dst)
                .copy_from_slice(self.features.column(src));
            labels.push(self.labels[src]);
        }
        Dataset {
            features,
            labels,
            tag,
        }
    }
}

/// Seeded random split of a dataset into train and validation parts.
///
/// Sizes are `ceil((1 - val_fraction) * n)` and `floor(val_fraction * n)`;
/// `val_fraction = 0.2` gives the usual 80-20 split. An empty validation
/// split is returned as `None`.
pub fn make_splits(
    data: &Dataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Option<Dataset>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::InvalidParameter(format!(
            "val_fraction must lie in [0, 1), got {val_fraction}"
        )));
    }
    let n = data.len();
    let val_size = (val_fraction * n as f64).floor() as usize;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = Prng::stream(seed, "split");
    rng.shuffle(&mut perm);
    let train = data.select_examples(&perm[..n - val_size], SplitTag::Train);
    let val = if val_size == 0 {
        None
    } else {
        Some(data.select_examples(&perm[n - val_size..], SplitTag::Val))
    };
    Ok((train, val))
}

/// Sequential mini-batches over seeded epoch permutations.
///
/// Each epoch is one permutation of the dataset; batches partition it and the
/// last batch of an epoch may be short.
#[derive(Debug)]
pub struct BatchSampler<'a> {
    data: &'a Dataset,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: Prng,
}

impl<'a> BatchSampler<'a> {
    pub fn new(data: &'a Dataset, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        let mut sampler = BatchSampler {
            data,
            batch_size: batch_size.min(data.len()),
            order: (0..data.len()).collect(),
            cursor: 0,
            rng: Prng::stream(seed, "batch-sampler"),
        };
        sampler.rng.shuffle(&mut sampler.order);
        Ok(sampler)
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.batch_size)
    }

    /// Next batch; reshuffles into a fresh epoch when the current one is
    /// exhausted.
    pub fn next_batch(&mut self) -> (DenseMatrix, Vec<u8>) {
        if self.cursor >= self.order.len() {
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let indices = &self.order[self.cursor..end];
        self.cursor = end;
        let batch = self.data.select_examples(indices, self.data.tag());
        (batch.features.clone(), batch.labels)
    }
}

/// Read and assemble a dataset from an images/labels file pair.
pub fn load_idx_pair(
    images_path: &Path,
    labels_path: &Path,
    tag: SplitTag,
) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    Dataset::from_idx(&images, &labels, tag)
}
