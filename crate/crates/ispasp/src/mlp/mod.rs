//! ReLU feed-forward networks: two-layer and multi-layer forward passes,
//! compacted sub-network extraction, and flat binary checkpoints. Training
//! lives in [`train`].

mod train;

pub use train::{
    accuracy, backprop_gradients, fine_tune, sgd_train, softmax_cross_entropy, Gradients,
    TrainConfig,
};

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, IndexSet};

fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|v| v.max(0.0))
}

/// `f(X) = W1 * relu(W0 * X)`, bias-free; inputs carry an explicit constant
/// feature when an offset is wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    w0: DenseMatrix,
    w1: DenseMatrix,
}

impl TwoLayerNet {
    pub fn new(w0: DenseMatrix, w1: DenseMatrix) -> Result<Self> {
        if w1.cols() != w0.rows() {
            return Err(Error::ShapeMismatch {
                op: "two-layer net",
                left_rows: w0.rows(),
                left_cols: w0.cols(),
                right_rows: w1.rows(),
                right_cols: w1.cols(),
            });
        }
        Ok(TwoLayerNet { w0, w1 })
    }

    pub fn w0(&self) -> &DenseMatrix {
        &self.w0
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn d_in(&self) -> usize {
        self.w0.cols()
    }

    pub fn d_hid(&self) -> usize {
        self.w0.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w1.rows()
    }

    /// Hidden representations `H = relu(W0 * X)`; entrywise non-negative.
    pub fn hidden(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(relu(&self.w0.matmul(x)?))
    }

    /// Network output `U = W1 * H`.
    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.w1.matmul(&self.hidden(x)?)
    }

    /// Compact the network to the hidden units in `keep`: rows of `W0` and
    /// columns of `W1`. The compacted forward pass equals the full-shape
    /// product against the zero-padded row restriction of `H`.
    pub fn extract_subnetwork(&self, keep: &IndexSet) -> Result<TwoLayerNet> {
        if keep.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let w0 = self.w0.select_rows(keep)?;
        let w1 = self.w1.select_cols(keep)?;
        TwoLayerNet::new(w0, w1)
    }
}

/// Weight stack `W0 ... WL` with ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerNet {
    weights: Vec<DenseMatrix>,
}

impl MultiLayerNet {
    pub fn new(weights: Vec<DenseMatrix>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidParameter(
                "a multi-layer net needs at least two weight matrices".into(),
            ));
        }
        for pair in weights.windows(2) {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::ShapeMismatch {
                    op: "multi-layer net",
                    left_rows: pair[0].rows(),
                    left_cols: pair[0].cols(),
                    right_rows: pair[1].rows(),
                    right_cols: pair[1].cols(),
                });
            }
        }
        Ok(MultiLayerNet { weights })
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    /// Number of ReLU hidden layers (weights minus the output map).
    pub fn hidden_layers(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (i, w) in self.weights.iter().enumerate() {
            h = w.matmul(&h)?;
            if i != last {
                h = relu(&h);
            }
        }
        Ok(h)
    }

    /// The ReLU hidden representations, one per hidden layer, in order.
    pub fn hidden_representations(&self, x: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        let mut reps = Vec::with_capacity(self.hidden_layers());
        let mut h = x.clone();
        for w in &self.weights[..self.weights.len() - 1] {
            h = relu(&w.matmul(&h)?);
            reps.push(h.clone());
        }
        Ok(reps)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MLPNET01";

/// Write weight matrices as a flat binary checkpoint: magic string, layer
/// count, then per layer rows/cols as little-endian u64 followed by the
/// entries as row-major little-endian f64. Identical bytes mean identical
/// networks.
pub fn save_checkpoint(path: &Path, layers: &[DenseMatrix]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(layers.len() as u64).to_le_bytes())?;
    for layer in layers {
        out.write_all(&(layer.rows() as u64).to_le_bytes())?;
        out.write_all(&(layer.cols() as u64).to_le_bytes())?;
        for r in 0..layer.rows() {
            for c in 0..layer.cols() {
                out.write_all(&layer.get(r, c).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<DenseMatrix>> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| Error::BadCheckpoint("file too short for magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::BadCheckpoint("wrong magic string".into()));
    }
    let mut word = [0u8; 8];
    file.read_exact(&mut word)
        .map_err(|_| Error::BadCheckpoint("missing layer count".into()))?;
    let count = u64::from_le_bytes(word) as usize;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        file.read_exact(&mut word)
            .map_err(|_| Error::BadCheckpoint(format!("missing rows for layer {i}")))?;
        let rows = u64::from_le_bytes(word) as usize;
        file.read_exact(&mut word)
            .map_err(|_| Error::BadCheckpoint(format!("missing cols for layer {i}")))?;
        let cols = u64::from_le_bytes(word) as usize;
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) > (1 << 32) {
            return Err(Error::BadCheckpoint(format!(
                "implausible layer shape {rows}x{cols}"
            )));
        }
        let mut layer = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                file.read_exact(&mut word)
                    .map_err(|_| Error::BadCheckpoint(format!("short read in layer {i}")))?;
                layer.set(r, c, f64::from_le_bytes(word));
            }
        }
        layers.push(layer);
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn random_net(d_in: usize, d_hid: usize, d_out: usize, seed: u64) -> TwoLayerNet {
        let mut rng = Prng::from_seed(seed);
        let w0 = DenseMatrix::from_fn(d_hid, d_in, |_, _| rng.normal());
        let w1 = DenseMatrix::from_fn(d_out, d_hid, |_, _| rng.normal());
        TwoLayerNet::new(w0, w1).unwrap()
    }

    #[test]
    fn hidden_relu_identity_on_nonnegative() {
        let net = TwoLayerNet::new(DenseMatrix::identity(3), DenseMatrix::identity(3)).unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0, 0.0], &[2.0, 3.0], &[0.5, 0.0]]).unwrap();
        assert_eq!(net.hidden(&x).unwrap(), x);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn hidden_clamps_negatives() {
        let net = TwoLayerNet::new(
            DenseMatrix::identity(2).scale(-1.0),
            DenseMatrix::identity(2),
        )
        .unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let h = net.hidden(&x).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_matches_scalar_recomputation() {
        let net = random_net(4, 6, 3, 1);
        let mut rng = Prng::from_seed(2);
        let x = DenseMatrix::from_fn(4, 5, |_, _| rng.normal());
        let h = net.hidden(&x).unwrap();
        for &(i, j) in &[(0, 0), (5, 4), (2, 3), (4, 1), (1, 2)] {
            let mut pre = 0.0;
            for l in 0..4 {
                pre += net.w0().get(i, l) * x.get(l, j);
            }
            assert!((h.get(i, j) - pre.max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let net = random_net(3, 5, 2, 3);
        let out = net.forward(&DenseMatrix::zeros(3, 4)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layer_equals_multi_layer_with_one_hidden() {
        let net = random_net(4, 7, 3, 4);
        let multi = MultiLayerNet::new(vec![net.w0().clone(), net.w1().clone()]).unwrap();
        let mut rng = Prng::from_seed(5);
        let x = DenseMatrix::from_fn(4, 6, |_, _| rng.normal());
        let a = net.forward(&x).unwrap();
        let b = multi.forward(&x).unwrap();
        assert!(a.sub(&b).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn multi_layer_identity_chain() {
        let eye = DenseMatrix::identity(3);
        let net = MultiLayerNet::new(vec![eye.clone(), eye.clone(), eye.clone()]).unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0], &[0.0], &[2.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn multi_layer_matches_explicit_composition() {
        let mut rng = Prng::from_seed(6);
        let w0 = DenseMatrix::from_fn(5, 3, |_, _| rng.normal());
        let w1 = DenseMatrix::from_fn(4, 5, |_, _| rng.normal());
        let w2 = DenseMatrix::from_fn(2, 4, |_, _| rng.normal());
        let net = MultiLayerNet::new(vec![w0.clone(), w1.clone(), w2.clone()]).unwrap();
        let x = DenseMatrix::from_fn(3, 6, |_, _| rng.normal());
        let h1 = relu(&w0.matmul(&x).unwrap());
        let h2 = relu(&w1.matmul(&h1).unwrap());
        let want = w2.matmul(&h2).unwrap();
        let got = net.forward(&x).unwrap();
        assert!(got.sub(&want).unwrap().frobenius_norm() < 1e-12);
        let reps = net.hidden_representations(&x).unwrap();
        assert_eq!(reps.len(), 2);
        assert!(reps[1].sub(&h2).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn multi_layer_zero_weights() {
        let net = MultiLayerNet::new(vec![DenseMatrix::zeros(3, 2), DenseMatrix::zeros(2, 3)])
            .unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0], &[-1.0]]).unwrap();
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extraction_with_all_units_is_identity() {
        let net = random_net(4, 6, 3, 7);
        let sub = net.extract_subnetwork(&IndexSet::full(6)).unwrap();
        let mut rng = Prng::from_seed(8);
        let x = DenseMatrix::from_fn(4, 5, |_, _| rng.normal());
        let a = net.forward(&x).unwrap();
        let b = sub.forward(&x).unwrap();
        assert!(a.sub(&b).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn single_unit_extraction_is_rank_one() {
        let net = random_net(3, 5, 4, 9);
        let keep = IndexSet::new(5, vec![2]).unwrap();
        let sub = net.extract_subnetwork(&keep).unwrap();
        let mut rng = Prng::from_seed(10);
        let x = DenseMatrix::from_fn(3, 4, |_, _| rng.normal());
        let out = sub.forward(&x).unwrap();
        // explicit outer product w1[:,2] * relu(w0[2,:] x)
        for j in 0..4 {
            let mut act = 0.0;
            for l in 0..3 {
                act += net.w0().get(2, l) * x.get(l, j);
            }
            let act = act.max(0.0);
            for i in 0..4 {
                let want = net.w1().get(i, 2) * act;
                assert!((out.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compacted_forward_equals_zero_padded_product() {
        let net = random_net(5, 8, 3, 11);
        let keep = IndexSet::new(8, vec![1, 4, 6]).unwrap();
        let sub = net.extract_subnetwork(&keep).unwrap();
        let mut rng = Prng::from_seed(12);
        let x = DenseMatrix::from_fn(5, 7, |_, _| rng.normal());
        let compact = sub.forward(&x).unwrap();
        let h = net.hidden(&x).unwrap();
        let padded = net.w1().matmul(&h.row_restrict(&keep).unwrap()).unwrap();
        assert!(compact.sub(&padded).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn empty_extraction_is_an_error() {
        let net = random_net(3, 4, 2, 13);
        assert!(matches!(
            net.extract_subnetwork(&IndexSet::empty(4)),
            Err(Error::EmptyIndexSet)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = random_net(4, 6, 3, 14);
        save_checkpoint(&path, &[net.w0().clone(), net.w1().clone()]).unwrap();
        let layers = load_checkpoint(&path).unwrap();
        assert_eq!(layers.len(), 2);
        assert_eq!(&layers[0], net.w0());
        assert_eq!(&layers[1], net.w1());
        // identical saves produce identical bytes
        let path2 = dir.path().join("net2.bin");
        save_checkpoint(&path2, &[net.w0().clone(), net.w1().clone()]).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTANET0").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::BadCheckpoint(_))
        ));
    }
}
