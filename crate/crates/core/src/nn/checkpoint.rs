//! Binary parameter container.
//!
//! All integers are little-endian `u32`, all parameters little-endian `f64`.
//!
//! ```text
//! magic    b"RTNN"
//! version  u32 (= 1)
//! layers   u32 L
//! L x { in u32, out u32, activation u8 (0 elu, 1 tanh, 2 identity) }
//! L x { weights out*in f64 row-major, bias out f64 }
//! ```
//!
//! An optimiser section may follow (written by [`write_adam`]):
//!
//! ```text
//! magic    b"ADAM"
//! lr, beta1, beta2, eps f64; clip f64 (NaN = none); step u64
//! first moments, then second moments, each in the parameter layout above
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::adam::{AdamConfig, AdamState};
use super::net::{Activation, DenseNet, Gradients, Layer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RTNN";
const ADAM_MAGIC: &[u8; 4] = b"ADAM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| bad(format!("truncated checkpoint: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn write_params<W: Write>(w: &mut W, layers: &[(DMatrix<f64>, DVector<f64>)]) -> Result<()> {
    for (m, b) in layers {
        for r in 0..m.nrows() {
            for v in m.row(r).iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in b.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut R, shapes: &[(usize, usize)]) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    shapes
        .iter()
        .map(|&(rows, cols)| {
            let mut m = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    m[(i, j)] = read_f64(r)?;
                }
            }
            let mut b = DVector::zeros(rows);
            for v in b.iter_mut() {
                *v = read_f64(r)?;
            }
            Ok((m, b))
        })
        .collect()
}

pub fn write_net<W: Write>(w: &mut W, net: &DenseNet) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for l in net.layers() {
        w.write_all(&(l.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(l.output_dim() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.tag()])?;
    }
    let params: Vec<_> = net.layers().iter().map(|l| (l.weights.clone(), l.bias.clone())).collect();
    write_params(w, &params)
}

pub fn read_net<R: Read>(r: &mut R) -> Result<DenseNet> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a network checkpoint (bad magic)"));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(r)? as usize;
    if n == 0 || n > 1024 {
        return Err(bad(format!("implausible layer count {n}")));
    }
    let mut shapes = Vec::with_capacity(n);
    let mut acts = Vec::with_capacity(n);
    for _ in 0..n {
        let cols = read_u32(r)? as usize;
        let rows = read_u32(r)? as usize;
        let mut tag = [0u8; 1];
        read_exact(r, &mut tag)?;
        acts.push(Activation::from_tag(tag[0]).ok_or_else(|| bad(format!("unknown activation tag {}", tag[0])))?);
        shapes.push((rows, cols));
    }
    let params = read_params(r, &shapes)?;
    let layers = params
        .into_iter()
        .zip(acts)
        .map(|((weights, bias), activation)| Layer { weights, bias, activation })
        .collect();
    DenseNet::from_layers(layers)
}

pub fn write_adam<W: Write>(w: &mut W, state: &AdamState) -> Result<()> {
    w.write_all(ADAM_MAGIC)?;
    let c = &state.config;
    for v in [c.lr, c.beta1, c.beta2, c.eps, c.clip_norm.unwrap_or(f64::NAN)] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&state.step.to_le_bytes())?;
    write_params(w, &state.m.layers)?;
    write_params(w, &state.v.layers)
}

/// Reads an optimiser section matching the layer shapes of `net`.
pub fn read_adam<R: Read>(r: &mut R, net: &DenseNet) -> Result<AdamState> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != ADAM_MAGIC {
        return Err(bad("missing optimiser section"));
    }
    let lr = read_f64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let eps = read_f64(r)?;
    let clip = read_f64(r)?;
    let step = read_u64(r)?;
    let config = AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
        clip_norm: (!clip.is_nan()).then_some(clip),
    };
    let shapes: Vec<_> = net.layers().iter().map(|l| l.weights.shape()).collect();
    let m = Gradients {
        layers: read_params(r, &shapes)?,
    };
    let v = Gradients {
        layers: read_params(r, &shapes)?,
    };
    Ok(AdamState::from_parts(config, step, m, v))
}

pub fn save_net(net: &DenseNet, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_net(&mut buf, net)?;
    std::fs::write(path, buf).map_err(|e| Error::file(path, e))
}

pub fn load_net(path: &Path) -> Result<DenseNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let mut r = bytes.as_slice();
    let net = read_net(&mut r)?;
    if !r.is_empty() {
        return Err(bad(format!("{} trailing bytes after network", r.len())));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::adam_step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn net_and_adam_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = DenseNet::new(&[3, 5, 2], Activation::Elu, Activation::Tanh, &mut rng).unwrap();
        let mut st = AdamState::new(&net, AdamConfig::default());
        let x = DMatrix::from_element(3, 2, 0.3);
        let (_, cache) = net.forward_cached(&x).unwrap();
        let (g, _) = net.backward(&cache, &DMatrix::from_element(2, 2, 1.0)).unwrap();
        adam_step(&mut net, &g, &mut st).unwrap();

        let mut buf = Vec::new();
        write_net(&mut buf, &net).unwrap();
        write_adam(&mut buf, &st).unwrap();
        assert_eq!(buf.len(), 12 + 2 * 9 + 8 * net.num_params() + 4 + 6 * 8 + 16 * net.num_params());
        let mut r = buf.as_slice();
        let back = read_net(&mut r).unwrap();
        let st2 = read_adam(&mut r, &back).unwrap();
        assert!(r.is_empty());
        assert_eq!(back.params(), net.params());
        assert_eq!(back.layers()[1].activation, Activation::Tanh);
        assert_eq!(st2, st);

        let mut again = Vec::new();
        write_net(&mut again, &back).unwrap();
        write_adam(&mut again, &st2).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_net(&mut &b"XXXX\x01\0\0\0"[..]), Err(Error::Checkpoint(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::new(&[2, 2], Activation::Elu, Activation::Identity, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_net(&mut buf, &net).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_net(&mut buf.as_slice()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::new(&[4, 3, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        save_net(&net, &p).unwrap();
        assert_eq!(load_net(&p).unwrap().params(), net.params());
    }
}
