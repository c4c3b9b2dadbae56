//! Binary model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "SALNET01"
//! version    u32
//! spec_len   u32, followed by spec_len bytes of canonical spec text
//! n_blocks   u32      number of weight layers
//! per weight layer:
//!   layer    u32      index of the layer in the network description
//!   weights  block
//!   bias     block
//! block:
//!   rank     u32, followed by rank u32 extents
//!   count    u64
//!   values   count f32
//!   crc32    u32      over the value bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::LayerParams;
use crate::models::netspec::NetSpec;
use crate::models::network::Network;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SALNET01";
pub const VERSION: u32 = 1;

pub fn save_model(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(net, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_model(net: &Network<f32>, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let text = net.spec().to_text();
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    let blocks: Vec<_> = net.weight_layers().collect();
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (layer, params) in blocks {
        w.write_all(&(layer as u32).to_le_bytes())?;
        write_block(w, &params.weights)?;
        write_block(w, &params.bias)?;
    }
    Ok(())
}

fn write_block(w: &mut impl Write, t: &Tensor<f32>) -> std::io::Result<()> {
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&(t.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.write_all(&crc32fast::hash(&bytes).to_le_bytes())
}

/// Spec plus raw parameter blocks, before they are matched to a network.
struct ModelFile {
    spec: NetSpec,
    blocks: Vec<(usize, LayerParams<f32>)>,
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    Error::ModelFormat(format!("truncated file ({e})"))
}

fn read_block(r: &mut impl Read, what: &str) -> Result<Tensor<f32>> {
    let rank = read_u32(r)? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::ModelFormat(format!("{what}: implausible rank {rank}")));
    }
    let shape = (0..rank)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = read_u64(r)? as usize;
    let expected: usize = shape.iter().product();
    if count != expected {
        return Err(Error::ModelFormat(format!(
            "{what}: count {count} does not match shape {shape:?}"
        )));
    }
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let stored = read_u32(r)?;
    if crc32fast::hash(&bytes) != stored {
        return Err(Error::ModelFormat(format!("{what}: checksum mismatch")));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(shape, data).map_err(|e| Error::ModelFormat(format!("{what}: {e}")))
}

fn read_model_file(r: &mut impl Read) -> Result<ModelFile> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let len = read_u32(r)? as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text).map_err(truncated)?;
    let text = String::from_utf8(text)
        .map_err(|_| Error::ModelFormat("spec text is not UTF-8".into()))?;
    let spec = NetSpec::from_text(&text)?;
    let n = read_u32(r)? as usize;
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let layer = read_u32(r)? as usize;
        let weights = read_block(r, &format!("layer {} weights", layer + 1))?;
        let bias = read_block(r, &format!("layer {} bias", layer + 1))?;
        blocks.push((layer, LayerParams { weights, bias }));
    }
    Ok(ModelFile { spec, blocks })
}

fn open(path: &Path) -> Result<ModelFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model_file(&mut BufReader::new(file))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let model = open(path.as_ref())?;
    read_network(model)
}

pub fn read_model(r: &mut impl Read) -> Result<Network<f32>> {
    read_network(read_model_file(r)?)
}

fn read_network(model: ModelFile) -> Result<Network<f32>> {
    let mut params = vec![None; model.spec.layers.len()];
    for (layer, p) in model.blocks {
        let slot = params.get_mut(layer).ok_or_else(|| {
            Error::ModelFormat(format!("block for layer {} beyond spec", layer + 1))
        })?;
        *slot = Some(p);
    }
    Network::from_parts(model.spec, params)
}

/// Copies weight layers from a donor model file. `layer_map` pairs
/// `(donor_weight_layer, target_weight_layer)`, both counted from zero over
/// weight layers only. Unmapped layers are left untouched.
pub fn import_external_weights(
    net: &mut Network<f32>,
    path: impl AsRef<Path>,
    layer_map: &[(usize, usize)],
) -> Result<()> {
    if layer_map.is_empty() {
        return Ok(());
    }
    let donor = open(path.as_ref())?;
    let targets: Vec<usize> = net.spec().weight_layer_indices();
    let mut staged = Vec::with_capacity(layer_map.len());
    for &(src, dst) in layer_map {
        let (_, donor_params) = donor.blocks.get(src).ok_or_else(|| {
            Error::ModelFormat(format!(
                "donor has {} weight layers, no layer {}",
                donor.blocks.len(),
                src + 1
            ))
        })?;
        let &target_layer = targets.get(dst).ok_or_else(|| {
            Error::ModelFormat(format!(
                "target has {} weight layers, no layer {}",
                targets.len(),
                dst + 1
            ))
        })?;
        let current = net.params()[target_layer].as_ref().expect("weight layer");
        for (what, got, want) in [
            ("weights", donor_params.weights.shape(), current.weights.shape()),
            ("bias", donor_params.bias.shape(), current.bias.shape()),
        ] {
            if got != want {
                return Err(Error::ModelFormat(format!(
                    "weight layer {} {what}: donor shape {got:?} vs target shape {want:?}",
                    dst + 1
                )));
            }
        }
        staged.push((target_layer, donor_params.clone()));
    }
    for (layer, p) in staged {
        net.params_mut()[layer] = Some(p);
    }
    Ok(())
}
