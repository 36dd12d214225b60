//! SEPN weight files.
//!
//! Layout (little-endian): magic `SEPN`, `u32` version, `u32` layer count,
//! then per layer a `u8` kind tag, the kind's shape as `u32`s and the
//! layer's `f32` parameters.
//!
//! | tag | kind            | shape fields                               |
//! |-----|-----------------|--------------------------------------------|
//! | 0   | conv            | in, out, kernel, stride, pad               |
//! | 1   | relu            |                                            |
//! | 2   | downsample2     |                                            |
//! | 3   | upsample2       |                                            |
//! | 4   | skip_add        | from                                       |
//! | 5   | multiscale_conv | in, out, narrow kernel, wide kernel        |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::network::{Layer, LayerKind, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SEPN";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put(&mut buf, FORMAT_VERSION);
    put(&mut buf, net.layers.len() as u32);
    for layer in &net.layers {
        let (tag, shape): (u8, Vec<usize>) = match layer.kind {
            LayerKind::Conv { in_channels, out_channels, kernel, stride, pad } => {
                (0, vec![in_channels, out_channels, kernel, stride, pad])
            }
            LayerKind::Relu => (1, vec![]),
            LayerKind::Downsample2 => (2, vec![]),
            LayerKind::Upsample2 => (3, vec![]),
            LayerKind::SkipAdd { from } => (4, vec![from]),
            LayerKind::MultiscaleConv { in_channels, out_channels, narrow, wide } => {
                (5, vec![in_channels, out_channels, narrow, wide])
            }
        };
        buf.push(tag);
        for s in shape {
            put(&mut buf, s as u32);
        }
        for p in &layer.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a network; the input channel count comes from the first
/// convolution.
pub fn read_network<R: Read>(mut r: R) -> Result<Network> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a SEPN weight file".into()));
    }
    let version = get(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported SEPN version {version}")));
    }
    let count = get(&mut r)? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let kind = match tag[0] {
            0 => LayerKind::Conv {
                in_channels: get(&mut r)? as usize,
                out_channels: get(&mut r)? as usize,
                kernel: get(&mut r)? as usize,
                stride: get(&mut r)? as usize,
                pad: get(&mut r)? as usize,
            },
            1 => LayerKind::Relu,
            2 => LayerKind::Downsample2,
            3 => LayerKind::Upsample2,
            4 => LayerKind::SkipAdd { from: get(&mut r)? as usize },
            5 => LayerKind::MultiscaleConv {
                in_channels: get(&mut r)? as usize,
                out_channels: get(&mut r)? as usize,
                narrow: get(&mut r)? as usize,
                wide: get(&mut r)? as usize,
            },
            t => return Err(Error::Format(format!("layer {i}: unknown kind tag {t}"))),
        };
        let mut bytes = vec![0u8; kind.param_count() * 4];
        r.read_exact(&mut bytes)?;
        let params: Vec<f32> =
            bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format(format!("layer {i}: non-finite weight")));
        }
        layers.push(Layer { kind, params });
    }
    let input_channels = layers
        .iter()
        .find_map(|l| match l.kind {
            LayerKind::Conv { in_channels, .. } | LayerKind::MultiscaleConv { in_channels, .. } => {
                Some(in_channels)
            }
            _ => None,
        })
        .ok_or_else(|| Error::Format("network has no convolution".into()))?;
    Network::new(input_channels, layers)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_network(net, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    read_network(fs::read(path)?.as_slice())
}

fn put(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn get<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
