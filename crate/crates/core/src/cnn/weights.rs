//! Versioned weight files.
//!
//! Layout: the magic `SDW1`, a `u32` little-endian byte length, that many
//! bytes of UTF-8 JSON (`{"architecture": .., "input_norm": [..]}`), then
//! every layer's weight followed by its bias as raw little-endian `f32`, in
//! layer order. Parameter-free layers contribute nothing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, BandNorm, LayerParams, Network};
use crate::fsio::write_atomic;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SDW1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    architecture: Architecture,
    input_norm: Vec<BandNorm>,
}

pub fn encode_weights(net: &Network) -> Result<Vec<u8>> {
    let desc = Descriptor {
        architecture: net.architecture().clone(),
        input_norm: net.input_norm().to_vec(),
    };
    let json = serde_json::to_vec(&desc).map_err(|e| Error::Format(e.to_string()))?;
    let json_len =
        u32::try_from(json.len()).map_err(|_| Error::Format("descriptor too large".into()))?;
    let mut out = Vec::with_capacity(8 + json.len() + net.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&json_len.to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        for v in p.weight.iter().chain(&p.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing SDW1 magic".into()));
    }
    let json_len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let body = &bytes[8..];
    if body.len() < json_len {
        return Err(Error::Format(format!(
            "descriptor length {json_len} exceeds file size"
        )));
    }
    let desc: Descriptor = serde_json::from_slice(&body[..json_len])
        .map_err(|e| Error::Format(format!("descriptor: {e}")))?;
    desc.architecture.shapes()?;
    let sizes = desc.architecture.param_sizes();
    let expected: usize = sizes.iter().map(|(w, b)| w + b).sum::<usize>() * 4;
    let mut raw = &body[json_len..];
    if raw.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes of parameters, found {}",
            raw.len()
        )));
    }
    let mut take = |n: usize| -> Vec<f32> {
        let (head, tail) = raw.split_at(n * 4);
        raw = tail;
        head.chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    };
    let params = sizes
        .iter()
        .map(|&(w, b)| LayerParams {
            weight: take(w),
            bias: take(b),
        })
        .collect();
    Network::from_parts(desc.architecture, params, desc.input_norm)
}

pub fn save_weights(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_weights(net)?)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = Network::new(Architecture::tiny(), 11).unwrap();
        net.set_input_norm(vec![
            BandNorm {
                mean: 1.234_567_9,
                std: 0.1,
            },
            BandNorm {
                mean: 0.3,
                std: 7.7e-3,
            },
        ])
        .unwrap();
        let bytes = encode_weights(&net).unwrap();
        assert_eq!(&bytes[..4], b"SDW1");
        let back = decode_weights(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(encode_weights(&back).unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_files() {
        let net = Network::new(Architecture::tiny(), 1).unwrap();
        let mut bytes = encode_weights(&net).unwrap();
        let truncated = &bytes[..bytes.len() - 4];
        assert!(matches!(decode_weights(truncated), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_weights(&bytes), Err(Error::Format(_))));
        assert!(matches!(decode_weights(b"SD"), Err(Error::Format(_))));
    }
}
