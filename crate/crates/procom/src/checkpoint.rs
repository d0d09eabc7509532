//! Binary checkpoint persistence.
//!
//! Layout: 8-byte magic `PROCOM01` (6-byte name + 2-digit version),
//! little-endian u32 dimensions, row-major IEEE-754 f32 arrays, a u64
//! seed, and a trailing UTF-8 config echo. Arrays round-trip bitwise, so
//! a checkpoint pre-trained on one graph loads against any graph with the
//! same feature width (the transfer workflow).

use crate::encoder::{EncoderParams, GcnLayer};
use crate::error::{Error, Result};
use crate::prompt::PromptParams;
use crate::tensor::Tensor;
use std::io::Read;
use std::path::Path;

const MAGIC_NAME: &[u8; 6] = b"PROCOM";
const MAGIC_VERSION: &[u8; 2] = b"01";

/// Serialized model state: encoder weights, optional prompting function,
/// seed, and a config echo for provenance.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub encoder: EncoderParams<f32>,
    pub prompt: Option<PromptParams<f32>>,
    pub seed: u64,
    pub config_echo: String,
}

impl Checkpoint {
    pub fn feat_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.out_dim()
    }
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::data("truncated checkpoint"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn f32_vec(&mut self, len: usize) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; len * 4];
        self.inner
            .read_exact(&mut raw)
            .map_err(|_| Error::data("truncated checkpoint"))?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

fn write_matrix(out: &mut Vec<u8>, t: &Tensor<f32>) {
    out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_vec(out: &mut Vec<u8>, v: &[f32]) {
    out.extend_from_slice(&(v.len() as u32).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_matrix<R: Read>(r: &mut Reader<R>) -> Result<Tensor<f32>> {
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows == 0 || cols == 0 || rows.saturating_mul(cols) > (1 << 28) {
        return Err(Error::data(format!(
            "checkpoint declares implausible matrix shape {rows}x{cols}"
        )));
    }
    Tensor::matrix(rows, cols, r.f32_vec(rows * cols)?)
}

fn read_vec<R: Read>(r: &mut Reader<R>) -> Result<Vec<f32>> {
    let len = r.u32()? as usize;
    if len > (1 << 28) {
        return Err(Error::data("checkpoint declares implausible vector length"));
    }
    r.f32_vec(len)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC_NAME);
    out.extend_from_slice(MAGIC_VERSION);
    out.extend_from_slice(&(ckpt.encoder.layers.len() as u32).to_le_bytes());
    for layer in &ckpt.encoder.layers {
        write_matrix(&mut out, &layer.weight);
        write_vec(&mut out, &layer.bias);
    }
    match &ckpt.prompt {
        None => out.push(0),
        Some(phi) => {
            out.push(1);
            write_matrix(&mut out, &phi.w1);
            write_vec(&mut out, &phi.b1);
            write_matrix(&mut out, &phi.w2);
            write_vec(&mut out, &phi.b2);
            out.extend_from_slice(&(phi.alpha as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&ckpt.seed.to_le_bytes());
    let echo = ckpt.config_echo.as_bytes();
    out.extend_from_slice(&(echo.len() as u32).to_le_bytes());
    out.extend_from_slice(echo);
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader {
        inner: std::io::BufReader::new(file),
    };
    let magic = r.bytes::<8>()?;
    if &magic[..6] != MAGIC_NAME {
        return Err(Error::data(format!("{}: bad magic", path.display())));
    }
    if &magic[6..] != MAGIC_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            String::from_utf8_lossy(&magic[6..])
        )));
    }
    let layer_count = r.u32()? as usize;
    if layer_count == 0 || layer_count > 64 {
        return Err(Error::data("checkpoint declares implausible layer count"));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let weight = read_matrix(&mut r)?;
        let bias = read_vec(&mut r)?;
        if bias.len() != weight.cols() {
            return Err(Error::data("checkpoint bias width mismatch"));
        }
        layers.push(GcnLayer { weight, bias });
    }
    let has_phi = r.bytes::<1>()?[0];
    let prompt = match has_phi {
        0 => None,
        1 => {
            let w1 = read_matrix(&mut r)?;
            let b1 = read_vec(&mut r)?;
            let w2 = read_matrix(&mut r)?;
            let b2 = read_vec(&mut r)?;
            let alpha = f32::from_le_bytes(r.bytes::<4>()?) as f64;
            Some(PromptParams {
                w1,
                b1,
                w2,
                b2,
                alpha,
            })
        }
        other => {
            return Err(Error::data(format!(
                "checkpoint prompt flag must be 0 or 1, got {other}"
            )))
        }
    };
    let seed = r.u64()?;
    let echo_len = r.u32()? as usize;
    if echo_len > (1 << 24) {
        return Err(Error::data("checkpoint declares implausible echo length"));
    }
    let mut echo = vec![0u8; echo_len];
    r.inner
        .read_exact(&mut echo)
        .map_err(|_| Error::data("truncated checkpoint"))?;
    let config_echo = String::from_utf8(echo)
        .map_err(|_| Error::data("checkpoint config echo is not UTF-8"))?;
    Ok(Checkpoint {
        encoder: EncoderParams { layers },
        prompt,
        seed,
        config_echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_checkpoint(with_phi: bool) -> Checkpoint {
        let encoder = EncoderParams::<f32>::glorot(&[5, 16, 16], 42).unwrap();
        let prompt = with_phi.then(|| {
            let mut phi = PromptParams::<f32>::glorot(16, 8, 0.2, 43).unwrap();
            phi.b2 = vec![0.125];
            phi
        });
        Checkpoint {
            encoder,
            prompt,
            seed: 42,
            config_echo: "k = 2\ndim = 16\n".into(),
        }
    }

    fn bits(p: &EncoderParams<f32>) -> Vec<u32> {
        p.param_slices()
            .iter()
            .flat_map(|s| s.iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for with_phi in [false, true] {
            let path = dir.path().join(format!("m{with_phi}.ckpt"));
            let ck = sample_checkpoint(with_phi);
            save_checkpoint(&path, &ck).unwrap();
            let back = load_checkpoint(&path).unwrap();
            assert_eq!(bits(&ck.encoder), bits(&back.encoder));
            assert_eq!(ck.seed, back.seed);
            assert_eq!(ck.config_echo, back.config_echo);
            match (&ck.prompt, &back.prompt) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(
                        a.w1.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.w1.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                    );
                    assert_eq!(a.alpha as f32, b.alpha as f32);
                }
                _ => panic!("prompt presence changed across roundtrip"),
            }
        }
    }

    #[test]
    fn corrupted_magic_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let ck = sample_checkpoint(false);
        save_checkpoint(&path, &ck).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw[0] = b'X';
        std::fs::write(&path, &raw).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");
    }

    #[test]
    fn version_mismatch_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ver.ckpt");
        save_checkpoint(&path, &sample_checkpoint(false)).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw[6] = b'9';
        raw[7] = b'9';
        std::fs::write(&path, &raw).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn truncation_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        save_checkpoint(&path, &sample_checkpoint(true)).unwrap();
        let raw = std::fs::read(&path).unwrap();
        std::fs::write(&path, &raw[..raw.len() / 2]).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }
}
