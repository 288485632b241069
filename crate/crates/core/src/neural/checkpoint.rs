//! Little-endian binary checkpoints.
//!
//! Network file (`PAMN`): a 16-byte header
//!
//! | bytes | field |
//! |-------|-------|
//! | 0..4  | magic `PAMN` |
//! | 4..6  | format version (u16) |
//! | 6..8  | layer count L (u16) |
//! | 8..12 | input width (u32) |
//! | 12..16 | output width (u32) |
//!
//! followed by all L+1 widths as u32, then for every layer its weights in
//! row-major `[out][in]` order and its biases, all f64.
//!
//! Table file (`PATQ`): magic, version (u16), action count (u16), state
//! count (u32), 4 reserved bytes, the learning rate (f64) and then the table
//! state-major.

use std::io::{Read, Write};

use crate::error::NeuralError;
use crate::neural::mlp::{Layer, Mlp};
use crate::neural::qfunction::QBackend;
use crate::neural::tabular::TabularQ;

pub const MLP_MAGIC: [u8; 4] = *b"PAMN";
pub const TABLE_MAGIC: [u8; 4] = *b"PATQ";
pub const FORMAT_VERSION: u16 = 1;

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::BadCheckpoint(msg.into())
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u16(&mut self) -> Result<u16, NeuralError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, NeuralError> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("non-finite value"))
        }
    }

    pub(crate) fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }

    fn finish(&self) -> Result<(), NeuralError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(bad(format!("{} trailing bytes", self.bytes.len() - self.pos)))
        }
    }
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn mlp_to_bytes(p: &Mlp) -> Vec<u8> {
    let shape = p.shape();
    let mut out = Vec::with_capacity(16 + 4 * shape.len() + 8 * p.num_params());
    out.extend_from_slice(&MLP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(p.layers().len() as u16).to_le_bytes());
    out.extend_from_slice(&(p.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(p.output_dim() as u32).to_le_bytes());
    for d in &shape {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for l in p.layers() {
        put_f64s(
            &mut out,
            (0..l.outputs).flat_map(|j| (0..l.inputs).map(move |i| l.weight(i, j))),
        );
        put_f64s(&mut out, l.biases.iter().copied());
    }
    out
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<Mlp, NeuralError> {
    let mut r = Reader::new(bytes);
    let p = read_mlp(&mut r)?;
    r.finish()?;
    Ok(p)
}

fn read_mlp(r: &mut Reader<'_>) -> Result<Mlp, NeuralError> {
    if r.take(4)? != MLP_MAGIC {
        return Err(bad("not a network checkpoint"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_layers = r.u16()? as usize;
    let input = r.u32()? as usize;
    let output = r.u32()? as usize;
    if n_layers == 0 {
        return Err(bad("no layers"));
    }
    let dims = (0..=n_layers)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    if dims[0] != input || dims[n_layers] != output || dims.contains(&0) {
        return Err(bad("header widths disagree with layer table"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let mut layer = Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        };
        for j in 0..outputs {
            for i in 0..inputs {
                layer.set_weight(i, j, r.f64()?);
            }
        }
        for b in &mut layer.biases {
            *b = r.f64()?;
        }
        layers.push(layer);
    }
    Mlp::from_layers(layers)
}

pub fn tabular_to_bytes(q: &TabularQ) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * q.table.len());
    out.extend_from_slice(&TABLE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&(q.table.len() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    put_f64s(&mut out, [q.learning_rate]);
    put_f64s(&mut out, q.table.iter().flatten().copied());
    out
}

pub fn tabular_from_bytes(bytes: &[u8]) -> Result<TabularQ, NeuralError> {
    let mut r = Reader::new(bytes);
    let q = read_tabular(&mut r)?;
    r.finish()?;
    Ok(q)
}

fn read_tabular(r: &mut Reader<'_>) -> Result<TabularQ, NeuralError> {
    if r.take(4)? != TABLE_MAGIC {
        return Err(bad("not a table checkpoint"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if r.u16()? != 2 {
        return Err(bad("tables must have two actions"));
    }
    let n_states = r.u32()? as usize;
    r.take(4)?;
    let learning_rate = r.f64()?;
    let mut q = TabularQ::new(learning_rate);
    q.table = (0..n_states)
        .map(|_| Ok([r.f64()?, r.f64()?]))
        .collect::<Result<Vec<_>, NeuralError>>()?;
    Ok(q)
}

pub fn backend_to_bytes(q: &QBackend) -> Vec<u8> {
    match q {
        QBackend::Tabular(t) => tabular_to_bytes(t),
        QBackend::Neural(m) => mlp_to_bytes(m),
    }
}

/// Reads either format, dispatching on the magic.
pub fn backend_from_bytes(bytes: &[u8]) -> Result<QBackend, NeuralError> {
    match bytes.get(..4) {
        Some(m) if m == MLP_MAGIC => mlp_from_bytes(bytes).map(QBackend::Neural),
        Some(m) if m == TABLE_MAGIC => tabular_from_bytes(bytes).map(QBackend::Tabular),
        _ => Err(bad("unknown magic")),
    }
}

/// Reads one length-prefixed backend blob written by [`write_backend`].
pub(crate) fn read_backend(r: &mut Reader<'_>) -> Result<QBackend, NeuralError> {
    let len = r.u64()? as usize;
    backend_from_bytes(r.take(len)?)
}

pub(crate) fn write_backend(out: &mut Vec<u8>, q: &QBackend) {
    let blob = backend_to_bytes(q);
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&blob);
}

pub fn save<W: Write>(w: &mut W, q: &QBackend) -> std::io::Result<()> {
    w.write_all(&backend_to_bytes(q))
}

pub fn load<R: Read>(r: &mut R) -> Result<QBackend, NeuralError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| bad(e.to_string()))?;
    backend_from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_round_trip() {
        let p = Mlp::new(&[10, 40, 40, 2], 9);
        let bytes = mlp_to_bytes(&p);
        assert_eq!(&bytes[..4], b"PAMN");
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 3);
        assert_eq!(bytes.len(), 16 + 4 * 4 + 8 * p.num_params());
        assert_eq!(mlp_from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn weights_are_row_major_out_in() {
        let mut p = Mlp::zeros(&[2, 1]);
        p.layers_mut()[0].set_weight(1, 0, 7.0);
        let bytes = mlp_to_bytes(&p);
        let w1 = f64::from_le_bytes(bytes[16 + 8 + 8..16 + 8 + 16].try_into().unwrap());
        assert_eq!(w1, 7.0);
    }

    #[test]
    fn table_round_trip() {
        let mut q = TabularQ::new(0.25);
        q.table[17] = [1.5, -2.0];
        let bytes = tabular_to_bytes(&q);
        assert_eq!(bytes.len(), 24 + 16 * 256);
        assert_eq!(tabular_from_bytes(&bytes).unwrap(), q);
        assert_eq!(backend_from_bytes(&bytes).unwrap(), QBackend::Tabular(q));
    }

    #[test]
    fn corrupt_input_rejected() {
        let p = Mlp::new(&[8, 4, 2], 1);
        let bytes = mlp_to_bytes(&p);
        assert!(mlp_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(mlp_from_bytes(&extra).is_err());
        assert!(backend_from_bytes(b"XXXX").is_err());
        let mut wrong = bytes;
        wrong[4] = 9;
        assert!(mlp_from_bytes(&wrong).is_err());
    }
}
