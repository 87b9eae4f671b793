//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "CRGANCKP"
//! version    u32      = 1
//! config     u32 length + UTF-8 key=value text
//! g_updates  u64
//! generator  mlp, u8 has_embedding, [tensor]
//! disc       mlp, u8 head kind (0 dense, 1 cr, 2 ccr), head
//! rngs       u32 count, then per state: 32-byte seed, u64 stream,
//!            u128 word_pos, u8 has_spare, u64 spare bits
//!
//! tensor     u32 rows, u32 cols, rows*cols f64
//! mlp        u32 layers, per layer: u8 activation, f64 slope, u8 sn,
//!            tensor W, u8 has_bias, [tensor b], tensor sn_u
//! dense      one mlp layer record without the activation fields
//! cr         u8 sn, tensor W, u32 count, count × tensor sn_u
//! ccr        cr, u32 count, count × tensor class table
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::cr_head::{CCRHead, CRHead};
use crate::error::{Error, Result};
use crate::model::{Discriminator, Generator, Head};
use crate::nn::{Activation, ClassEmbedding, DenseLayer, Mlp};
use crate::rng::RngState;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"CRGANCKP";
pub const VERSION: u32 = 1;

/// Largest tensor dimension accepted on read.
const MAX_DIM: u32 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub g_updates: u64,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub rng_states: Vec<RngState>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.bytes(self.config_text.as_bytes());
        w.u64(self.g_updates);
        w.mlp(&self.generator.net);
        match &self.generator.class_embedding {
            Some(e) => {
                w.u8(1);
                w.tensor(&e.table);
            }
            None => w.u8(0),
        }
        w.mlp(&self.discriminator.trunk);
        match &self.discriminator.head {
            Head::Dense(l) => {
                w.u8(0);
                w.dense(l);
            }
            Head::Cascade(h) => {
                w.u8(1);
                w.cr(h);
            }
            Head::Conditional(h) => {
                w.u8(2);
                w.cr(&h.base);
                w.u32(h.class_embeddings.len() as u32);
                for t in &h.class_embeddings {
                    w.tensor(t);
                }
            }
        }
        w.u32(self.rng_states.len() as u32);
        for s in &self.rng_states {
            w.0.extend_from_slice(&s.seed);
            w.u64(s.stream);
            w.0.extend_from_slice(&s.word_pos.to_le_bytes());
            w.u8(s.spare_normal.is_some() as u8);
            w.u64(s.spare_normal.unwrap_or(0));
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config_text =
            String::from_utf8(r.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("config text is not UTF-8".into()))?;
        let g_updates = r.u64()?;
        let net = r.mlp()?;
        let class_embedding = match r.flag()? {
            true => Some(ClassEmbedding { table: r.tensor()? }),
            false => None,
        };
        let trunk = r.mlp()?;
        let head = match r.u8()? {
            0 => Head::Dense(r.dense()?),
            1 => Head::Cascade(r.cr()?),
            2 => {
                let base = r.cr()?;
                let count = r.u32()? as usize;
                let tables = (0..count).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?;
                Head::Conditional(CCRHead::from_parts(base, tables)?)
            }
            k => return Err(Error::Checkpoint(format!("unknown head kind {k}"))),
        };
        let count = r.u32()? as usize;
        let mut rng_states = Vec::with_capacity(count.min(16));
        for _ in 0..count {
            let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
            let stream = r.u64()?;
            let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
            let has_spare = r.flag()?;
            let spare = r.u64()?;
            rng_states.push(RngState {
                seed,
                stream,
                word_pos,
                spare_normal: has_spare.then_some(spare),
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            config_text,
            g_updates,
            generator: Generator { net, class_embedding },
            discriminator: Discriminator { trunk, head },
            rng_states,
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Writes to a sibling temporary file and renames it over `path`, so a
    /// crash never leaves a truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("bin.tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }

    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u32(t.rows() as u32);
        self.u32(t.cols() as u32);
        for &x in t.data() {
            self.f64(x);
        }
    }

    fn dense(&mut self, l: &DenseLayer) {
        self.u8(l.spectral_norm as u8);
        self.tensor(&l.weight);
        match &l.bias {
            Some(b) => {
                self.u8(1);
                self.tensor(b);
            }
            None => self.u8(0),
        }
        self.tensor(&l.sn_u);
    }

    fn mlp(&mut self, m: &Mlp) {
        self.u32(m.layers.len() as u32);
        for (l, a) in m.layers.iter().zip(&m.activations) {
            let (tag, slope) = match *a {
                Activation::Identity => (0, 0.0),
                Activation::Relu => (1, 0.0),
                Activation::LeakyRelu(s) => (2, s),
                Activation::Tanh => (3, 0.0),
                Activation::Sigmoid => (4, 0.0),
            };
            self.u8(tag);
            self.f64(slope);
            self.dense(l);
        }
    }

    fn cr(&mut self, h: &CRHead) {
        self.u8(h.spectral_norm as u8);
        self.tensor(&h.weights);
        self.u32(h.sn_u.len() as u32);
        for u in &h.sn_u {
            self.tensor(u);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Checkpoint(format!("bad flag byte {b}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let (rows, cols) = (self.u32()?, self.u32()?);
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::Checkpoint(format!("implausible tensor shape {rows}x{cols}")));
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let n = rows * cols;
        if n * 8 > self.buf.len() - self.pos {
            return Err(Error::Checkpoint(format!("truncated tensor at byte {}", self.pos)));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::from_vec(rows, cols, data)
    }

    fn dense(&mut self) -> Result<DenseLayer> {
        let spectral_norm = self.flag()?;
        let weight = self.tensor()?;
        let bias = match self.flag()? {
            true => Some(self.tensor()?),
            false => None,
        };
        let sn_u = self.tensor()?;
        if sn_u.shape() != crate::Shape(weight.rows(), 1) {
            return Err(Error::Checkpoint(format!(
                "sn_u shape {} for weight {}",
                sn_u.shape(),
                weight.shape()
            )));
        }
        let mut layer = DenseLayer::from_weights(weight, bias, spectral_norm)?;
        layer.sn_u = sn_u;
        Ok(layer)
    }

    fn mlp(&mut self) -> Result<Mlp> {
        let n = self.u32()? as usize;
        let mut layers = Vec::with_capacity(n.min(64));
        let mut activations = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let tag = self.u8()?;
            let slope = self.f64()?;
            activations.push(match tag {
                0 => Activation::Identity,
                1 => Activation::Relu,
                2 => Activation::LeakyRelu(slope),
                3 => Activation::Tanh,
                4 => Activation::Sigmoid,
                t => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
            });
            layers.push(self.dense()?);
        }
        Mlp::from_layers(layers, activations)
    }

    fn cr(&mut self) -> Result<CRHead> {
        let spectral_norm = self.flag()?;
        let weights = self.tensor()?;
        let count = self.u32()? as usize;
        if count != weights.rows() {
            return Err(Error::Checkpoint(format!(
                "{count} sn vectors for {} head rows",
                weights.rows()
            )));
        }
        let sn_u = (0..count).map(|_| self.tensor()).collect::<Result<Vec<_>>>()?;
        let mut head = CRHead::from_weights(weights, spectral_norm)?;
        head.sn_u = sn_u;
        Ok(head)
    }
}
