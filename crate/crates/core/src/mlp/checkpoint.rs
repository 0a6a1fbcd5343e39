//! Binary parameter dump, all fields little-endian:
//!
//! ```text
//! magic "QNET" | version u32 | dropout f64 | layer count u32
//! per layer: rows u32 | cols u32 | weights f64 x rows*cols (row-major) | biases f64 x rows
//! ```
//!
//! Optimizer state uses the same per-layer block after its own three f64
//! hyperparameters and a layer count.

use super::{Dense, Mlp, MlpError, RmsProp};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"QNET";
pub const CHECKPOINT_VERSION: u32 = 1;

// Guards against allocating absurd buffers from a corrupt header.
const MAX_DIM: u32 = 1 << 16;

fn write_layers<W: Write>(out: &mut W, layers: &[Dense]) -> std::io::Result<()> {
    out.write_u32::<LE>(layers.len() as u32)?;
    for l in layers {
        out.write_u32::<LE>(l.rows as u32)?;
        out.write_u32::<LE>(l.cols as u32)?;
        for v in l.weights.iter().chain(&l.biases) {
            out.write_f64::<LE>(*v)?;
        }
    }
    Ok(())
}

fn read_layers<R: Read>(input: &mut R) -> Result<Vec<Dense>, MlpError> {
    let count = input.read_u32::<LE>()?;
    if count == 0 || count > 64 {
        return Err(MlpError::Format(format!("layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let rows = input.read_u32::<LE>()?;
        let cols = input.read_u32::<LE>()?;
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(MlpError::Format(format!("layer shape {rows}x{cols}")));
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let mut weights = vec![0.0; rows * cols];
        input.read_f64_into::<LE>(&mut weights)?;
        let mut biases = vec![0.0; rows];
        input.read_f64_into::<LE>(&mut biases)?;
        layers.push(Dense { rows, cols, weights, biases });
    }
    Ok(layers)
}

impl Mlp {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), MlpError> {
        out.write_all(&CHECKPOINT_MAGIC)?;
        out.write_u32::<LE>(CHECKPOINT_VERSION)?;
        out.write_f64::<LE>(self.dropout)?;
        write_layers(&mut out, &self.layers)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Mlp, MlpError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(MlpError::Format(format!("bad magic {magic:?}")));
        }
        let version = input.read_u32::<LE>()?;
        if version != CHECKPOINT_VERSION {
            return Err(MlpError::Format(format!("unsupported version {version}")));
        }
        let dropout = input.read_f64::<LE>()?;
        let layers = read_layers(&mut input)?;
        Mlp::from_layers(layers, dropout)
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Mlp, MlpError> {
        Mlp::read_from(BufReader::new(File::open(path)?))
    }

    /// Load and require the given layer sizes.
    pub fn load_expecting(path: &Path, sizes: &[usize]) -> Result<Mlp, MlpError> {
        let net = Mlp::load(path)?;
        if net.sizes() != sizes {
            return Err(MlpError::Shape { expected: sizes.to_vec(), found: net.sizes() });
        }
        Ok(net)
    }
}

impl RmsProp {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), MlpError> {
        out.write_f64::<LE>(self.learning_rate)?;
        out.write_f64::<LE>(self.decay)?;
        out.write_f64::<LE>(self.epsilon)?;
        write_layers(&mut out, &self.square_avg)?;
        Ok(())
    }

    /// Reads optimizer state and checks it matches `net`.
    pub fn read_from<R: Read>(mut input: R, net: &Mlp) -> Result<RmsProp, MlpError> {
        let learning_rate = input.read_f64::<LE>()?;
        let decay = input.read_f64::<LE>()?;
        let epsilon = input.read_f64::<LE>()?;
        let square_avg = read_layers(&mut input)?;
        let shapes = |ls: &[Dense]| ls.iter().map(|l| (l.rows, l.cols)).collect::<Vec<_>>();
        if shapes(&square_avg) != shapes(net.layers()) {
            let mut found = vec![square_avg[0].cols];
            found.extend(square_avg.iter().map(|l| l.rows));
            return Err(MlpError::Shape { expected: net.sizes(), found });
        }
        if square_avg.iter().any(|l| l.weights.iter().chain(&l.biases).any(|v| v.is_nan() || *v < 0.0)) {
            return Err(MlpError::Format("negative or NaN square average".into()));
        }
        Ok(RmsProp { learning_rate, decay, epsilon, square_avg })
    }
}
