//! Learner checkpoint, little-endian:
//!
//! ```text
//! magic "DDQL" | version u32 | config JSON (u32 length + bytes)
//! epsilon f64 | episodes u64 | train steps u64 | target syncs u64
//! evaluation net | target net        (network format, see `mlp`)
//! optimizer state
//! buffer: capacity-independent count u64, then per experience
//!   state f64 x 6 | action u32 | reward f64 | next state f64 x 6 | terminal u8
//! ```

use super::config::DdqlConfig;
use super::learner::Learner;
use crate::mlp::{Mlp, MlpError, RmsProp};
use crate::rl::{Experience, ReplayBuffer, StateVector, FEATURE_COUNT};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: [u8; 4] = *b"DDQL";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Network(#[from] MlpError),
    #[error("bad checkpoint: {0}")]
    Format(String),
}

fn write_state<W: Write>(out: &mut W, s: &StateVector) -> std::io::Result<()> {
    for v in s.to_array() {
        out.write_f64::<LE>(v)?;
    }
    Ok(())
}

fn read_state<R: Read>(input: &mut R) -> std::io::Result<StateVector> {
    let mut a = [0.0; FEATURE_COUNT];
    input.read_f64_into::<LE>(&mut a)?;
    Ok(StateVector::from_array(a))
}

impl Learner {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), CheckpointError> {
        out.write_all(&MAGIC)?;
        out.write_u32::<LE>(VERSION)?;
        let config = serde_json::to_vec(&self.config).map_err(|e| CheckpointError::Format(e.to_string()))?;
        out.write_u32::<LE>(config.len() as u32)?;
        out.write_all(&config)?;
        out.write_f64::<LE>(self.epsilon)?;
        out.write_u64::<LE>(self.episodes_done)?;
        out.write_u64::<LE>(self.train_steps)?;
        out.write_u64::<LE>(self.target_syncs)?;
        self.eval_net.write_to(&mut out)?;
        self.target_net.write_to(&mut out)?;
        self.optimizer.write_to(&mut out)?;
        out.write_u64::<LE>(self.buffer.len() as u64)?;
        for e in self.buffer.iter() {
            write_state(&mut out, &e.state)?;
            out.write_u32::<LE>(e.action as u32)?;
            out.write_f64::<LE>(e.reward)?;
            write_state(&mut out, &e.next_state)?;
            out.write_u8(e.terminal as u8)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Learner, CheckpointError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(CheckpointError::Format(format!("bad magic {magic:?}")));
        }
        let version = input.read_u32::<LE>()?;
        if version != VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {version}")));
        }
        let len = input.read_u32::<LE>()? as usize;
        if len > 1 << 20 {
            return Err(CheckpointError::Format(format!("config block of {len} bytes")));
        }
        let mut raw = vec![0u8; len];
        input.read_exact(&mut raw)?;
        let config: DdqlConfig = serde_json::from_slice(&raw).map_err(|e| CheckpointError::Format(e.to_string()))?;
        let epsilon = input.read_f64::<LE>()?;
        let counters = (input.read_u64::<LE>()?, input.read_u64::<LE>()?, input.read_u64::<LE>()?);
        let eval_net = Mlp::read_from(&mut input)?;
        let target_net = Mlp::read_from(&mut input)?;
        let optimizer = RmsProp::read_from(&mut input, &eval_net)?;
        let mut buffer = ReplayBuffer::new(config.min_experience, config.max_experience)
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        let count = input.read_u64::<LE>()?;
        if count > config.max_experience as u64 {
            return Err(CheckpointError::Format(format!("{count} experiences exceed capacity")));
        }
        for _ in 0..count {
            let state = read_state(&mut input)?;
            let action = input.read_u32::<LE>()? as usize;
            let reward = input.read_f64::<LE>()?;
            let next_state = read_state(&mut input)?;
            let terminal = input.read_u8()? != 0;
            buffer.push(Experience { state, action, reward, next_state, terminal });
        }
        Learner::from_parts(config, eval_net, target_net, optimizer, buffer, epsilon, counters)
            .map_err(CheckpointError::Format)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Learner, CheckpointError> {
        Learner::read_from(BufReader::new(File::open(path)?))
    }
}
