//! Little-endian binary snapshot of a buffer's contents and priority records.
//!
//! ```text
//! header   "CRBF" | version u32 | capacity u64 | obs_dim u32
//! state    write_cursor u64 | len u64 | inserted_total u64
//!          | running_loss_min f64 | skipped_updates u64 | applied_updates u64
//! per slot occupied u8 | serial u64 | priority f64 | visit_count u64 | last_signal f64
//!          and, when occupied:
//!          action u32 | reward f64 | terminal u8 | env_step u64 | phase_tag u8 (255 = none)
//!          | observation f64 * obs_dim | next_observation f64 * obs_dim
//! ```
//!
//! Scalars are widened to `f64` on write. Priority parameters are not stored;
//! the reader supplies them.

use std::io::{Read, Write};
use std::sync::Arc;

use super::buffer::{PrioritizedBuffer, PriorityRecord};
use super::priority::PriorityParams;
use super::transition::Transition;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CRBF";
pub const VERSION: u32 = 1;
const NO_PHASE: u8 = u8::MAX;

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Snapshot("value exceeds usize".into()))
    }
}

impl<S: Scalar> PrioritizedBuffer<S> {
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.obs_dim.unwrap_or(0);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.capacity as u64).to_le_bytes())?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        w.write_all(&(self.write_cursor as u64).to_le_bytes())?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        w.write_all(&self.inserted_total.to_le_bytes())?;
        w.write_all(&self.running_loss_min.as_f64().to_le_bytes())?;
        w.write_all(&self.skipped_updates.to_le_bytes())?;
        w.write_all(&self.applied_updates.to_le_bytes())?;
        for i in 0..self.capacity {
            let r = &self.records[i];
            w.write_all(&[self.slots[i].is_some() as u8])?;
            w.write_all(&self.serials[i].to_le_bytes())?;
            w.write_all(&r.priority.as_f64().to_le_bytes())?;
            w.write_all(&r.visit_count.to_le_bytes())?;
            w.write_all(&r.last_signal.as_f64().to_le_bytes())?;
            if let Some(t) = &self.slots[i] {
                w.write_all(&(t.action as u32).to_le_bytes())?;
                w.write_all(&t.reward.as_f64().to_le_bytes())?;
                w.write_all(&[t.terminal as u8])?;
                w.write_all(&t.env_step.to_le_bytes())?;
                w.write_all(&[t.phase_tag.unwrap_or(NO_PHASE)])?;
                for x in t.observation.iter().chain(t.next_observation.iter()) {
                    w.write_all(&x.as_f64().to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(r: R, params: PriorityParams<S>) -> Result<Self> {
        let mut r = Reader(r);
        if &r.bytes::<4>()? != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let capacity = r.usize()?;
        let dim = r.u32()? as usize;
        let mut buffer = PrioritizedBuffer::new(capacity, params)?;
        buffer.obs_dim = (dim > 0).then_some(dim);
        buffer.write_cursor = r.usize()?;
        buffer.len = r.usize()?;
        buffer.inserted_total = r.u64()?;
        buffer.running_loss_min = S::of(r.f64()?);
        buffer.skipped_updates = r.u64()?;
        buffer.applied_updates = r.u64()?;
        if buffer.write_cursor >= capacity || buffer.len > capacity {
            return Err(Error::Snapshot("cursor or length out of range".into()));
        }

        let mut occupied = 0;
        for i in 0..capacity {
            let is_occupied = match r.u8()? {
                0 => false,
                1 => true,
                b => return Err(Error::Snapshot(format!("bad occupancy byte {b}"))),
            };
            buffer.serials[i] = r.u64()?;
            let record = PriorityRecord {
                priority: S::of(r.f64()?),
                visit_count: r.u64()?,
                last_signal: S::of(r.f64()?),
            };
            if !is_occupied {
                continue;
            }
            occupied += 1;
            let action = r.u32()? as usize;
            let reward = S::of(r.f64()?);
            let terminal = r.u8()? != 0;
            let env_step = r.u64()?;
            let phase = r.u8()?;
            let mut read_vec = || -> Result<Arc<[S]>> {
                (0..dim).map(|_| r.f64().map(S::of)).collect::<Result<Vec<_>>>().map(Into::into)
            };
            let observation = read_vec()?;
            let next_observation = read_vec()?;
            buffer.slots[i] = Some(Transition {
                observation,
                action,
                reward,
                next_observation,
                terminal,
                env_step,
                phase_tag: (phase != NO_PHASE).then_some(phase),
            });
            buffer.records[i] = record;
            buffer
                .tree
                .set(i, record.priority)
                .map_err(|e| Error::Snapshot(format!("slot {i}: {e}")))?;
        }
        if occupied != buffer.len {
            return Err(Error::Snapshot(format!(
                "header declares {} occupied slots, found {occupied}",
                buffer.len
            )));
        }
        Ok(buffer)
    }
}
