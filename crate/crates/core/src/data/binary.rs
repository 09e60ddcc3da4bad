//! Compact normalized interaction file.
//!
//! Layout (little-endian):
//! ```text
//! magic      8 bytes  "MOSAICI1"
//! n_users    u64
//! n_items    u64
//! n_records  u64
//! skipped    u64
//! records    n_records x 24 bytes: user u32, item u32, timestamp i64, feedback u8, 7 zero bytes
//! names      n_users then n_items entries: u32 byte length + UTF-8 bytes
//! ```
//! Records are stored in log order (grouped by user, time-sorted).

use std::io::{Read, Write};

use crate::data::{DataError, Feedback, Interaction, InteractionLog};

pub const NORMALIZED_MAGIC: &[u8; 8] = b"MOSAICI1";

pub fn write_normalized<W: Write>(log: &InteractionLog, mut w: W) -> Result<(), DataError> {
    w.write_all(NORMALIZED_MAGIC)?;
    for v in [log.n_users(), log.n_items(), log.len(), log.skipped_rows()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    let mut record = [0u8; 24];
    for x in log.interactions() {
        record[0..4].copy_from_slice(&x.user.to_le_bytes());
        record[4..8].copy_from_slice(&x.item.to_le_bytes());
        record[8..16].copy_from_slice(&x.timestamp.to_le_bytes());
        record[16] = u8::from(x.feedback.is_positive());
        w.write_all(&record)?;
    }
    for name in log.user_names().iter().chain(log.item_names()) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DataError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_normalized<R: Read>(mut r: R) -> Result<InteractionLog, DataError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NORMALIZED_MAGIC {
        return Err(DataError::Malformed("bad magic".into()));
    }
    let n_users = read_u64(&mut r)? as usize;
    let n_items = read_u64(&mut r)? as usize;
    let n_records = read_u64(&mut r)? as usize;
    let skipped = read_u64(&mut r)? as usize;

    let mut interactions = Vec::with_capacity(n_records);
    let mut record = [0u8; 24];
    for _ in 0..n_records {
        r.read_exact(&mut record)?;
        let user = u32::from_le_bytes(record[0..4].try_into().unwrap());
        let item = u32::from_le_bytes(record[4..8].try_into().unwrap());
        if user as usize >= n_users || item as usize >= n_items {
            return Err(DataError::Malformed(format!(
                "record ({user}, {item}) outside id ranges"
            )));
        }
        interactions.push(Interaction {
            user,
            item,
            timestamp: i64::from_le_bytes(record[8..16].try_into().unwrap()),
            feedback: match record[16] {
                1 => Feedback::Positive,
                0 => Feedback::Negative,
                b => return Err(DataError::Malformed(format!("feedback byte {b}"))),
            },
        });
    }
    let mut names = Vec::with_capacity(n_users + n_items);
    for _ in 0..n_users + n_items {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut bytes)?;
        names.push(String::from_utf8(bytes).map_err(|e| DataError::Malformed(e.to_string()))?);
    }
    let item_names = names.split_off(n_users);
    let mut log = InteractionLog::from_interactions(interactions, names, item_names);
    log.skipped_rows = skipped;
    Ok(log)
}
