//! Append-only record log and snapshot files.
//!
//! Both files share one frame format:
//!
//! ```text
//!   frame := len:u32-le  payload:len bytes  crc:u32-le   (crc32 of payload)
//! ```
//!
//! `store.log` frames carry `(rec <op-seq> <op>)`; a bad checksum or a torn
//! tail truncates the log at the last valid frame. `store.snap` starts with
//! the 5-byte format-version header `MTKB1`, then a `(snap-meta <op-seq>
//! <next-fact> <next-event-ordinal>)` frame, then one frame per replayable
//! op. Ops are canonical-printed terms:
//!
//! ```text
//!   (i <id> <term>)                        intern assignment
//!   (e <id> <source> <ts> <type> <meta> <update>)   provenance event (meta 0 = none)
//!   (s <fact> <mt> <event> <meta> <body>)  store fact + support entry
//!   (u <fact> <mt> <event>)                remove one support entry
//!   (f <fact> <mt>)                        forget a fact membership
//!   (r <event>)                            retract an event
//!   (x <pred> <pos>)                       declare a key index
//! ```

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{KbError, Result};
use crate::intern::EntityId;
use crate::mt::MtId;
use crate::parse::parse_term;
use crate::provenance::EventId;
use crate::store::FactId;
use crate::term::Term;

pub const SNAP_MAGIC: &[u8; 5] = b"MTKB1";
pub const LOG_FILE: &str = "store.log";
pub const SNAP_FILE: &str = "store.snap";

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(payload)?;
    w.write_all(&crc32fast::hash(payload).to_le_bytes())?;
    Ok(())
}

/// Read one frame. `Ok(None)` on clean EOF; an error for a torn or corrupt
/// frame (the caller truncates).
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_le_bytes(len_buf) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    let mut crc_buf = [0u8; 4];
    r.read_exact(&mut crc_buf)?;
    if crc32fast::hash(&payload) != u32::from_le_bytes(crc_buf) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad checksum"));
    }
    Ok(Some(payload))
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogOp {
    Intern {
        id: EntityId,
        term: Term,
    },
    Event {
        id: EventId,
        source: Term,
        timestamp: u64,
        event_type: Term,
        meta_event: Option<EventId>,
        update: bool,
    },
    Store {
        fact: FactId,
        mt: MtId,
        event: EventId,
        meta: Option<EventId>,
        body: Term,
    },
    Unsupport {
        fact: FactId,
        mt: MtId,
        event: EventId,
    },
    Forget {
        fact: FactId,
        mt: MtId,
    },
    Retract {
        event: EventId,
    },
    DeclareIndex {
        predicate: EntityId,
        position: u16,
    },
}

fn int(n: u64) -> Term {
    Term::Integer(n as i64)
}

fn opt_event(e: Option<EventId>) -> Term {
    int(e.map_or(0, |e| e.0 .0))
}

impl LogOp {
    pub fn to_term(&self) -> Term {
        match self {
            LogOp::Intern { id, term } => Term::app("i", vec![int(id.0), term.clone()]),
            LogOp::Event {
                id,
                source,
                timestamp,
                event_type,
                meta_event,
                update,
            } => Term::app(
                "e",
                vec![
                    int(id.0 .0),
                    source.clone(),
                    int(*timestamp),
                    event_type.clone(),
                    opt_event(*meta_event),
                    Term::sym(if *update { "t" } else { "nil" }),
                ],
            ),
            LogOp::Store {
                fact,
                mt,
                event,
                meta,
                body,
            } => Term::app(
                "s",
                vec![
                    int(fact.0),
                    int(mt.0 .0),
                    int(event.0 .0),
                    opt_event(*meta),
                    body.clone(),
                ],
            ),
            LogOp::Unsupport { fact, mt, event } => Term::app(
                "u",
                vec![int(fact.0), int(mt.0 .0), int(event.0 .0)],
            ),
            LogOp::Forget { fact, mt } => Term::app("f", vec![int(fact.0), int(mt.0 .0)]),
            LogOp::Retract { event } => Term::app("r", vec![int(event.0 .0)]),
            LogOp::DeclareIndex {
                predicate,
                position,
            } => Term::app("x", vec![int(predicate.0), int(*position as u64)]),
        }
    }

    pub fn from_term(t: &Term) -> Result<LogOp> {
        let bad = || KbError::Storage(format!("unrecognized log record: {}", t));
        let es = t.elements().ok_or_else(bad)?;
        let head = t.head_symbol().ok_or_else(bad)?;
        let num = |i: usize| -> Result<u64> {
            match es.get(i) {
                Some(Term::Integer(n)) if *n >= 0 => Ok(*n as u64),
                _ => Err(bad()),
            }
        };
        let meta_at = |i: usize| -> Result<Option<EventId>> {
            let raw = num(i)?;
            Ok((raw != 0).then_some(EventId(EntityId(raw))))
        };
        match head {
            "i" if es.len() == 3 => Ok(LogOp::Intern {
                id: EntityId(num(1)?),
                term: es[2].clone(),
            }),
            "e" if es.len() == 7 => Ok(LogOp::Event {
                id: EventId(EntityId(num(1)?)),
                source: es[2].clone(),
                timestamp: num(3)?,
                event_type: es[4].clone(),
                meta_event: meta_at(5)?,
                update: matches!(&es[6], Term::Symbol(s) if s == "t"),
            }),
            "s" if es.len() == 6 => Ok(LogOp::Store {
                fact: FactId(num(1)?),
                mt: MtId(EntityId(num(2)?)),
                event: EventId(EntityId(num(3)?)),
                meta: meta_at(4)?,
                body: es[5].clone(),
            }),
            "u" if es.len() == 4 => Ok(LogOp::Unsupport {
                fact: FactId(num(1)?),
                mt: MtId(EntityId(num(2)?)),
                event: EventId(EntityId(num(3)?)),
            }),
            "f" if es.len() == 3 => Ok(LogOp::Forget {
                fact: FactId(num(1)?),
                mt: MtId(EntityId(num(2)?)),
            }),
            "r" if es.len() == 2 => Ok(LogOp::Retract {
                event: EventId(EntityId(num(1)?)),
            }),
            "x" if es.len() == 3 => Ok(LogOp::DeclareIndex {
                predicate: EntityId(num(1)?),
                position: num(2)?.min(u16::MAX as u64) as u16,
            }),
            _ => Err(bad()),
        }
    }
}

// ---------------------------------------------------------------------------
// Log files
// ---------------------------------------------------------------------------

pub struct LogWriter {
    file: BufWriter<File>,
    path: PathBuf,
}

impl LogWriter {
    pub fn open_append(path: &Path) -> io::Result<LogWriter> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(LogWriter {
            file: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    /// Append one op frame and flush it to the OS.
    pub fn append(&mut self, op_seq: u64, op: &LogOp) -> io::Result<()> {
        let record = Term::app("rec", vec![int(op_seq), op.to_term()]);
        write_frame(&mut self.file, record.canonical_print().as_bytes())?;
        self.file.flush()
    }

    pub fn sync(&mut self) -> io::Result<()> {
        self.file.flush()?;
        self.file.get_ref().sync_data()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Truncate to empty after a snapshot has made the log redundant.
    pub fn truncate(&mut self) -> io::Result<()> {
        self.file.flush()?;
        let f = self.file.get_mut();
        f.set_len(0)?;
        f.seek(SeekFrom::Start(0))?;
        Ok(())
    }
}

pub struct LogRecovery {
    pub records: Vec<(u64, LogOp)>,
    /// Set when a corrupt or torn tail was cut off.
    pub truncated_at: Option<u64>,
}

/// Read every valid record; on corruption, truncate the file at the last
/// valid frame and report the cut point.
pub fn recover_log(path: &Path) -> Result<LogRecovery> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Ok(LogRecovery {
                records: Vec::new(),
                truncated_at: None,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut valid_len: u64 = 0;
    let mut corrupt = false;
    loop {
        match read_frame(&mut reader) {
            Ok(Some(payload)) => {
                let text = String::from_utf8(payload.clone())
                    .map_err(|_| KbError::Storage("log record is not UTF-8".into()))?;
                let term = match parse_term(&text) {
                    Ok(t) => t,
                    Err(_) => {
                        corrupt = true;
                        break;
                    }
                };
                let es = term.elements().unwrap_or(&[]);
                let seq = match (term.head_symbol(), es.get(1)) {
                    (Some("rec"), Some(Term::Integer(n))) if *n >= 0 => *n as u64,
                    _ => {
                        corrupt = true;
                        break;
                    }
                };
                let op = match es.get(2).map(LogOp::from_term) {
                    Some(Ok(op)) => op,
                    _ => {
                        corrupt = true;
                        break;
                    }
                };
                records.push((seq, op));
                valid_len += 4 + payload.len() as u64 + 4;
            }
            Ok(None) => break,
            Err(_) => {
                corrupt = true;
                break;
            }
        }
    }
    if corrupt {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(valid_len)?;
        Ok(LogRecovery {
            records,
            truncated_at: Some(valid_len),
        })
    } else {
        Ok(LogRecovery {
            records,
            truncated_at: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

pub struct SnapshotMeta {
    pub op_seq: u64,
    pub next_fact: u64,
    pub next_event_ordinal: u64,
}

/// Write a snapshot atomically: temp file, fsync, rename.
pub fn write_snapshot(
    dir: &Path,
    meta: &SnapshotMeta,
    ops: impl Iterator<Item = LogOp>,
) -> Result<()> {
    let tmp = dir.join("store.snap.tmp");
    let final_path = dir.join(SNAP_FILE);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(SNAP_MAGIC)?;
        let header = Term::app(
            "snap-meta",
            vec![int(meta.op_seq), int(meta.next_fact), int(meta.next_event_ordinal)],
        );
        write_frame(&mut w, header.canonical_print().as_bytes())?;
        for op in ops {
            write_frame(&mut w, op.to_term().canonical_print().as_bytes())?;
        }
        w.flush()?;
        w.get_ref().sync_data()?;
    }
    std::fs::rename(&tmp, &final_path)?;
    Ok(())
}

/// Load a snapshot. `Ok(None)` when no snapshot exists; corruption is a
/// hard error (the log it superseded is gone).
pub fn read_snapshot(dir: &Path) -> Result<Option<(SnapshotMeta, Vec<LogOp>)>> {
    let path = dir.join(SNAP_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| KbError::Storage("snapshot too short for header".into()))?;
    if &magic != SNAP_MAGIC {
        return Err(KbError::Storage(format!(
            "bad snapshot header: expected {:?}",
            std::str::from_utf8(SNAP_MAGIC).unwrap()
        )));
    }
    let corrupt = || KbError::Storage("corrupt snapshot".into());
    let header = read_frame(&mut r)
        .map_err(|_| corrupt())?
        .ok_or_else(corrupt)?;
    let header =
        parse_term(std::str::from_utf8(&header).map_err(|_| corrupt())?).map_err(|_| corrupt())?;
    let es = header.elements().unwrap_or(&[]);
    let meta = match (header.head_symbol(), es.get(1), es.get(2), es.get(3)) {
        (
            Some("snap-meta"),
            Some(Term::Integer(seq)),
            Some(Term::Integer(nf)),
            Some(Term::Integer(no)),
        ) if *seq >= 0 && *nf >= 0 && *no >= 0 => SnapshotMeta {
            op_seq: *seq as u64,
            next_fact: *nf as u64,
            next_event_ordinal: *no as u64,
        },
        _ => return Err(corrupt()),
    };
    let mut ops = Vec::new();
    while let Some(payload) = read_frame(&mut r).map_err(|_| corrupt())? {
        let term = parse_term(std::str::from_utf8(&payload).map_err(|_| corrupt())?)
            .map_err(|_| corrupt())?;
        ops.push(LogOp::from_term(&term)?);
    }
    Ok(Some((meta, ops)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_ops() -> Vec<LogOp> {
        vec![
            LogOp::Intern {
                id: EntityId(1),
                term: Term::sym("foo"),
            },
            LogOp::Event {
                id: EventId(EntityId(2)),
                source: Term::string("file:///a.krf"),
                timestamp: 3_919_440_252,
                event_type: Term::sym("InformationTransferEvent"),
                meta_event: None,
                update: true,
            },
            LogOp::Store {
                fact: FactId(1),
                mt: MtId(EntityId(3)),
                event: EventId(EntityId(2)),
                meta: Some(EventId(EntityId(2))),
                body: parse_term("(foo (TheList A B))").unwrap(),
            },
            LogOp::Retract {
                event: EventId(EntityId(2)),
            },
            LogOp::DeclareIndex {
                predicate: EntityId(4),
                position: 1,
            },
        ]
    }

    #[test]
    fn ops_round_trip_through_terms() {
        for op in sample_ops() {
            assert_eq!(LogOp::from_term(&op.to_term()).unwrap(), op);
        }
    }

    #[test]
    fn log_append_and_recover() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let mut w = LogWriter::open_append(&path).unwrap();
        for (i, op) in sample_ops().into_iter().enumerate() {
            w.append(i as u64 + 1, &op).unwrap();
        }
        drop(w);
        let rec = recover_log(&path).unwrap();
        assert_eq!(rec.records.len(), 5);
        assert!(rec.truncated_at.is_none());
        assert_eq!(rec.records[0].0, 1);
        assert_eq!(rec.records[4].0, 5);
    }

    #[test]
    fn torn_tail_is_truncated_to_last_valid_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let mut w = LogWriter::open_append(&path).unwrap();
        for (i, op) in sample_ops().into_iter().enumerate() {
            w.append(i as u64 + 1, &op).unwrap();
        }
        drop(w);
        let full_len = std::fs::metadata(&path).unwrap().len();
        // Cut mid-record.
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(full_len - 3).unwrap();
        drop(f);
        let rec = recover_log(&path).unwrap();
        assert_eq!(rec.records.len(), 4);
        assert!(rec.truncated_at.is_some());
        // Recovery is stable: a second pass sees a clean log.
        let rec2 = recover_log(&path).unwrap();
        assert_eq!(rec2.records.len(), 4);
        assert!(rec2.truncated_at.is_none());
    }

    #[test]
    fn corrupted_byte_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let mut w = LogWriter::open_append(&path).unwrap();
        for (i, op) in sample_ops().into_iter().enumerate() {
            w.append(i as u64 + 1, &op).unwrap();
        }
        drop(w);
        // Flip a byte in the middle of the file.
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        let rec = recover_log(&path).unwrap();
        assert!(rec.records.len() < 5);
        assert!(rec.truncated_at.is_some());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SnapshotMeta {
            op_seq: 42,
            next_fact: 7,
            next_event_ordinal: 3,
        };
        write_snapshot(dir.path(), &meta, sample_ops().into_iter()).unwrap();
        let (meta2, ops) = read_snapshot(dir.path()).unwrap().unwrap();
        assert_eq!(meta2.op_seq, 42);
        assert_eq!(meta2.next_fact, 7);
        assert_eq!(ops, sample_ops());
        // Header magic is the first thing in the file.
        let bytes = std::fs::read(dir.path().join(SNAP_FILE)).unwrap();
        assert_eq!(&bytes[..5], SNAP_MAGIC);
    }

    #[test]
    fn missing_snapshot_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_snapshot(dir.path()).unwrap().is_none());
    }
}
