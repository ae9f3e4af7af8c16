//! Field snapshots: a TOML header, a `---` line, then raw little-endian `f64`
//! in the layout of `StateField::raw` (component fastest, then `i`, `j`, and
//! `k` from the lower ghost plane `-1` to the upper one `n₃`).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use sbp_elastic::elastic3d::StateField;
use sbp_elastic::geometry::Lattice;

use crate::error::{CliError, Result};

pub const MAGIC: &str = "sbp-elastic-snapshot";
pub const VERSION: u32 = 1;
const SEPARATOR: &str = "---";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub magic: String,
    pub version: u32,
    pub block: String,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub periodic: bool,
    pub ghost_planes: usize,
    /// Reference-space spacings.
    pub h: [f64; 3],
    pub time: f64,
    pub step: usize,
    pub components: usize,
    pub byte_order: String,
}

impl SnapshotHeader {
    pub fn new(block: &str, lattice: Lattice, time: f64, step: usize) -> Self {
        SnapshotHeader {
            magic: MAGIC.into(),
            version: VERSION,
            block: block.into(),
            n1: lattice.n1,
            n2: lattice.n2,
            n3: lattice.n3,
            periodic: lattice.periodic,
            ghost_planes: 2,
            h: lattice.h(),
            time,
            step,
            components: 3,
            byte_order: "little-endian".into(),
        }
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.n1, self.n2, self.n3, self.periodic)
    }

    pub fn values(&self) -> usize {
        self.components * self.n1 * self.n2 * (self.n3 + self.ghost_planes)
    }
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, u: &StateField<f64>) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let text = toml::to_string(header).map_err(|e| CliError::Snapshot { path: path.into(), msg: e.to_string() })?;
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    w.write_all(text.as_bytes()).map_err(io)?;
    writeln!(w, "{SEPARATOR}").map_err(io)?;
    for v in u.raw() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, StateField<f64>)> {
    let io = |e| CliError::io(path, e);
    let bad = |msg: String| CliError::Snapshot { path: path.into(), msg };
    let mut r = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut text = String::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(io)? == 0 {
            return Err(bad("missing header terminator".into()));
        }
        if line.trim_end() == SEPARATOR {
            break;
        }
        text.push_str(&line);
    }
    let header: SnapshotHeader = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if header.magic != MAGIC || header.version != VERSION {
        return Err(bad(format!("unsupported format {} v{}", header.magic, header.version)));
    }
    if header.byte_order != "little-endian" || header.components != 3 || header.ghost_planes != 2 {
        return Err(bad("unsupported payload layout".into()));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != 8 * header.values() {
        return Err(bad(format!("payload has {} bytes, header implies {}", bytes.len(), 8 * header.values())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let u = StateField::from_raw(header.lattice(), data)?;
    Ok((header, u))
}

struct Frame {
    path: PathBuf,
    header: SnapshotHeader,
    field: StateField<f64>,
}

/// Background writer holding at most one frame in flight.
pub struct SnapshotWriter {
    tx: Option<SyncSender<Frame>>,
    handle: Option<JoinHandle<Result<usize>>>,
}

impl SnapshotWriter {
    pub fn spawn() -> Self {
        let (tx, rx) = sync_channel::<Frame>(1);
        let handle = std::thread::spawn(move || {
            let mut n = 0;
            for f in rx {
                write_snapshot(&f.path, &f.header, &f.field)?;
                n += 1;
            }
            Ok(n)
        });
        SnapshotWriter { tx: Some(tx), handle: Some(handle) }
    }

    pub fn submit(&self, path: PathBuf, header: SnapshotHeader, field: StateField<f64>) -> Result<()> {
        let tx = self.tx.as_ref().expect("writer is open until finish");
        tx.send(Frame { path, header, field }).map_err(|_| CliError::Writer("snapshot writer stopped".into()))
    }

    /// Flushes pending frames and returns how many were written.
    pub fn finish(mut self) -> Result<usize> {
        drop(self.tx.take());
        let h = self.handle.take().expect("writer joined once");
        h.join().map_err(|_| CliError::Writer("snapshot writer panicked".into()))?
    }
}
