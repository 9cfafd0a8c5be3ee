//! CSV export of run traces and the matching readers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! reading a file back reproduces every value bit for bit.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use crate::sim::{FrameRow, RunSummary, RunTrace, SlotRow};
use crate::{Error, Result};

pub const SLOTS_FILE: &str = "slots.csv";
pub const FRAMES_FILE: &str = "frames.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const SLOT_HEADER: [&str; 10] = [
    "frame", "slot", "ue", "a_bps", "r_bps", "qhat_bits", "sum_q_bits", "L", "dL", "dL_ub",
];
pub const FRAME_HEADER: [&str; 6] = ["frame", "ue", "ru", "beta", "uhat", "thetahat"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f))
}

/// Writes `slots.csv`, `frames.csv` and `summary.csv` into `dir`,
/// creating it if needed. Returns the three paths.
pub fn export_csv(trace: &RunTrace, dir: &Path) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let slots = dir.join(SLOTS_FILE);
    let frames = dir.join(FRAMES_FILE);
    let summary = dir.join(SUMMARY_FILE);
    write_slots(&trace.slots, &slots)?;
    write_frames(&trace.frames, &frames)?;
    write_summary(&trace.summary, &summary)?;
    Ok([slots, frames, summary])
}

pub fn write_slots(rows: &[SlotRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SLOT_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            r.slot.to_string(),
            r.ue.to_string(),
            r.a_bps.to_string(),
            r.r_bps.to_string(),
            r.qhat_bits.to_string(),
            r.sum_q_bits.to_string(),
            r.l.to_string(),
            r.dl.to_string(),
            r.dl_ub.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_frames(rows: &[FrameRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(FRAME_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            r.ue.to_string(),
            r.ru.to_string(),
            r.beta.to_string(),
            r.uhat.to_string(),
            r.thetahat.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `(key, value)` pairs of a summary, in file order.
pub fn summary_fields(s: &RunSummary) -> Vec<(&'static str, String)> {
    vec![
        ("scheme", s.scheme.to_string()),
        ("scheduler", s.scheduler.to_string()),
        ("phi", s.phi.to_string()),
        ("seed", s.seed.to_string()),
        ("frames", s.frames.to_string()),
        ("slots", s.slots.to_string()),
        ("steady_a_norm_bps", s.steady_a_norm.to_string()),
        ("steady_qhat_l1_bits", s.steady_qhat_l1.to_string()),
        ("worst_delay_s", s.worst_delay_s.to_string()),
        ("convergence_slot", s.convergence_slot.to_string()),
        ("drift_violations", s.drift_violations.to_string()),
        ("max_b", s.max_b.to_string()),
        ("infeasible_events", s.infeasible_events.to_string()),
        ("degenerate_events", s.degenerate_events.to_string()),
        ("capacity_max_bps", s.capacity_max.to_string()),
    ]
}

pub fn write_summary(s: &RunSummary, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["key", "value"]).map_err(|e| csv_err(path, e))?;
    for (k, v) in summary_fields(s) {
        w.write_record([k, v.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let got = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("unexpected header {got:?}"),
        });
    }
    r.records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path, line: usize) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad field {i}"),
    })
}

pub fn read_slots(path: &Path) -> Result<Vec<SlotRow>> {
    read_table(path, &SLOT_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let line = n + 2;
            Ok(SlotRow {
                frame: field(r, 0, path, line)?,
                slot: field(r, 1, path, line)?,
                ue: field(r, 2, path, line)?,
                a_bps: field(r, 3, path, line)?,
                r_bps: field(r, 4, path, line)?,
                qhat_bits: field(r, 5, path, line)?,
                sum_q_bits: field(r, 6, path, line)?,
                l: field(r, 7, path, line)?,
                dl: field(r, 8, path, line)?,
                dl_ub: field(r, 9, path, line)?,
            })
        })
        .collect()
}

pub fn read_frames(path: &Path) -> Result<Vec<FrameRow>> {
    read_table(path, &FRAME_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let line = n + 2;
            Ok(FrameRow {
                frame: field(r, 0, path, line)?,
                ue: field(r, 1, path, line)?,
                ru: field(r, 2, path, line)?,
                beta: field(r, 3, path, line)?,
                uhat: field(r, 4, path, line)?,
                thetahat: field(r, 5, path, line)?,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_table(path, &["key", "value"])?
        .iter()
        .map(|r| (r[0].to_string(), r[1].to_string()))
        .collect())
}
