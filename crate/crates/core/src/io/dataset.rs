//! Sample packaging, the dataset manifest and dataset validation.
//!
//! A dataset root holds `manifest.jsonl` (one [`ManifestEntry`] per line),
//! `timestamps.csv` and one directory per sample:
//!
//! ```text
//! samples/<id>/events_C<c>_prev.evs
//! samples/<id>/events_C<c>_next.evs
//! samples/<id>/flow_fw.flo + flow_fw.mask
//! samples/<id>/flow_bw.flo + flow_bw.mask
//! samples/<id>/frame_<k>.pgm
//! samples/<id>/meta.json
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::events::{encode_events, read_events};
use super::flow::{encode_flow, mask_path, read_flow};
use super::pgm::{encode_pgm, read_frame};
use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::frame::{FlowField, Frame};
use crate::voxel::{density, voxelize};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TIMESTAMPS_FILE: &str = "timestamps.csv";
const DENSITY_TOL: f64 = 1e-12;

/// Event windows before and after the reference time at one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEvents {
    pub threshold: f64,
    pub prev: EventStream,
    pub next: EventStream,
}

/// Everything that goes into one packaged sample.
#[derive(Clone, Debug)]
pub struct SampleParts {
    pub id: String,
    pub dt: u32,
    pub seed: u64,
    pub bins: usize,
    pub events: Vec<ThresholdEvents>,
    pub flow_fw: FlowField,
    pub flow_bw: FlowField,
    /// Key frames with their label index.
    pub frames: Vec<(usize, Frame)>,
    /// Free-form metadata stored in `meta.json` next to the manifest entry.
    pub info: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFiles {
    pub threshold: f64,
    pub prev: String,
    pub next: String,
    pub count_prev: usize,
    pub count_next: usize,
    pub density_prev: f64,
    pub density_next: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    pub t: i64,
    pub path: String,
}

/// One manifest line. Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub dt: u32,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub bins: usize,
    pub window_prev: [i64; 2],
    pub window_next: [i64; 2],
    pub events: Vec<EventFiles>,
    pub flow_fw: String,
    pub flow_bw: String,
    pub frames: Vec<FrameEntry>,
    pub meta: String,
}

impl ManifestEntry {
    pub fn thresholds(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.threshold).collect()
    }

    pub fn events_for(&self, threshold: f64) -> Option<&EventFiles> {
        self.events.iter().find(|e| e.threshold == threshold)
    }
}

#[derive(Serialize, Deserialize)]
struct SampleMeta {
    sample: ManifestEntry,
    info: serde_json::Value,
}

/// File-name tag for a threshold, e.g. `0.2` -> `C0.2`.
pub fn threshold_tag(c: f64) -> String {
    format!("C{c}")
}

fn packaging(msg: impl Into<String>) -> Error {
    Error::Packaging(msg.into())
}

fn check_parts(parts: &SampleParts) -> Result<(u32, u32, [i64; 2], [i64; 2])> {
    if parts.id.is_empty()
        || !parts
            .id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(packaging(format!("bad sample id {:?}", parts.id)));
    }
    let first = parts
        .events
        .first()
        .ok_or_else(|| packaging(format!("{}: no event streams", parts.id)))?;
    let (w, h) = (first.prev.width, first.prev.height);
    let prev = [first.prev.t_start, first.prev.t_end];
    let next = [first.next.t_start, first.next.t_end];
    if prev[1] != next[0] {
        return Err(packaging(format!(
            "{}: windows [{}, {}] and [{}, {}] are not contiguous",
            parts.id, prev[0], prev[1], next[0], next[1]
        )));
    }
    let mut seen = HashSet::new();
    for te in &parts.events {
        if !seen.insert(te.threshold.to_bits()) {
            return Err(packaging(format!("{}: duplicate threshold {}", parts.id, te.threshold)));
        }
        for (s, win) in [(&te.prev, prev), (&te.next, next)] {
            if [s.t_start, s.t_end] != win || (s.width, s.height) != (w, h) {
                return Err(packaging(format!(
                    "{}: stream at C={} disagrees on window or sensor size",
                    parts.id, te.threshold
                )));
            }
            s.validate().map_err(Error::InvalidStream)?;
        }
    }
    let shape = (h as usize, w as usize);
    for (name, f) in [("flow_fw", &parts.flow_fw), ("flow_bw", &parts.flow_bw)] {
        if f.shape() != shape {
            return Err(packaging(format!("{}: {name} has shape {:?}, expected {shape:?}", parts.id, f.shape())));
        }
    }
    for (k, f) in &parts.frames {
        if (f.height(), f.width()) != shape {
            return Err(packaging(format!("{}: frame {k} has the wrong shape", parts.id)));
        }
    }
    Ok((w, h, prev, next))
}

/// Writes one sample under `root/samples/<id>/` and returns its manifest
/// entry. The manifest itself is written separately.
pub fn package_sample(root: &Path, parts: &SampleParts) -> Result<ManifestEntry> {
    let (width, height, window_prev, window_next) = check_parts(parts)?;
    let dir = format!("samples/{}", parts.id);
    let mut events = Vec::with_capacity(parts.events.len());
    for te in &parts.events {
        let tag = threshold_tag(te.threshold);
        let prev = format!("{dir}/events_{tag}_prev.evs");
        let next = format!("{dir}/events_{tag}_next.evs");
        write_file(&root.join(&prev), &encode_events(&te.prev)?)?;
        write_file(&root.join(&next), &encode_events(&te.next)?)?;
        let d = |s: &EventStream| voxelize(s, s.t_start, s.t_end, parts.bins).map(|g| density(&g).get());
        events.push(EventFiles {
            threshold: te.threshold,
            prev,
            next,
            count_prev: te.prev.len(),
            count_next: te.next.len(),
            density_prev: d(&te.prev)?,
            density_next: d(&te.next)?,
        });
    }
    let flow_fw = format!("{dir}/flow_fw.flo");
    let flow_bw = format!("{dir}/flow_bw.flo");
    for (p, f) in [(&flow_fw, &parts.flow_fw), (&flow_bw, &parts.flow_bw)] {
        let (flo, mask) = encode_flow(f);
        let path = root.join(p);
        write_file(&path, &flo)?;
        write_file(&mask_path(&path), &mask)?;
    }
    let mut frames = Vec::with_capacity(parts.frames.len());
    for (k, f) in &parts.frames {
        let path = format!("{dir}/frame_{k}.pgm");
        write_file(&root.join(&path), &encode_pgm(f))?;
        frames.push(FrameEntry { index: *k, t: f.t, path });
    }
    let entry = ManifestEntry {
        id: parts.id.clone(),
        dt: parts.dt,
        seed: parts.seed,
        width,
        height,
        bins: parts.bins,
        window_prev,
        window_next,
        events,
        flow_fw,
        flow_bw,
        frames,
        meta: format!("{dir}/meta.json"),
    };
    let meta = SampleMeta {
        sample: entry.clone(),
        info: parts.info.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&meta)?;
    json.push(b'\n');
    write_file(&root.join(&entry.meta), &json)?;
    Ok(entry)
}

fn manifest_bytes(entries: &[ManifestEntry]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Replaces `root/manifest.jsonl` with `entries`, one per line.
pub fn write_manifest(root: &Path, entries: &[ManifestEntry]) -> Result<()> {
    write_file(&root.join(MANIFEST_FILE), &manifest_bytes(entries)?)
}

/// Appends entries to `root/manifest.jsonl`, replacing any existing line
/// with the same id.
pub fn append_manifest(root: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut all = if root.join(MANIFEST_FILE).exists() {
        read_manifest(root)?
    } else {
        Vec::new()
    };
    for e in entries {
        match all.iter_mut().find(|old| old.id == e.id) {
            Some(old) => *old = e.clone(),
            None => all.push(e.clone()),
        }
    }
    write_manifest(root, &all)
}

pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let path = root.join(MANIFEST_FILE);
    let text = String::from_utf8(read_file(&path)?).map_err(|_| Error::Format {
        path: path.clone(),
        reason: "not UTF-8".into(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.clone(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Writes `root/timestamps.csv` listing every key frame.
pub fn write_timestamps(root: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut csv = String::from("sample,frame,t_us\n");
    for e in entries {
        for f in &e.frames {
            writeln!(csv, "{},{},{}", e.id, f.index, f.t).expect("write to String");
        }
    }
    write_file(&root.join(TIMESTAMPS_FILE), csv.as_bytes())
}

fn same_bytes(root: &Path, rel: &str, encoded: &[u8]) -> Result<bool> {
    Ok(read_file(&root.join(rel))? == encoded)
}

fn check_entry(root: &Path, e: &ManifestEntry, findings: &mut Vec<String>) {
    let mut note = |msg: String| findings.push(format!("{}: {msg}", e.id));
    for ef in &e.events {
        for (rel, win, count, dens) in [
            (&ef.prev, e.window_prev, ef.count_prev, ef.density_prev),
            (&ef.next, e.window_next, ef.count_next, ef.density_next),
        ] {
            let s = match read_events(root.join(rel)) {
                Ok(s) => s,
                Err(err) => {
                    note(err.to_string());
                    continue;
                }
            };
            if [s.t_start, s.t_end] != win || (s.width, s.height) != (e.width, e.height) {
                note(format!("{rel}: window or sensor size differs from the manifest"));
            }
            if s.len() != count {
                note(format!("{rel}: {} events, manifest says {count}", s.len()));
            }
            match voxelize(&s, s.t_start, s.t_end, e.bins) {
                Ok(g) => {
                    let d = density(&g).get();
                    if (d - dens).abs() > DENSITY_TOL {
                        note(format!("{rel}: density {d} differs from recorded {dens}"));
                    }
                }
                Err(err) => note(format!("{rel}: {err}")),
            }
            match encode_events(&s).and_then(|b| same_bytes(root, rel, &b)) {
                Ok(true) => {}
                Ok(false) => note(format!("{rel}: does not round-trip")),
                Err(err) => note(err.to_string()),
            }
        }
    }
    for rel in [&e.flow_fw, &e.flow_bw] {
        match read_flow(root.join(rel)) {
            Ok(f) => {
                if f.shape() != (e.height as usize, e.width as usize) {
                    note(format!("{rel}: shape {:?}", f.shape()));
                }
                if !mask_path(&root.join(rel)).exists() {
                    note(format!("{rel}: missing mask"));
                }
                let (flo, _) = encode_flow(&f);
                if !matches!(same_bytes(root, rel, &flo), Ok(true)) {
                    note(format!("{rel}: does not round-trip"));
                }
            }
            Err(err) => note(err.to_string()),
        }
    }
    for fe in &e.frames {
        match read_frame(root.join(&fe.path), fe.t) {
            Ok(f) => {
                if (f.width(), f.height()) != (e.width as usize, e.height as usize) {
                    note(format!("{}: wrong size", fe.path));
                }
                if !matches!(same_bytes(root, &fe.path, &encode_pgm(&f)), Ok(true)) {
                    note(format!("{}: does not round-trip", fe.path));
                }
            }
            Err(err) => note(err.to_string()),
        }
    }
    match read_file(&root.join(&e.meta)).and_then(|b| Ok(serde_json::from_slice::<SampleMeta>(&b)?)) {
        Ok(meta) if meta.sample == *e => {}
        Ok(_) => note(format!("{}: disagrees with the manifest", e.meta)),
        Err(err) => note(format!("{}: {err}", e.meta)),
    }
}

/// Re-reads every file referenced by the manifest and reports each problem
/// found. An unreadable manifest is an error; an empty list means the
/// dataset is consistent.
pub fn validate_dataset(root: &Path) -> Result<Vec<String>> {
    let entries = read_manifest(root)?;
    let mut findings = Vec::new();
    let mut ids = HashSet::new();
    for e in &entries {
        if !ids.insert(e.id.as_str()) {
            findings.push(format!("{}: duplicate sample id", e.id));
        }
        if e.window_prev[1] != e.window_next[0] {
            findings.push(format!("{}: windows are not contiguous", e.id));
        }
        check_entry(root, e, &mut findings);
    }
    if !fs::metadata(root.join(TIMESTAMPS_FILE)).is_ok_and(|m| m.is_file()) {
        findings.push(format!("missing {TIMESTAMPS_FILE}"));
    }
    Ok(findings)
}
