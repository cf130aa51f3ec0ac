//! Reduction and pragmatic-function region files, their expansion to
//! frame labels, and annotation tallies and agreement.
//!
//! Region files are CSV with header `channel,start_ms,end_ms,label`
//! (function files use `tag` in place of `label`). Times are integer
//! milliseconds. Reduction labels are `0..=3` or the letter aliases
//! `e`, `n`, `r`, `rr`.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal_io::{first_frame_at_or_after, Channel};
use crate::stats::pearson;

pub const LEVEL_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReductionRegion {
    pub channel: Channel,
    pub start_ms: u64,
    pub end_ms: u64,
    /// 0 enunciated, 1 normal, 2 reduced, 3 strongly reduced.
    pub level: u8,
}

impl ReductionRegion {
    /// Frames whose start time lies inside the region.
    pub fn frames(&self) -> std::ops::Range<usize> {
        first_frame_at_or_after(self.start_ms)..first_frame_at_or_after(self.end_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionTag {
    PO,
    FI,
    PC,
    UC,
    RE,
    PW,
    DP,
    TC,
    TG,
    PF,
    NEG,
}

impl FunctionTag {
    pub const ALL: [FunctionTag; 11] = [
        FunctionTag::PO,
        FunctionTag::FI,
        FunctionTag::PC,
        FunctionTag::UC,
        FunctionTag::RE,
        FunctionTag::PW,
        FunctionTag::DP,
        FunctionTag::TC,
        FunctionTag::TG,
        FunctionTag::PF,
        FunctionTag::NEG,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FunctionTag::PO => "PO",
            FunctionTag::FI => "FI",
            FunctionTag::PC => "PC",
            FunctionTag::UC => "UC",
            FunctionTag::RE => "RE",
            FunctionTag::PW => "PW",
            FunctionTag::DP => "DP",
            FunctionTag::TC => "TC",
            FunctionTag::TG => "TG",
            FunctionTag::PF => "PF",
            FunctionTag::NEG => "NEG",
        }
    }
}

impl fmt::Display for FunctionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FunctionTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FunctionTag::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown function tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FunctionRegion {
    pub channel: Channel,
    pub start_ms: u64,
    pub end_ms: u64,
    pub tag: FunctionTag,
}

impl FunctionRegion {
    pub fn frames(&self) -> std::ops::Range<usize> {
        first_frame_at_or_after(self.start_ms)..first_frame_at_or_after(self.end_ms)
    }
}

/// Per-frame reduction levels of one channel; `None` outside labeled
/// regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabels {
    pub levels: Vec<Option<u8>>,
}

impl FrameLabels {
    pub fn unlabeled(frame_count: usize) -> Self {
        Self {
            levels: vec![None; frame_count],
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, frame: usize) -> Option<u8> {
        self.levels.get(frame).copied().flatten()
    }

    pub fn labeled_count(&self) -> usize {
        self.levels.iter().flatten().count()
    }
}

pub fn parse_level(s: &str) -> Option<u8> {
    match s {
        "0" | "e" => Some(0),
        "1" | "n" => Some(1),
        "2" | "r" => Some(2),
        "3" | "rr" => Some(3),
        _ => None,
    }
}

struct RawRow {
    line: usize,
    channel: Channel,
    start_ms: u64,
    end_ms: u64,
    value: String,
}

fn read_rows<R: Read>(input: R, source: &str, value_column: &str) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    let expected = ["channel", "start_ms", "end_ms", value_column];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let channel: Channel = record[0]
            .parse()
            .map_err(|e: Error| Error::parse(source, line, e.to_string()))?;
        let ms = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::parse(source, line, format!("bad time {s:?} (integer ms)")))
        };
        let start_ms = ms(&record[1])?;
        let end_ms = ms(&record[2])?;
        if start_ms >= end_ms {
            return Err(Error::parse(
                source,
                line,
                format!("start {start_ms} is not before end {end_ms}"),
            ));
        }
        rows.push(RawRow {
            line,
            channel,
            start_ms,
            end_ms,
            value: record[3].to_string(),
        });
    }
    Ok(rows)
}

/// Parses a reduction region file.
pub fn read_regions<R: Read>(input: R, source: &str) -> Result<Vec<ReductionRegion>> {
    let rows = read_rows(input, source, "label")?;
    let mut regions = Vec::with_capacity(rows.len());
    for r in &rows {
        let level = parse_level(&r.value).ok_or_else(|| {
            Error::parse(source, r.line, format!("unknown label {:?}", r.value))
        })?;
        regions.push(ReductionRegion {
            channel: r.channel,
            start_ms: r.start_ms,
            end_ms: r.end_ms,
            level,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].channel.index(), rows[i].start_ms, rows[i].line));
    for w in order.windows(2) {
        let (a, b) = (&rows[w[0]], &rows[w[1]]);
        if a.channel == b.channel && b.start_ms < a.end_ms {
            return Err(Error::parse(
                source,
                a.line.max(b.line),
                format!(
                    "regions on lines {} and {} overlap on the {} channel",
                    a.line.min(b.line),
                    a.line.max(b.line),
                    a.channel
                ),
            ));
        }
    }
    Ok(regions)
}

pub fn parse_regions(path: impl AsRef<Path>) -> Result<Vec<ReductionRegion>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_regions(file, &path.display().to_string())
}

/// Parses a function region file. Regions may overlap.
pub fn read_function_regions<R: Read>(input: R, source: &str) -> Result<Vec<FunctionRegion>> {
    read_rows(input, source, "tag")?
        .into_iter()
        .map(|r| {
            let tag = r
                .value
                .parse()
                .map_err(|e: Error| Error::parse(source, r.line, e.to_string()))?;
            Ok(FunctionRegion {
                channel: r.channel,
                start_ms: r.start_ms,
                end_ms: r.end_ms,
                tag,
            })
        })
        .collect()
}

pub fn parse_function_regions(path: impl AsRef<Path>) -> Result<Vec<FunctionRegion>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_function_regions(file, &path.display().to_string())
}

/// Frame labels for one channel plus a warning per region that had to
/// be clipped at `frame_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameExpansion {
    pub labels: FrameLabels,
    pub warnings: Vec<String>,
}

/// Labels each frame of `channel` with the level of the region that
/// contains the frame's start time.
pub fn regions_to_frames(
    regions: &[ReductionRegion],
    channel: Channel,
    frame_count: usize,
) -> FrameExpansion {
    let mut labels = FrameLabels::unlabeled(frame_count);
    let mut warnings = Vec::new();
    for r in regions.iter().filter(|r| r.channel == channel) {
        let frames = r.frames();
        if frames.end > frame_count {
            warnings.push(format!(
                "{} region {}..{} ms extends past the last frame ({} frames); clipped",
                r.channel, r.start_ms, r.end_ms, frame_count
            ));
        }
        for f in frames.start.min(frame_count)..frames.end.min(frame_count) {
            labels.levels[f] = Some(r.level);
        }
    }
    FrameExpansion { labels, warnings }
}

/// Region-level comparison of two annotators over a shared
/// segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    /// `counts[a][b]`: paired regions labeled `a` by the first annotator
    /// and `b` by the second.
    pub counts: [[usize; LEVEL_COUNT]; LEVEL_COUNT],
    pub unpaired_a: usize,
    pub unpaired_b: usize,
}

impl Confusion {
    pub fn paired(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn off_diagonal(&self) -> usize {
        self.paired() - (0..LEVEL_COUNT).map(|i| self.counts[i][i]).sum::<usize>()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "a\\b,0,1,2,3")?;
        for (a, row) in self.counts.iter().enumerate() {
            write!(out, "{a}")?;
            for c in row {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        writeln!(out, "unpaired_a,{}", self.unpaired_a)?;
        writeln!(out, "unpaired_b,{}", self.unpaired_b)
    }
}

type RegionKey = (Channel, u64, u64);

fn key(r: &ReductionRegion) -> RegionKey {
    (r.channel, r.start_ms, r.end_ms)
}

/// Pairs regions by identical (channel, start, end), in the first
/// annotator's order.
pub fn paired_levels(a: &[ReductionRegion], b: &[ReductionRegion]) -> Vec<(u8, u8)> {
    let lookup: HashMap<RegionKey, u8> = b.iter().map(|r| (key(r), r.level)).collect();
    a.iter()
        .filter_map(|r| lookup.get(&key(r)).map(|&lb| (r.level, lb)))
        .collect()
}

pub fn confusion_matrix(a: &[ReductionRegion], b: &[ReductionRegion]) -> Confusion {
    let pairs = paired_levels(a, b);
    let mut counts = [[0; LEVEL_COUNT]; LEVEL_COUNT];
    for (la, lb) in &pairs {
        counts[*la as usize][*lb as usize] += 1;
    }
    Confusion {
        counts,
        unpaired_a: a.len() - pairs.len(),
        unpaired_b: b.len() - pairs.len(),
    }
}

/// Pearson correlation over paired region labels.
pub fn agreement_correlation(a: &[ReductionRegion], b: &[ReductionRegion]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = paired_levels(a, b)
        .into_iter()
        .map(|(p, q)| (p as f64, q as f64))
        .unzip();
    pearson(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub regions: [usize; LEVEL_COUNT],
    pub frames: [usize; LEVEL_COUNT],
}

pub fn label_counts(regions: &[ReductionRegion]) -> LabelCounts {
    let mut c = LabelCounts::default();
    for r in regions {
        c.regions[r.level as usize] += 1;
        c.frames[r.level as usize] += r.frames().len();
    }
    c
}
