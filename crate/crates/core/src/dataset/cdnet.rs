//! CDnet 2014 directory layout:
//!
//! ```text
//! <root>/<category>/<video>/input/in000001.jpg
//!                          /groundtruth/gt000001.png
//!                          /temporalROI.txt        "<first> <last>"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::io::save_image;
use crate::{Error, Frame, Mask, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    pub number: u32,
    pub input: PathBuf,
    pub groundtruth: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoEntry {
    pub category: String,
    pub name: String,
    pub dir: PathBuf,
    /// Sorted by frame number; input and ground truth always paired.
    pub frames: Vec<FrameEntry>,
    /// Inclusive range of labelled frame numbers.
    pub roi: (u32, u32),
}

impl VideoEntry {
    pub fn is_evaluable(&self, number: u32) -> bool {
        (self.roi.0..=self.roi.1).contains(&number)
    }

    pub fn evaluable_frames(&self) -> impl Iterator<Item = &FrameEntry> {
        self.frames.iter().filter(|f| self.is_evaluable(f.number))
    }

    /// `<category>/<video>`, the relative path used by result trees.
    pub fn relative_path(&self) -> PathBuf {
        Path::new(&self.category).join(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub videos: Vec<VideoEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdnetIndex {
    pub root: PathBuf,
    pub categories: Vec<Category>,
}

impl CdnetIndex {
    pub fn videos(&self) -> impl Iterator<Item = &VideoEntry> {
        self.categories.iter().flat_map(|c| c.videos.iter())
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parses `<prefix>NNNNNN.<ext>` with a six-digit frame number.
fn parse_numbered(name: &str, prefix: &str, exts: &[&str]) -> Option<u32> {
    let rest = name.strip_prefix(prefix)?;
    let (digits, ext) = rest.split_once('.')?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    exts.iter().any(|e| e.eq_ignore_ascii_case(ext)).then(|| digits.parse().ok())?
}

/// Files named `<prefix>NNNNNN.<ext>` in `dir`, keyed by frame number.
pub fn list_numbered(dir: &Path, prefix: &str, exts: &[&str]) -> Result<BTreeMap<u32, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some(n) = parse_numbered(&file_name(&path), prefix, exts) {
            if let Some(prev) = out.insert(n, path.clone()) {
                return Err(Error::Dataset(format!(
                    "frame {n} appears twice: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    Ok(out)
}

pub const INPUT_EXTS: [&str; 4] = ["jpg", "jpeg", "png", "pgm"];
pub const MASK_EXTS: [&str; 2] = ["png", "pgm"];

fn read_roi(path: &Path, video: &str) -> Result<(u32, u32)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Dataset(format!("video `{video}`: cannot read {}: {e}", path.display())))?;
    let nums: Vec<u32> = text
        .split_whitespace()
        .map(|t| t.parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Dataset(format!("video `{video}`: malformed temporalROI.txt `{}`", text.trim())))?;
    match nums[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Dataset(format!(
            "video `{video}`: temporalROI.txt must hold two integers, got `{}`",
            text.trim()
        ))),
    }
}

fn scan_video(category: &str, dir: &Path) -> Result<VideoEntry> {
    let name = file_name(dir);
    let gt_dir = dir.join("groundtruth");
    if !gt_dir.is_dir() {
        return Err(Error::Dataset(format!("video `{category}/{name}`: missing groundtruth directory")));
    }
    let inputs = list_numbered(&dir.join("input"), "in", &INPUT_EXTS)?;
    let gts = list_numbered(&gt_dir, "gt", &MASK_EXTS)?;
    let roi = read_roi(&dir.join("temporalROI.txt"), &format!("{category}/{name}"))?;
    let mut frames = Vec::with_capacity(inputs.len());
    for (&number, input) in &inputs {
        let gt = gts.get(&number).ok_or_else(|| {
            Error::Dataset(format!("video `{category}/{name}`: frame {number} has no ground truth"))
        })?;
        frames.push(FrameEntry {
            number,
            input: input.clone(),
            groundtruth: gt.clone(),
        });
    }
    if let Some(extra) = gts.keys().find(|n| !inputs.contains_key(n)) {
        return Err(Error::Dataset(format!(
            "video `{category}/{name}`: ground truth {extra} has no input frame"
        )));
    }
    let (first, last) = match (frames.first(), frames.last()) {
        (Some(a), Some(b)) => (a.number, b.number),
        _ => return Err(Error::Dataset(format!("video `{category}/{name}`: no input frames"))),
    };
    if roi.0 > roi.1 || roi.0 < first || roi.1 > last {
        return Err(Error::Dataset(format!(
            "video `{category}/{name}`: ROI {}..{} outside frames {first}..{last}",
            roi.0, roi.1
        )));
    }
    Ok(VideoEntry {
        category: category.to_string(),
        name,
        dir: dir.to_path_buf(),
        frames,
        roi,
    })
}

/// Discovers every `<category>/<video>` that has an `input` directory.
pub fn scan_cdnet(root: &Path) -> Result<CdnetIndex> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let mut categories = Vec::new();
    for cat_dir in sorted_dirs(root)? {
        let cat = file_name(&cat_dir);
        let mut videos = Vec::new();
        for vid_dir in sorted_dirs(&cat_dir)? {
            if vid_dir.join("input").is_dir() {
                videos.push(scan_video(&cat, &vid_dir)?);
            }
        }
        if !videos.is_empty() {
            categories.push(Category { name: cat, videos });
        }
    }
    if categories.is_empty() {
        return Err(Error::Dataset(format!("no videos found under {}", root.display())));
    }
    Ok(CdnetIndex {
        root: root.to_path_buf(),
        categories,
    })
}

/// Indices of the frames whose foreground fraction over non-ignored pixels
/// is at least `min_fg_fraction`. Frames without any labelled pixel are
/// never selected.
pub fn select_training_frames(gts: &[Mask], min_fg_fraction: f64) -> Vec<usize> {
    gts.iter()
        .enumerate()
        .filter_map(|(i, gt)| {
            let (mut fg, mut labelled) = (0usize, 0usize);
            for &v in gt.data() {
                match v {
                    255 => {
                        fg += 1;
                        labelled += 1
                    }
                    0 | 50 => labelled += 1,
                    _ => {}
                }
            }
            (labelled > 0 && fg as f64 / labelled as f64 >= min_fg_fraction).then_some(i)
        })
        .collect()
}

/// Writes one video in the CDnet layout, numbering frames from 1.
pub fn write_video(dir: &Path, frames: &[Frame], gts: &[Mask], roi: (u32, u32)) -> Result<()> {
    if frames.len() != gts.len() {
        return Err(Error::Dataset(format!(
            "{} frames but {} ground-truth masks",
            frames.len(),
            gts.len()
        )));
    }
    for (i, (f, g)) in frames.iter().zip(gts).enumerate() {
        let n = i + 1;
        save_image(f, &dir.join("input").join(format!("in{n:06}.png")))?;
        save_image(g, &dir.join("groundtruth").join(format!("gt{n:06}.png")))?;
    }
    let roi_path = dir.join("temporalROI.txt");
    fs::write(&roi_path, format!("{} {}\n", roi.0, roi.1)).map_err(|e| Error::io(roi_path, e))
}
