//! Change-detection scoring: confusion counts, the seven standard metrics,
//! and video → category → overall aggregation.

mod report;

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::{Error, Mask, Result, BACKGROUND, FOREGROUND};

pub use report::{rank_average, report, ReportFormat};

/// Ground-truth values of the CDnet encoding.
pub mod gt {
    pub const STATIC: u8 = 0;
    pub const SHADOW: u8 = 50;
    pub const OUTSIDE_ROI: u8 = 85;
    pub const UNKNOWN: u8 = 170;
    pub const MOTION: u8 = 255;
}

/// How a ground-truth pixel takes part in scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GtClass {
    Positive,
    Negative,
    Ignored,
}

/// Maps a CDnet ground-truth value to its class: 255 is motion, 0 and 50
/// (shadow) are background, 85 and 170 are excluded.
pub fn gt_class(value: u8) -> Result<GtClass> {
    match value {
        gt::MOTION => Ok(GtClass::Positive),
        gt::STATIC | gt::SHADOW => Ok(GtClass::Negative),
        gt::OUTSIDE_ROI | gt::UNKNOWN => Ok(GtClass::Ignored),
        v => Err(Error::InvalidInput(format!(
            "ground-truth value {v} is not in the CDnet encoding {{0,50,85,170,255}}"
        ))),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Tallies a binary prediction against a CDnet-encoded ground truth.
pub fn confusion(pred: &Mask, gt: &Mask) -> Result<ConfusionCounts> {
    pred.ensure_same_dims(gt, "prediction vs ground truth")?;
    pred.ensure_binary("prediction")?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let fg = p == FOREGROUND;
        match gt_class(g)? {
            GtClass::Ignored => {}
            GtClass::Positive if fg => c.tp += 1,
            GtClass::Positive => c.fn_ += 1,
            GtClass::Negative if fg => c.fp += 1,
            GtClass::Negative => {
                debug_assert_eq!(p, BACKGROUND);
                c.tn += 1
            }
        }
    }
    Ok(c)
}

/// Metric names in reporting order.
pub const METRIC_NAMES: [&str; 7] = ["Re", "Sp", "FPR", "FNR", "PWC", "Pr", "FM"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub re: f64,
    pub sp: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub pwc: f64,
    pub pr: f64,
    pub fm: f64,
}

impl MetricVector {
    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            re: v[0],
            sp: v[1],
            fpr: v[2],
            fnr: v[3],
            pwc: v[4],
            pr: v[5],
            fm: v[6],
        }
    }

    /// Values in [`METRIC_NAMES`] order.
    pub fn to_array(&self) -> [f64; 7] {
        [self.re, self.sp, self.fpr, self.fnr, self.pwc, self.pr, self.fm]
    }

    /// Per-metric unweighted mean.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a MetricVector>) -> Option<MetricVector> {
        let mut acc = [0.0; 7];
        let mut n = 0usize;
        for m in items {
            for (a, v) in acc.iter_mut().zip(m.to_array()) {
                *a += v;
            }
            n += 1;
        }
        (n > 0).then(|| MetricVector::from_array(acc.map(|a| a / n as f64)))
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// The seven metrics. A zero denominator yields 0 for the affected metric.
pub fn metrics_from_counts(c: &ConfusionCounts) -> Result<MetricVector> {
    let total = c.total();
    if total == 0 {
        return Err(Error::InvalidInput("no evaluated pixels (all counts are zero)".into()));
    }
    let re = ratio(c.tp, c.tp + c.fn_);
    let pr = ratio(c.tp, c.tp + c.fp);
    let fm = if re + pr == 0.0 { 0.0 } else { 2.0 * re * pr / (re + pr) };
    Ok(MetricVector {
        re,
        sp: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.tp + c.fn_),
        pwc: 100.0 * (c.fn_ + c.fp) as f64 / total as f64,
        pr,
        fm,
    })
}

/// Scores of one video, keyed by its category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub category: String,
    pub video: String,
    pub counts: Option<ConfusionCounts>,
    pub metrics: MetricVector,
}

impl VideoScore {
    /// Scores a video from its accumulated counts.
    pub fn from_counts(category: &str, video: &str, counts: ConfusionCounts) -> Result<Self> {
        Ok(Self {
            category: category.to_string(),
            video: video.to_string(),
            counts: Some(counts),
            metrics: metrics_from_counts(&counts)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub name: String,
    pub videos: Vec<VideoScore>,
    pub mean: MetricVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTree {
    /// Sorted by name.
    pub categories: Vec<CategoryScore>,
    pub overall: MetricVector,
}

/// Groups videos by category; each category is the mean of its videos and
/// the overall vector is the mean of the categories.
pub fn aggregate(videos: Vec<VideoScore>) -> Result<ScoreTree> {
    if videos.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate an empty score list".into()));
    }
    let mut grouped: std::collections::BTreeMap<String, Vec<VideoScore>> = Default::default();
    for v in videos {
        grouped.entry(v.category.clone()).or_default().push(v);
    }
    let categories: Vec<CategoryScore> = grouped
        .into_iter()
        .map(|(name, mut videos)| {
            videos.sort_by(|a, b| a.video.cmp(&b.video));
            let mean = MetricVector::mean(videos.iter().map(|v| &v.metrics)).expect("nonempty group");
            CategoryScore { name, videos, mean }
        })
        .collect();
    let overall = MetricVector::mean(categories.iter().map(|c| &c.mean)).expect("nonempty");
    Ok(ScoreTree { categories, overall })
}
