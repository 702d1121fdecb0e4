use std::fmt::Write;
use std::str::FromStr;

use super::{MetricVector, ScoreTree, METRIC_NAMES};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

fn cells(m: &MetricVector) -> Vec<String> {
    m.to_array().iter().map(|v| format!("{v:.4}")).collect()
}

/// One row per category (sorted), then `Overall`, four decimals.
pub fn report(tree: &ScoreTree, format: ReportFormat) -> String {
    let mut rows: Vec<(&str, &MetricVector)> =
        tree.categories.iter().map(|c| (c.name.as_str(), &c.mean)).collect();
    rows.sort_by(|a, b| a.0.cmp(b.0));
    rows.push(("Overall", &tree.overall));
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            writeln!(out, "category,{}", METRIC_NAMES.join(",")).unwrap();
            for (name, m) in rows {
                writeln!(out, "{name},{}", cells(m).join(",")).unwrap();
            }
        }
        ReportFormat::Markdown => {
            writeln!(out, "| Category | {} |", METRIC_NAMES.join(" | ")).unwrap();
            writeln!(out, "|---|{}", "---|".repeat(METRIC_NAMES.len())).unwrap();
            for (name, m) in rows {
                writeln!(out, "| {name} | {} |", cells(m).join(" | ")).unwrap();
            }
        }
    }
    out
}

/// Average rank of each method over the seven metrics (1 = best). Re, Sp, Pr
/// and FM rank high-first, the error rates low-first; ties share the better
/// rank.
pub fn rank_average(methods: &[(String, MetricVector)]) -> Vec<(String, f64)> {
    let higher_better = [true, true, false, false, false, true, true];
    let mut totals = vec![0.0; methods.len()];
    for (k, &hb) in higher_better.iter().enumerate() {
        for (i, (_, m)) in methods.iter().enumerate() {
            let v = m.to_array()[k];
            let better = methods
                .iter()
                .filter(|(_, o)| {
                    let ov = o.to_array()[k];
                    if hb { ov > v } else { ov < v }
                })
                .count();
            totals[i] += (better + 1) as f64;
        }
    }
    methods
        .iter()
        .zip(totals)
        .map(|((name, _), t)| (name.clone(), t / 7.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{aggregate, VideoScore};

    fn tree() -> ScoreTree {
        let mk = |cat: &str, v: f64| VideoScore {
            category: cat.into(),
            video: "v".into(),
            counts: None,
            metrics: MetricVector::from_array([v; 7]),
        };
        aggregate(vec![mk("shadow", 0.5), mk("baseline", 0.25)]).unwrap()
    }

    #[test]
    fn csv_layout() {
        let text = report(&tree(), ReportFormat::Csv);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "category,Re,Sp,FPR,FNR,PWC,Pr,FM");
        assert!(lines[1].starts_with("baseline,0.2500,"));
        assert!(lines[3].starts_with("Overall,0.3750,"));
        assert_eq!(text, report(&tree(), ReportFormat::Csv));
    }

    #[test]
    fn markdown_row_count() {
        let text = report(&tree(), ReportFormat::Markdown);
        // header + separator + 2 categories + overall
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn unknown_format() {
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
    }

    #[test]
    fn rank_average_orders_methods() {
        let good = MetricVector { re: 0.9, sp: 0.99, fpr: 0.01, fnr: 0.1, pwc: 1.0, pr: 0.9, fm: 0.9 };
        let bad = MetricVector { re: 0.5, sp: 0.9, fpr: 0.1, fnr: 0.5, pwc: 9.0, pr: 0.5, fm: 0.5 };
        let ranks = rank_average(&[("bad".into(), bad), ("good".into(), good)]);
        assert_eq!(ranks[0].1, 2.0);
        assert_eq!(ranks[1].1, 1.0);
    }
}
