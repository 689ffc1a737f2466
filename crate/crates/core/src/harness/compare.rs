use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig6;

/// Episodes averaged to define a curve's final level.
pub const FINAL_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Sum of the smoothed curve; larger ranks first.
    Auc,
    /// First episode reaching `f` times the final level; earlier ranks first.
    EpisodesToFraction(f64),
}

impl Criterion {
    /// Accepts `auc`, `episodes_to_fraction(0.95)` or `episodes_to_fraction=0.95`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auc" {
            return Ok(Criterion::Auc);
        }
        let arg = s
            .strip_prefix("episodes_to_fraction")
            .map(|r| r.trim_start_matches(['(', '=', ':']).trim_end_matches(')'));
        match arg.map(str::parse::<f64>) {
            Some(Ok(f)) if f.is_finite() && f > 0.0 => Ok(Criterion::EpisodesToFraction(f)),
            _ => Err(Error::Config(format!(
                "unknown criterion `{s}`; expected auc or episodes_to_fraction(F)"
            ))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Auc => write!(f, "auc"),
            Criterion::EpisodesToFraction(x) => write!(f, "episodes_to_fraction({x})"),
        }
    }
}

pub fn auc(smoothed: &[f64]) -> f64 {
    smoothed.iter().sum()
}

/// Mean of the last [`FINAL_WINDOW`] points (or all of them if fewer).
pub fn final_level(smoothed: &[f64]) -> f64 {
    let tail = &smoothed[smoothed.len().saturating_sub(FINAL_WINDOW)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

/// First index whose value reaches `fraction * final_level`; `None` if never.
pub fn episodes_to_fraction(smoothed: &[f64], fraction: f64) -> Option<usize> {
    let threshold = fraction * final_level(smoothed);
    smoothed.iter().position(|&v| v >= threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub smoothed: Vec<f64>,
}

impl Curve {
    /// Load the `smoothed_reward` column of a metrics file, or the
    /// `mean_smoothed_reward` column of a summary.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        Self::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config(format!("{name}: empty file")))?;
        let col = header
            .split(',')
            .position(|c| c == "smoothed_reward" || c == "mean_smoothed_reward")
            .ok_or_else(|| Error::Config(format!("{name}: no smoothed_reward column")))?;
        let smoothed = lines
            .enumerate()
            .map(|(i, l)| {
                l.split(',')
                    .nth(col)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("{name}: bad row {}", i + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            smoothed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub rank: usize,
    pub name: String,
    /// `None` when the curve never reaches the fraction.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub criterion: Criterion,
    pub rows: Vec<Ranked>,
}

impl CompareReport {
    /// Groups of curve names sharing a rank.
    pub fn ties(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = Vec::new();
        for w in self.rows.chunk_by(|a, b| a.rank == b.rank) {
            if w.len() > 1 {
                out.push(w.iter().map(|r| r.name.as_str()).collect());
            }
        }
        out
    }

    pub fn value_of(&self, name: &str) -> Option<&Ranked> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "criterion,{}", self.criterion)?;
        writeln!(f, "rank,curve,value")?;
        for r in &self.rows {
            let v = r.value.map_or_else(|| "never".to_string(), sig6);
            writeln!(f, "{},{},{}", r.rank, r.name, v)?;
        }
        for group in self.ties() {
            writeln!(f, "# tie: {}", group.join(" = "))?;
        }
        Ok(())
    }
}

/// Rank curves best-first under `criterion`. Equal values share a rank.
pub fn compare_curves(curves: &[Curve], criterion: Criterion) -> Result<CompareReport> {
    if let Some(first) = curves.first() {
        if let Some(bad) = curves.iter().find(|c| c.smoothed.len() != first.smoothed.len()) {
            return Err(Error::Config(format!(
                "curve lengths differ: {} has {} points, {} has {}",
                first.name,
                first.smoothed.len(),
                bad.name,
                bad.smoothed.len()
            )));
        }
    }
    let mut rows: Vec<Ranked> = curves
        .iter()
        .map(|c| Ranked {
            rank: 0,
            name: c.name.clone(),
            value: match criterion {
                Criterion::Auc => Some(auc(&c.smoothed)),
                Criterion::EpisodesToFraction(f) => episodes_to_fraction(&c.smoothed, f).map(|e| e as f64),
            },
        })
        .collect();
    // key where smaller is better; missing values sort last
    let key = |r: &Ranked| match (criterion, r.value) {
        (_, None) => f64::INFINITY,
        (Criterion::Auc, Some(v)) => -v,
        (Criterion::EpisodesToFraction(_), Some(v)) => v,
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)));
    for i in 0..rows.len() {
        rows[i].rank = if i > 0 && rows[i].value == rows[i - 1].value {
            rows[i - 1].rank
        } else {
            i + 1
        };
    }
    Ok(CompareReport { criterion, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(name: &str, v: Vec<f64>) -> Curve {
        Curve {
            name: name.into(),
            smoothed: v,
        }
    }

    fn step(plateau_at: usize, len: usize) -> Vec<f64> {
        (0..len).map(|i| if i >= plateau_at { 10.0 } else { 1.0 }).collect()
    }

    #[test]
    fn identical_curves_tie() {
        let a = curve("a", vec![1.0, 2.0, 3.0]);
        let b = curve("b", vec![1.0, 2.0, 3.0]);
        for c in [Criterion::Auc, Criterion::EpisodesToFraction(0.95)] {
            let r = compare_curves(&[a.clone(), b.clone()], c).unwrap();
            assert_eq!(r.rows[0].rank, r.rows[1].rank);
            assert_eq!(r.ties(), vec![vec!["a", "b"]]);
            assert!(r.to_string().contains("# tie: a = b"));
        }
    }

    #[test]
    fn step_curves_ordered_by_plateau() {
        let late = curve("late", step(20, 300));
        let early = curve("early", step(10, 300));
        let r = compare_curves(&[late, early], Criterion::EpisodesToFraction(0.95)).unwrap();
        let got: Vec<(&str, Option<f64>)> = r.rows.iter().map(|x| (x.name.as_str(), x.value)).collect();
        assert_eq!(got, vec![("early", Some(10.0)), ("late", Some(20.0))]);
    }

    #[test]
    fn auc_prefers_larger_area() {
        let r = compare_curves(
            &[curve("small", vec![1.0, 1.0]), curve("big", vec![2.0, 2.0])],
            Criterion::Auc,
        )
        .unwrap();
        assert_eq!(r.rows[0].name, "big");
        assert_eq!(r.rows[0].value, Some(4.0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let err = compare_curves(&[curve("a", vec![1.0]), curve("b", vec![1.0, 2.0])], Criterion::Auc).unwrap_err();
        assert_eq!(err.code(), "CONFIG_ERROR");
    }

    #[test]
    fn never_reaching_sorts_last() {
        // final level is negative so the 0.95 threshold sits above every point
        let neg = curve("neg", vec![-10.0, -10.0]);
        let pos = curve("pos", vec![0.0, 1.0]);
        let r = compare_curves(&[neg, pos], Criterion::EpisodesToFraction(0.95)).unwrap();
        assert_eq!(r.rows[1].name, "neg");
        assert_eq!(r.rows[1].value, None);
        assert!(r.to_string().contains("never"));
    }

    #[test]
    fn criterion_parsing() {
        assert_eq!(Criterion::parse("auc").unwrap(), Criterion::Auc);
        assert_eq!(
            Criterion::parse("episodes_to_fraction(0.9)").unwrap(),
            Criterion::EpisodesToFraction(0.9)
        );
        assert_eq!(
            Criterion::parse("episodes_to_fraction=0.5").unwrap(),
            Criterion::EpisodesToFraction(0.5)
        );
        assert!(Criterion::parse("median").is_err());
    }

    #[test]
    fn parses_metrics_and_summary_columns() {
        let m = Curve::parse(
            "m",
            "episode,total_reward,smoothed_reward,epsilon,loss_mean,phys_transitions,twin_transitions\n0,1,1,1,0,1,0\n1,3,2,1,0,1,0\n",
        )
        .unwrap();
        assert_eq!(m.smoothed, vec![1.0, 2.0]);
        let s = Curve::parse("s", "episode,mean_smoothed_reward,std_smoothed_reward\n0,5,0\n# seed 3 failed: X\n").unwrap();
        assert_eq!(s.smoothed, vec![5.0]);
    }
}
