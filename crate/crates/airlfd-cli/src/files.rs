//! On-disk artifacts and atomic writes.

use std::path::{Path, PathBuf};

use airlfd::detector::{ScoreSeries, TrajectoryScore};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCORES_HEADER: &str = "trajectory_id,n_transitions,score,threshold,flag";
pub const DIGEST_PREFIX: &str = "# config_digest=";

pub fn scores_name(model: &str) -> String {
    format!("scores_{model}.csv")
}

pub fn detect_name(model: &str) -> String {
    format!("detect_{model}.json")
}

pub fn report_name(model: &str) -> String {
    format!("report_{model}.json")
}

pub fn plot_name(model: &str) -> String {
    format!("plot_{model}.svg")
}

/// Files written by one command; removed again if the command fails.
#[derive(Debug, Default)]
pub struct Outputs {
    created: Vec<PathBuf>,
}

impl Outputs {
    /// Writes through a temporary sibling and renames into place.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        if let Err(e) = std::fs::rename(&tmp, path) {
            let _ = std::fs::remove_file(&tmp);
            return Err(CliError::io(path, e));
        }
        self.created.push(path.to_path_buf());
        Ok(())
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.created
    }

    pub fn rollback(&mut self) {
        for p in self.created.drain(..).rev() {
            let _ = std::fs::remove_file(p);
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn to_json<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn scores_csv(digest: &str, series: &ScoreSeries<f64>, threshold: f64) -> String {
    let mut s = format!("{DIGEST_PREFIX}{digest}\n{SCORES_HEADER}\n");
    for e in &series.entries {
        let flag = u8::from(e.score >= threshold);
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.trajectory_id, e.n_transitions, e.score, threshold, flag
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoresFile {
    pub digest: Option<String>,
    pub series: ScoreSeries<f64>,
    pub threshold: f64,
    pub flags: Vec<bool>,
}

#[derive(Deserialize)]
struct ScoreRow {
    trajectory_id: usize,
    n_transitions: usize,
    score: f64,
    threshold: f64,
    flag: u8,
}

pub fn parse_scores(text: &str) -> std::result::Result<ScoresFile, String> {
    let digest = text
        .lines()
        .find_map(|l| l.strip_prefix(DIGEST_PREFIX))
        .map(|d| d.trim().to_string());
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != SCORES_HEADER {
        return Err(format!("expected header {SCORES_HEADER:?}"));
    }
    let mut entries = Vec::new();
    let mut flags = Vec::new();
    let mut threshold = None;
    for row in rdr.deserialize::<ScoreRow>() {
        let r = row.map_err(|e| e.to_string())?;
        if threshold.is_some_and(|t: f64| t != r.threshold) {
            return Err("threshold column is not constant".into());
        }
        threshold = Some(r.threshold);
        entries.push(TrajectoryScore {
            trajectory_id: r.trajectory_id,
            n_transitions: r.n_transitions,
            score: r.score,
        });
        flags.push(r.flag == 1);
    }
    let threshold = threshold.ok_or("no score rows")?;
    Ok(ScoresFile {
        digest,
        series: ScoreSeries { entries },
        threshold,
        flags,
    })
}

pub fn read_scores(path: &Path) -> Result<ScoresFile> {
    let text = read_text(path)?;
    parse_scores(&text).map_err(|m| CliError::Data(format!("{}: {m}", path.display())))
}

/// Output of `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectFile {
    pub model: String,
    pub config_digest: String,
    pub threshold_method: String,
    pub threshold: f64,
    pub persistence: usize,
    pub onset: Option<usize>,
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip() {
        let series = ScoreSeries {
            entries: vec![
                TrajectoryScore { trajectory_id: 0, n_transitions: 31, score: 0.1 + 0.2 },
                TrajectoryScore { trajectory_id: 1, n_transitions: 31, score: 0.7 },
            ],
        };
        let text = scores_csv("abc", &series, 0.5);
        assert!(text.starts_with("# config_digest=abc\ntrajectory_id,n_transitions,score,threshold,flag\n"));
        let f = parse_scores(&text).unwrap();
        assert_eq!(f.series, series);
        assert_eq!(f.threshold, 0.5);
        assert_eq!(f.flags, vec![false, true]);
        assert_eq!(f.digest.as_deref(), Some("abc"));
        assert!(parse_scores("# x\na,b\n1,2\n").is_err());
    }

    #[test]
    fn atomic_write_and_rollback() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        let a = dir.path().join("sub/a.txt");
        out.write(&a, b"one").unwrap();
        assert_eq!(std::fs::read_to_string(&a).unwrap(), "one");
        assert!(!dir.path().join("sub/.a.txt.tmp").exists());
        out.rollback();
        assert!(!a.exists());
    }
}
