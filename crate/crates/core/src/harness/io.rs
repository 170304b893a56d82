use std::io::{Read, Write};

use super::{EpisodeLog, ScoreStats, TrainRecord};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "episode,score,epsilon,loss,seconds";
pub const STATS_HEADER: &str = "label,n,mean,stddev,min,max";

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::parse(line, format!("{kind:?}")),
    }
}

/// Training records as CSV with the `episode,score,epsilon,loss,seconds` header.
pub fn write_metrics(sink: impl Write, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    if records.is_empty() {
        w.write_record(METRICS_HEADER.split(',')).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(source: impl Read) -> Result<Vec<TrainRecord>> {
    let mut r = csv::Reader::from_reader(source);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::parse(1, format!("expected header `{METRICS_HEADER}`")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// One JSON object per episode.
pub fn write_episode_logs(mut sink: impl Write, logs: &[EpisodeLog]) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut sink, log)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// `label,n,mean,stddev,min,max` rows.
pub fn write_stats(sink: impl Write, stats: &[ScoreStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(STATS_HEADER.split(',')).map_err(csv_err)?;
    for s in stats {
        w.write_record([
            s.label.clone(),
            s.n.to_string(),
            s.mean.to_string(),
            s.stddev.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(episode: u64, loss: Option<f64>) -> TrainRecord {
        TrainRecord {
            episode,
            score: 7,
            epsilon: 0.855,
            loss,
            seconds: 0.25,
        }
    }

    #[test]
    fn metrics_round_trip() {
        let records = vec![rec(0, None), rec(1, Some(0.1 + 0.2))];
        let mut buf = Vec::new();
        write_metrics(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,score,epsilon,loss,seconds\n0,7,0.855,,0.25\n"), "{text}");
        assert_eq!(read_metrics(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn empty_metrics_have_a_header() {
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "episode,score,epsilon,loss,seconds\n");
        assert!(read_metrics(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn bad_metrics_rejected() {
        assert!(read_metrics("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "episode,score,epsilon,loss,seconds\n0,x,0.5,,0\n";
        assert!(matches!(read_metrics(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn stats_row() {
        let s = ScoreStats::from_scores("pid_c", vec![5.0, 6.0, 7.0]).unwrap();
        let mut buf = Vec::new();
        write_stats(&mut buf, &[s]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,n,mean,stddev,min,max\npid_c,3,6,1,5,7\n");
    }
}
