//! Control schedules as CSV (`segment,field_index,sign,duration`) or JSON, and
//! planner results as JSON. Field indices and segment numbers are 1-based in
//! both formats; signs are written `1` / `-1`.

use std::io::{Read, Write};
use std::path::Path;

use flowcalc_core::{ControlSchedule, PlanResult, Segment, Sign};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::report::fmt_f64;

pub const CSV_HEADER: [&str; 4] = ["segment", "field_index", "sign", "duration"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub field_index: usize,
    pub sign: i8,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub segments: Vec<SegmentDoc>,
    #[serde(default)]
    pub total_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub schedule: ScheduleDoc,
}

fn sign_value(s: Sign) -> i8 {
    match s {
        Sign::Plus => 1,
        Sign::Minus => -1,
    }
}

fn parse_sign(v: i64) -> CliResult<Sign> {
    match v {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        other => Err(CliError::usage(format!("control sign must be 1 or -1, got {other}"))),
    }
}

fn to_segment(field_index: usize, sign: i64, duration: f64) -> CliResult<Segment> {
    if field_index == 0 {
        return Err(CliError::usage("field indices are 1-based"));
    }
    Ok(Segment::new(field_index - 1, parse_sign(sign)?, duration)?)
}

impl ScheduleDoc {
    pub fn from_schedule(s: &ControlSchedule) -> Self {
        ScheduleDoc {
            segments: s
                .segments()
                .iter()
                .map(|seg| SegmentDoc { field_index: seg.field_index + 1, sign: sign_value(seg.sign), duration: seg.duration })
                .collect(),
            total_duration: Some(s.total_duration()),
        }
    }

    pub fn to_schedule(&self) -> CliResult<ControlSchedule> {
        let segments = self
            .segments
            .iter()
            .map(|s| to_segment(s.field_index, i64::from(s.sign), s.duration))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(ControlSchedule::new(segments)?)
    }
}

impl PlanDoc {
    pub fn new(start: &[f64], target: &[f64], result: &PlanResult) -> Self {
        PlanDoc {
            start: start.to_vec(),
            target: target.to_vec(),
            endpoint: result.endpoint.coords().to_vec(),
            residual: result.residual,
            iterations: result.iterations,
            schedule: ScheduleDoc::from_schedule(&result.schedule),
        }
    }
}

pub fn write_schedule_csv<W: Write>(sched: &ControlSchedule, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (i, seg) in sched.segments().iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            (seg.field_index + 1).to_string(),
            sign_value(seg.sign).to_string(),
            fmt_f64(seg.duration),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_schedule_csv<R: Read>(input: R) -> CliResult<ControlSchedule> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(CliError::usage(format!("schedule CSV header must be {}", CSV_HEADER.join(","))));
    }
    let mut segments = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::usage(format!("schedule row {}: bad {what}", row + 1));
        let field_index: usize = rec[1].parse().map_err(|_| bad("field_index"))?;
        let sign: i64 = rec[2].trim_start_matches('+').parse().map_err(|_| bad("sign"))?;
        let duration: f64 = rec[3].parse().map_err(|_| bad("duration"))?;
        segments.push(to_segment(field_index, sign, duration)?);
    }
    Ok(ControlSchedule::new(segments)?)
}

pub fn read_schedule_json(text: &str) -> CliResult<ControlSchedule> {
    // Accept either a bare schedule or a full planner result.
    let value: serde_json::Value = serde_json::from_str(text)?;
    let doc: ScheduleDoc = match value.get("schedule") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    doc.to_schedule()
}

/// Reads a `.json` or `.csv` schedule file.
pub fn load_schedule(path: &Path) -> CliResult<ControlSchedule> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_schedule_json(&text),
        _ => read_schedule_csv(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ControlSchedule {
        ControlSchedule::new(vec![
            Segment::new(0, Sign::Plus, 0.2).unwrap(),
            Segment::new(1, Sign::Minus, 0.1 + 0.2).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut buf = Vec::new();
        write_schedule_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("segment,field_index,sign,duration\n1,1,1,"));
        assert_eq!(read_schedule_csv(text.as_bytes()).unwrap(), sample());
    }

    #[test]
    fn json_round_trip() {
        let json = serde_json::to_string(&ScheduleDoc::from_schedule(&sample())).unwrap();
        assert_eq!(read_schedule_json(&json).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_rows() {
        for bad in [
            "segment,field_index,sign,duration\n1,0,1,0.5\n",
            "segment,field_index,sign,duration\n1,1,2,0.5\n",
            "segment,field_index,sign,duration\n1,1,1,-0.5\n",
            "segment,field,sign,duration\n1,1,1,0.5\n",
        ] {
            assert!(read_schedule_csv(bad.as_bytes()).is_err(), "{bad}");
        }
    }
}
