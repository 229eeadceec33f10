//! CSV serialization of control sequences, class traces and scans.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value reads back bit for bit.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::dynamics::ControlSequence;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scan::ScanPoint;
use crate::tradeoff::{resample, ClassTrace};

/// Round-trip decimal text for `x`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: invalid number {s:?}")))
}

/// Columns `dt_seconds,u0,u1,...`, one row per segment.
pub fn write_controls_csv<W: Write>(seq: &ControlSequence, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dt_seconds".to_string()];
    header.extend((0..seq.control_count()).map(|k| format!("u{k}")));
    out.write_record(&header)?;
    for (u, dt) in seq.controls().iter().zip(seq.grid().durations()) {
        let mut row = vec![fmt_f64(*dt)];
        row.extend(u.iter().map(|x| fmt_f64(*x)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_controls_csv<R: Read>(r: R) -> Result<ControlSequence> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.clone();
    if header.get(0) != Some("dt_seconds") || header.len() < 2 {
        return Err(Error::Parse("expected header dt_seconds,u0,...".into()));
    }
    let mut durations = Vec::new();
    let mut controls = Vec::new();
    for (i, rec) in input.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("line {line}: expected {} fields", header.len())));
        }
        durations.push(parse_f64(&rec[0], line)?);
        controls.push(rec.iter().skip(1).map(|s| parse_f64(s, line)).collect::<Result<Vec<_>>>()?);
    }
    if durations.is_empty() {
        return Err(Error::Parse("no segments".into()));
    }
    ControlSequence::new(controls, Arc::new(TimeGrid::new(durations)?))
}

/// Columns `T_seconds,F_opt,Q_opt_rad_per_s,sigma_Q,class_id,slipped_from`.
pub fn write_trace_csv<W: Write>(trace: &ClassTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["T_seconds", "F_opt", "Q_opt_rad_per_s", "sigma_Q", "class_id", "slipped_from"])?;
    for s in &trace.samples {
        out.write_record([
            fmt_f64(s.t),
            fmt_f64(s.fidelity),
            fmt_f64(s.q_opt),
            fmt_f64(s.sigma_q),
            s.class_id.to_string(),
            s.slipped_from.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Row of a trace CSV as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub fidelity: f64,
    pub q_opt: f64,
    pub sigma_q: f64,
    pub class_id: usize,
    pub slipped_from: Option<usize>,
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut input = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in input.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 6 {
            return Err(Error::Parse(format!("line {line}: expected 6 fields")));
        }
        let id = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {line}: invalid class id {s:?}")))
        };
        rows.push(TraceRow {
            t: parse_f64(&rec[0], line)?,
            fidelity: parse_f64(&rec[1], line)?,
            q_opt: parse_f64(&rec[2], line)?,
            sigma_q: parse_f64(&rec[3], line)?,
            class_id: id(&rec[4])?,
            slipped_from: if rec[5].trim().is_empty() { None } else { Some(id(&rec[5])?) },
        });
    }
    Ok(rows)
}

/// Optimal controls on `points` normalized-time samples, one row per trace
/// sample. Columns `T_seconds,class_id,u<k>_<i>`.
pub fn write_control_surface_csv<W: Write>(trace: &ClassTrace, points: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let width = trace.samples.first().map_or(0, |s| s.sequence.control_count());
    let mut header = vec!["T_seconds".to_string(), "class_id".to_string()];
    for k in 0..width {
        header.extend((0..points).map(|i| format!("u{k}_{i:03}")));
    }
    out.write_record(&header)?;
    for s in &trace.samples {
        let profile = resample(&s.sequence, points);
        let mut row = vec![fmt_f64(s.t), s.class_id.to_string()];
        for k in 0..width {
            row.extend(profile.iter().map(|u| fmt_f64(u[k])));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `T_seconds,F,Q_rad_per_s,dE_rad_per_s,C`.
pub fn write_scan_csv<W: Write>(points: &[ScanPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["T_seconds", "F", "Q_rad_per_s", "dE_rad_per_s", "C"])?;
    for p in points {
        out.write_record([
            fmt_f64(p.t),
            fmt_f64(p.fidelity),
            fmt_f64(p.q),
            fmt_f64(p.delta_e),
            fmt_f64(p.length),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_round_trip_exactly() {
        let grid = Arc::new(TimeGrid::new(vec![1e-9 / 3.0, 2.5e-8, 7e-10]).unwrap());
        let seq = ControlSequence::new(
            vec![vec![0.1, 1.0 / 3.0], vec![0.0, 1.0], vec![std::f64::consts::PI / 4.0, 5e-17]],
            grid,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_controls_csv(&seq, &mut buf).unwrap();
        let back = read_controls_csv(buf.as_slice()).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn malformed_controls_rejected() {
        assert!(read_controls_csv("dt_seconds,u0\n1e-9,abc\n".as_bytes()).is_err());
        assert!(read_controls_csv("t,u0\n1e-9,0.5\n".as_bytes()).is_err());
        assert!(read_controls_csv("dt_seconds,u0\n".as_bytes()).is_err());
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }
}
