//! Plain-text serialization: CSV for records, kernels, shot logs, and traces,
//! JSON for per-setting summaries and reconstruction estimates.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::detector::MeasurementRecord;
use crate::error::{Error, Result};
use crate::povm::PovmElement;
use crate::reconstruct::ReconstructionReport;
use crate::sim::ShotLog;

const RECORDS_HEADER: &str = "setting,mean_nbar,trials,no_clicks";
const KERNELS_HEADER: &str = "setting,n,r_n";
const SHOTS_HEADER: &str = "shot_index,nbar_actual,clicked";
const TRACE_HEADER: &str = "iteration,loglik,fidelity";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(c);
            }
        } else {
            match c {
                '"' => in_quotes = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            line: lineno,
            reason: "unterminated quoted field".into(),
        });
    }
    fields.push(cur);
    Ok(fields)
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, lineno: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        line: lineno,
        reason: format!("invalid {what}: {s:?}"),
    })
}

fn expect_header(line: Option<std::io::Result<String>>, want: &str) -> Result<()> {
    match line {
        Some(line) => {
            let line = line?;
            if line.trim_end() == want {
                Ok(())
            } else {
                Err(Error::Parse {
                    line: 1,
                    reason: format!("expected header {want:?}, found {line:?}"),
                })
            }
        }
        None => Err(Error::Parse {
            line: 1,
            reason: format!("missing header {want:?}"),
        }),
    }
}

/// Write measurement records, one per row, each tagged with the mean noise
/// level that the row's setting saw.
pub fn write_records_csv<W: Write>(w: &mut W, rows: &[(MeasurementRecord, f64)]) -> Result<()> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for (rec, mean_nbar) in rows {
        writeln!(
            w,
            "{},{},{},{}",
            csv_field(rec.setting_label()),
            mean_nbar,
            rec.trials(),
            rec.no_clicks()
        )?;
    }
    Ok(())
}

/// Inverse of [`write_records_csv`].
pub fn read_records_csv<R: BufRead>(r: R) -> Result<Vec<(MeasurementRecord, f64)>> {
    let mut lines = r.lines();
    expect_header(lines.next(), RECORDS_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line, lineno)?;
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mean_nbar: f64 = parse_field(&fields[1], "mean_nbar", lineno)?;
        let trials: u64 = parse_field(&fields[2], "trials", lineno)?;
        let no_clicks: u64 = parse_field(&fields[3], "no_clicks", lineno)?;
        out.push((
            MeasurementRecord::new(fields[0].clone(), trials, no_clicks)?,
            mean_nbar,
        ));
    }
    Ok(out)
}

/// Write kernels in long format: one row per (setting, photon number) pair.
pub fn write_kernels_csv<W: Write>(w: &mut W, povms: &[PovmElement]) -> Result<()> {
    writeln!(w, "{KERNELS_HEADER}")?;
    for povm in povms {
        for (n, r) in povm.kernel().iter().enumerate() {
            writeln!(w, "{},{},{}", csv_field(povm.label()), n, r)?;
        }
    }
    Ok(())
}

/// Inverse of [`write_kernels_csv`]: consecutive rows with the same setting
/// label form one kernel, with photon numbers running 0, 1, 2, ...
pub fn read_kernels_csv<R: BufRead>(r: R) -> Result<Vec<PovmElement>> {
    let mut lines = r.lines();
    expect_header(lines.next(), KERNELS_HEADER)?;
    let mut out = Vec::new();
    let mut current: Option<(String, Vec<f64>)> = None;
    let flush = |current: &mut Option<(String, Vec<f64>)>, out: &mut Vec<PovmElement>| {
        if let Some((label, kernel)) = current.take() {
            out.push(PovmElement::new(kernel, label)?);
        }
        Ok::<_, Error>(())
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line, lineno)?;
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let n: usize = parse_field(&fields[1], "photon number", lineno)?;
        let r: f64 = parse_field(&fields[2], "kernel entry", lineno)?;
        match &mut current {
            Some((label, kernel)) if *label == fields[0] => {
                if n != kernel.len() {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!(
                            "photon number {n} out of order, expected {}",
                            kernel.len()
                        ),
                    });
                }
                kernel.push(r);
            }
            _ => {
                if n != 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("kernel for {:?} must start at photon number 0", fields[0]),
                    });
                }
                flush(&mut current, &mut out)?;
                current = Some((fields[0].clone(), vec![r]));
            }
        }
    }
    flush(&mut current, &mut out)?;
    Ok(out)
}

/// Write the per-shot log of a drifting-noise run.
pub fn write_shot_log_csv<W: Write>(w: &mut W, log: &ShotLog) -> Result<()> {
    writeln!(w, "{SHOTS_HEADER}")?;
    for rec in log.records() {
        writeln!(w, "{},{},{}", rec.shot_index, rec.nbar_actual, rec.clicked)?;
    }
    Ok(())
}

/// Write the iteration traces; the fidelity column stays blank when no truth
/// was supplied.
pub fn write_trace_csv<W: Write>(
    w: &mut W,
    loglik: &[(u64, f64)],
    fidelity: Option<&[(u64, f64)]>,
) -> Result<()> {
    if let Some(fid) = fidelity {
        if fid.len() != loglik.len() {
            return Err(Error::LengthMismatch {
                context: "log-likelihood trace vs fidelity trace",
                left: loglik.len(),
                right: fid.len(),
            });
        }
    }
    writeln!(w, "{TRACE_HEADER}")?;
    for (i, (iter, ll)) in loglik.iter().enumerate() {
        match fidelity {
            Some(fid) => writeln!(w, "{iter},{ll},{}", fid[i].1)?,
            None => writeln!(w, "{iter},{ll},")?,
        }
    }
    Ok(())
}

/// Per-setting aggregate of a simulated or measured run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub label: String,
    pub trials: u64,
    pub no_clicks: u64,
    pub mean_nbar: f64,
}

/// Summarize records for the JSON sidecar of a simulation run.
pub fn settings_summary(rows: &[(MeasurementRecord, f64)]) -> Vec<SettingSummary> {
    rows.iter()
        .map(|(rec, mean_nbar)| SettingSummary {
            label: rec.setting_label().to_string(),
            trials: rec.trials(),
            no_clicks: rec.no_clicks(),
            mean_nbar: *mean_nbar,
        })
        .collect()
}

/// JSON form of a reconstruction outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub probs: Vec<f64>,
    pub error_bound: f64,
    pub clamp_events: u64,
    pub iterations_run: u64,
    pub final_loglik: f64,
    pub final_fidelity: Option<f64>,
}

impl EstimateJson {
    pub fn from_report(report: &ReconstructionReport) -> Self {
        Self {
            probs: report.estimate.probs().to_vec(),
            error_bound: report.error_bound,
            clamp_events: report.clamp_events,
            iterations_run: report.iterations_run,
            final_loglik: report.loglik_trace.last().map(|(_, ll)| *ll).unwrap_or(0.0),
            final_fidelity: report
                .fidelity_trace
                .as_ref()
                .and_then(|t| t.last().map(|(_, f)| *f)),
        }
    }
}

/// Pretty-printed JSON with a trailing newline, so files are diff-friendly
/// and byte-stable for identical values.
pub fn write_json_pretty<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorSetting;
    use crate::povm::thermal_kernel;
    use crate::sim::ShotRecord;

    fn roundtrip_records(rows: Vec<(MeasurementRecord, f64)>) {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &rows).unwrap();
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn records_roundtrip_including_awkward_labels() {
        roundtrip_records(vec![
            (MeasurementRecord::new("nbar=0.1", 1000, 925).unwrap(), 0.1),
            (MeasurementRecord::new("a,b \"c\"", 10, 0).unwrap(), 0.5),
        ]);
    }

    #[test]
    fn kernels_roundtrip_preserving_order_and_values() {
        let povms = vec![
            thermal_kernel(&DetectorSetting::new(0.8, 0.1).unwrap(), 4),
            thermal_kernel(&DetectorSetting::new(0.8, 0.9).unwrap(), 4),
        ];
        let mut buf = Vec::new();
        write_kernels_csv(&mut buf, &povms).unwrap();
        let back = read_kernels_csv(buf.as_slice()).unwrap();
        assert_eq!(back, povms);
    }

    #[test]
    fn kernel_reader_rejects_out_of_order_rows() {
        let text = "setting,n,r_n\na,0,1\na,2,0.5\n";
        assert!(read_kernels_csv(text.as_bytes()).is_err());
        let text = "setting,n,r_n\na,1,1\n";
        assert!(read_kernels_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn readers_reject_wrong_headers_and_report_bad_lines() {
        assert!(read_records_csv("wrong,header\n".as_bytes()).is_err());
        let text = "setting,mean_nbar,trials,no_clicks\nx,0.1,abc,3\n";
        let err = read_records_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let text = "setting,mean_nbar,trials,no_clicks\n\"x,0.1,10,3\n";
        assert!(read_records_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn shot_log_rows_follow_the_header_schema() {
        let log = ShotLog::from_records(vec![
            ShotRecord {
                shot_index: 0,
                nbar_actual: 0.1,
                clicked: false,
            },
            ShotRecord {
                shot_index: 1,
                nbar_actual: 0.1005,
                clicked: true,
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_shot_log_csv(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "shot_index,nbar_actual,clicked\n0,0.1,false\n1,0.1005,true\n"
        );
    }

    #[test]
    fn trace_csv_blanks_fidelity_when_absent() {
        let ll = vec![(0u64, -5.0), (10u64, -4.5)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &ll, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iteration,loglik,fidelity\n0,-5,\n10,-4.5,\n");

        let fid = vec![(0u64, 0.2), (10u64, 0.9)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &ll, Some(&fid)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iteration,loglik,fidelity\n0,-5,0.2\n10,-4.5,0.9\n");

        let short = vec![(0u64, 0.2)];
        let mut buf = Vec::new();
        assert!(write_trace_csv(&mut buf, &ll, Some(&short)).is_err());
    }

    #[test]
    fn estimate_json_roundtrips_through_serde() {
        let est = EstimateJson {
            probs: vec![0.1, 0.2, 0.7],
            error_bound: 0.004,
            clamp_events: 0,
            iterations_run: 100,
            final_loglik: -1234.5,
            final_fidelity: Some(0.97),
        };
        let mut buf = Vec::new();
        write_json_pretty(&mut buf, &est).unwrap();
        assert_eq!(*buf.last().unwrap(), b'\n');
        let back: EstimateJson = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn summaries_copy_the_record_fields() {
        let rows = vec![(MeasurementRecord::new("nbar=0.3", 50, 20).unwrap(), 0.3)];
        let summary = settings_summary(&rows);
        assert_eq!(summary[0].label, "nbar=0.3");
        assert_eq!(summary[0].trials, 50);
        assert_eq!(summary[0].no_clicks, 20);
        assert_eq!(summary[0].mean_nbar, 0.3);
    }
}
