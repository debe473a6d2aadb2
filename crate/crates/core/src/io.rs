//! Plain-text CSV import and export. Floats are written with Rust's shortest
//! round-trip formatting, so every exported value parses back bit-exactly.

use std::fmt::Write as _;

use crate::dynamics::{Layout, TimeGrid, TrajectoryEnsemble};
use crate::error::{Error, Result};

/// CSV with one column per slice; all slices must have equal length.
pub fn columns_csv(headers: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(headers.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows));
    let mut out = headers.join(",");
    out.push('\n');
    for r in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", c[r]);
        }
        out.push('\n');
    }
    out
}

/// Ensemble export: header `sample,step,time,<state columns>`.
pub fn ensemble_to_csv(ensemble: &TrajectoryEnsemble) -> String {
    let mut out = String::from("sample,step,time");
    for label in &ensemble.layout.labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let dim = ensemble.dim();
    for i in 0..ensemble.n_samples {
        for s in 0..=ensemble.grid.n_steps {
            let _ = write!(out, "{i},{s},{}", ensemble.grid.time(s));
            for c in 0..dim {
                let _ = write!(out, ",{}", ensemble.value(i, s, c));
            }
            out.push('\n');
        }
    }
    out
}

/// Parse an ensemble written by [`ensemble_to_csv`]. The `x`/`v` columns, when
/// present, are taken as position and velocity.
pub fn ensemble_from_csv(text: &str) -> Result<TrajectoryEnsemble> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty ensemble CSV".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["sample", "step", "time"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `sample,step,time,<state columns>`".into(),
        });
    }
    let labels: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let dim = labels.len();

    let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 3 {
            return Err(bad(format!("expected {} fields", dim + 3)));
        }
        let sample: usize = fields[0]
            .parse()
            .map_err(|_| bad("bad sample index".into()))?;
        let step: usize = fields[1]
            .parse()
            .map_err(|_| bad("bad step index".into()))?;
        let time: f64 = fields[2].parse().map_err(|_| bad("bad time".into()))?;
        for f in &fields[3..] {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| bad(format!("bad value `{f}`")))?,
            );
        }
        rows.push((i + 1, sample, step, time));
    }
    let per_sample = rows.iter().take_while(|r| r.1 == 0).count();
    if per_sample < 2 || !rows.len().is_multiple_of(per_sample) {
        return Err(Error::Parse {
            line: rows.last().map_or(1, |r| r.0),
            message: "need at least two grid points per sample and no ragged samples".into(),
        });
    }
    for (r, &(line, sample, step, _)) in rows.iter().enumerate() {
        if sample != r / per_sample || step != r % per_sample {
            return Err(Error::Parse {
                line,
                message: "rows must be ordered by sample, then step".into(),
            });
        }
    }
    let n_samples = rows.len() / per_sample;
    let times: Vec<f64> = rows[..per_sample].iter().map(|r| r.3).collect();
    let steps = per_sample - 1;
    let grid = TimeGrid {
        dt: times[1] - times[0],
        n_steps: steps,
    };
    let layout = Layout {
        position: labels.iter().position(|l| l == "x"),
        velocity: labels.iter().position(|l| l == "v"),
        labels,
    };
    Ok(TrajectoryEnsemble {
        grid,
        layout,
        n_samples,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_layout() {
        let csv = columns_csv(&["a", "b"], &[&[1.0, 2.5], &[0.1, -3.0]]);
        assert_eq!(csv, "a,b\n1,0.1\n2.5,-3\n");
    }

    #[test]
    fn rejects_bad_header() {
        assert!(ensemble_from_csv("").is_err());
        assert!(ensemble_from_csv("s,t,u,x\n").is_err());
    }
}
