use serde::{Deserialize, Serialize};

use super::SigError;

/// Maximum deviation of any time step from the first one.
pub const UNIFORM_DT_TOLERANCE_S: f64 = 1e-6;

/// Uniformly sampled resistance, with an optional force channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceTrace {
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub ohms: Vec<f64>,
    pub force_n: Option<Vec<f64>>,
}

impl ResistanceTrace {
    pub fn new(sample_rate_hz: f64, ohms: Vec<f64>) -> Self {
        Self {
            sample_rate_hz,
            t0_s: 0.0,
            ohms,
            force_n: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ohms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ohms.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    /// Same timing and force channel with new resistance samples.
    pub fn with_ohms(&self, ohms: Vec<f64>) -> Self {
        Self { ohms, ..self.clone() }
    }
}

#[derive(Deserialize)]
struct Row {
    t_s: f64,
    ohms: f64,
    force_n: Option<f64>,
}

/// Parses `t_s,ohms[,force_n]` CSV with strictly increasing, uniformly spaced
/// timestamps.
pub fn ingest_csv(bytes: &[u8]) -> Result<ResistanceTrace, SigError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| SigError::Csv(e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_force = match names.as_slice() {
        ["t_s", "ohms"] => false,
        ["t_s", "ohms", "force_n"] => true,
        _ => return Err(SigError::Header(names.join(","))),
    };
    let mut t = Vec::new();
    let mut ohms = Vec::new();
    let mut force = Vec::new();
    for (row, rec) in reader.deserialize::<Row>().enumerate() {
        let rec = rec.map_err(|e| SigError::Row {
            row,
            message: e.to_string(),
        })?;
        let nan = |name: &str| SigError::Row {
            row,
            message: format!("{name} is not a finite number"),
        };
        if !rec.t_s.is_finite() {
            return Err(nan("t_s"));
        }
        if !rec.ohms.is_finite() {
            return Err(nan("ohms"));
        }
        if has_force {
            match rec.force_n {
                Some(f) if f.is_finite() => force.push(f),
                _ => return Err(nan("force_n")),
            }
        }
        if let Some(&prev) = t.last() {
            if rec.t_s <= prev {
                return Err(SigError::Row {
                    row,
                    message: format!("time {} s does not increase", rec.t_s),
                });
            }
        }
        t.push(rec.t_s);
        ohms.push(rec.ohms);
    }
    if t.len() < 2 {
        return Err(SigError::TooShort {
            needed: 2,
            got: t.len(),
        });
    }
    let expected = t[1] - t[0];
    for row in 2..t.len() {
        let dt = t[row] - t[row - 1];
        if (dt - expected).abs() > UNIFORM_DT_TOLERANCE_S {
            return Err(SigError::NonUniform { row, dt, expected });
        }
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    Ok(ResistanceTrace {
        sample_rate_hz: 1.0 / dt,
        t0_s: t[0],
        ohms,
        force_n: has_force.then_some(force),
    })
}

pub fn write_csv<W: std::io::Write>(trace: &ResistanceTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match &trace.force_n {
        Some(force) => {
            w.write_record(["t_s", "ohms", "force_n"])?;
            for (i, (r, f)) in trace.ohms.iter().zip(force).enumerate() {
                w.write_record([trace.time(i).to_string(), r.to_string(), f.to_string()])?;
            }
        }
        None => {
            w.write_record(["t_s", "ohms"])?;
            for (i, r) in trace.ohms.iter().enumerate() {
                w.write_record([trace.time(i).to_string(), r.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
