use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ResistanceTrace, SigError};

/// One fixed-length slice of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWindow {
    pub start: usize,
    pub samples: Vec<f64>,
}

impl CycleWindow {
    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

/// Best lag in `-P/2..=P/2` aligning the second period with the first.
/// Ties go to the smallest magnitude so periodic input yields 0.
fn cycle_lag(x: &[f64], p: usize) -> isize {
    let half = (p / 2) as isize;
    let first = &x[..p];
    let lags: Vec<isize> = (-half..=half)
        .filter(|&l| {
            let start = p as isize + l;
            start >= 0 && (start as usize) + p <= x.len()
        })
        .collect();
    let scores: Vec<(isize, f64)> = lags
        .par_iter()
        .map(|&l| {
            let s = (p as isize + l) as usize;
            (l, correlation(first, &x[s..s + p]))
        })
        .collect();
    let mut best = (0isize, f64::NEG_INFINITY);
    for (l, c) in scores {
        let better = c > best.1 + 1e-12 || ((c - best.1).abs() <= 1e-12 && l.abs() < best.0.abs());
        if better {
            best = (l, c);
        }
    }
    best.0
}

/// Slices a trace into windows of `period_s`. The second period is matched
/// against the first by normalised cross-correlation and the stride is
/// corrected by the best lag; incomplete trailing windows are dropped.
pub fn segment_cycles(trace: &ResistanceTrace, period_s: f64) -> Result<Vec<CycleWindow>, SigError> {
    if !(period_s > 0.0) {
        return Err(SigError::InvalidParameter(format!(
            "period must be positive, got {period_s}"
        )));
    }
    let p = (period_s * trace.sample_rate_hz).round() as usize;
    if p == 0 {
        return Err(SigError::InvalidParameter("period is shorter than one sample".into()));
    }
    let x = &trace.ohms;
    if x.len() < p {
        return Err(SigError::TooShort {
            needed: p,
            got: x.len(),
        });
    }
    let lag = if x.len() >= 2 * p { cycle_lag(x, p) } else { 0 };
    let stride = (p as isize + lag).max(1) as usize;
    let mut windows = Vec::new();
    let mut start = 0;
    while start + p <= x.len() {
        windows.push(CycleWindow {
            start,
            samples: x[start..start + p].to_vec(),
        });
        start += stride;
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycle_count: usize,
    pub peaks_ohm: Vec<f64>,
    pub mean_peak_ohm: f64,
    pub sd_peak_ohm: f64,
    pub mean_waveform: Vec<f64>,
    pub sd_envelope: Vec<f64>,
}

/// JSON summary written by the analysis commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean_peak_ohm: f64,
    pub sd_peak_ohm: f64,
    pub cycles: usize,
}

impl CycleStats {
    pub fn summary(&self) -> StatsSummary {
        StatsSummary {
            mean_peak_ohm: self.mean_peak_ohm,
            sd_peak_ohm: self.sd_peak_ohm,
            cycles: self.cycle_count,
        }
    }
}

/// Welford accumulation: identical inputs give a variance of exactly zero.
fn mean_sd<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let sd = if n > 1 {
        (m2 / (n - 1) as f64).max(0.0).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Per-sample mean and sample SD across windows, and the same for peaks.
pub fn cycle_stats(windows: &[CycleWindow]) -> Result<CycleStats, SigError> {
    let len = windows.first().map_or(0, |w| w.samples.len());
    if len == 0 || windows.iter().any(|w| w.samples.len() != len) {
        return Err(SigError::UnequalWindows);
    }
    let peaks_ohm: Vec<f64> = windows.iter().map(CycleWindow::peak).collect();
    let (mean_peak_ohm, sd_peak_ohm) = mean_sd(peaks_ohm.iter().copied());
    let (mean_waveform, sd_envelope) = (0..len)
        .into_par_iter()
        .map(|i| mean_sd(windows.iter().map(|w| w.samples[i])))
        .unzip();
    Ok(CycleStats {
        cycle_count: windows.len(),
        peaks_ohm,
        mean_peak_ohm,
        sd_peak_ohm,
        mean_waveform,
        sd_envelope,
    })
}

/// Mean waveform with its SD envelope, one row per in-cycle sample.
pub fn write_plot_csv<W: std::io::Write>(stats: &CycleStats, sample_rate_hz: f64, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "mean_ohm", "sd_ohm"])?;
    for (i, (m, s)) in stats.mean_waveform.iter().zip(&stats.sd_envelope).enumerate() {
        w.write_record([(i as f64 / sample_rate_hz).to_string(), m.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(samples: Vec<f64>) -> CycleWindow {
        CycleWindow { start: 0, samples }
    }

    #[test]
    fn trailing_partial_is_dropped() {
        let trace = ResistanceTrace::new(100.0, (0..150).map(|i| (i % 100) as f64).collect());
        let w = segment_cycles(&trace, 1.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples.len(), 100);
        assert!(matches!(
            segment_cycles(&trace, 2.0),
            Err(SigError::TooShort { needed: 200, .. })
        ));
    }

    #[test]
    fn lag_tracks_a_longer_true_period() {
        // True period 110 samples, nominal 100: the search should pick +10.
        let x: Vec<f64> = (0..1100).map(|i| if i % 110 < 55 { 0.0 } else { 1.0 }).collect();
        let trace = ResistanceTrace::new(100.0, x);
        let w = segment_cycles(&trace, 1.0).unwrap();
        assert_eq!(w[1].start, 110);
        assert_eq!(w.len(), 10);
    }

    #[test]
    fn two_peak_hand_case() {
        let s = cycle_stats(&[window(vec![0.0, 0.2, 0.1]), window(vec![0.0, 0.4, 0.1])]).unwrap();
        assert!((s.mean_peak_ohm - 0.3).abs() < 1e-12);
        assert!((s.sd_peak_ohm - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.mean_waveform.len(), 3);
    }

    #[test]
    fn identical_windows_have_zero_spread() {
        let w = window(vec![0.1, 0.7, 0.3, 0.123456789]);
        let s = cycle_stats(&vec![w.clone(); 7]).unwrap();
        assert!(s.sd_envelope.iter().all(|&v| v == 0.0));
        assert_eq!(s.sd_peak_ohm, 0.0);
        assert_eq!(s.mean_waveform, w.samples);
    }

    #[test]
    fn unequal_windows_rejected() {
        assert_eq!(
            cycle_stats(&[window(vec![0.0]), window(vec![0.0, 1.0])]),
            Err(SigError::UnequalWindows)
        );
        assert_eq!(cycle_stats(&[]), Err(SigError::UnequalWindows));
    }

    #[test]
    fn summary_json_keys() {
        let s = cycle_stats(&[window(vec![1.0])]).unwrap();
        let v = serde_json::to_value(s.summary()).unwrap();
        assert_eq!(v["cycles"], 1);
        assert_eq!(v["mean_peak_ohm"], 1.0);
        assert_eq!(v["sd_peak_ohm"], 0.0);
    }

    #[test]
    fn plot_csv_rows() {
        let s = cycle_stats(&[window(vec![1.0, 2.0])]).unwrap();
        let mut buf = Vec::new();
        write_plot_csv(&s, 10.0, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t_s,mean_ohm,sd_ohm\n0,1,0\n0.1,2,0\n");
    }
}
