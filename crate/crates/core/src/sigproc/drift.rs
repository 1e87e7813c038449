use serde::{Deserialize, Serialize};

use super::{ResistanceTrace, SigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMethod {
    Highpass,
    Linear,
    Both,
}

impl std::str::FromStr for DriftMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "highpass" => Ok(Self::Highpass),
            "linear" => Ok(Self::Linear),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown drift method {s:?} (highpass, linear, both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftOptions {
    /// Window used to pick baseline samples (lowest decile per window).
    pub period_s: f64,
    pub cutoff_hz: f64,
    /// Remove each window's own baseline level instead of one global line.
    pub per_cycle: bool,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self {
            period_s: 6.0,
            cutoff_hz: 0.01,
            per_cycle: false,
        }
    }
}

/// Transposed direct-form II second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// State that makes the filter output steady for a constant unit input.
    pub fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let y = (b0 + b1 + b2) / (1.0 + a1 + a2);
        [y - b0, b2 - a2 * y]
    }

    fn run(&self, x: &mut [f64], zi: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = zi;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Second-order Butterworth high-pass via the bilinear transform.
pub fn butterworth_highpass(cutoff_hz: f64, sample_rate_hz: f64) -> Biquad {
    let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
    let s2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + s2 * k + k * k);
    Biquad {
        b: [norm, -2.0 * norm, norm],
        a: [2.0 * (k * k - 1.0) * norm, (1.0 - s2 * k + k * k) * norm],
    }
}

/// Zero-phase forward-backward filtering. The signal is mirrored by `pad`
/// samples at both ends and each pass starts from the steady state of its
/// first sample.
pub fn filtfilt(filter: &Biquad, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend(x[1..=pad].iter().rev());
    ext.extend_from_slice(x);
    ext.extend(x[n - 1 - pad..n - 1].iter().rev());
    filter_extended(filter, ext, pad, n)
}

fn filter_extended(filter: &Biquad, mut ext: Vec<f64>, front: usize, n: usize) -> Vec<f64> {
    let zi = filter.steady_state();
    let first = ext[0];
    filter.run(&mut ext, zi.map(|z| z * first));
    ext.reverse();
    let first = ext[0];
    filter.run(&mut ext, zi.map(|z| z * first));
    ext.reverse();
    ext[front..front + n].to_vec()
}

/// Forward-backward filtering with cycle-aligned padding: whole periods are
/// copied from each end and shifted so their baseline continues the trace.
/// A periodic signal on a linear trend is thereby extended exactly, where
/// mirroring would insert a spurious half cycle at each edge.
fn filtfilt_periodic(filter: &Biquad, x: &[f64], pad: usize, window: usize) -> Vec<f64> {
    let n = x.len();
    let periods = pad.div_ceil(window).min(n / window);
    if periods == 0 {
        return filtfilt(filter, x, pad);
    }
    let pad = periods * window;
    let level = |s: &[f64]| baseline_level(s, window);
    let front_shift = level(&x[pad - window..pad]) - level(&x[..window]);
    let back_shift = level(&x[n - window..]) - level(&x[n - pad..n - pad + window]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend(x[..pad].iter().map(|v| v - front_shift));
    ext.extend_from_slice(x);
    ext.extend(x[n - pad..].iter().map(|v| v + back_shift));
    filter_extended(filter, ext, pad, n)
}

fn window_len(trace: &ResistanceTrace, period_s: f64) -> Result<usize, SigError> {
    if !(period_s > 0.0) {
        return Err(SigError::InvalidParameter(format!(
            "period must be positive, got {period_s}"
        )));
    }
    Ok(((period_s * trace.sample_rate_hz).round() as usize).clamp(1, trace.len().max(1)))
}

/// Indices of the lowest tenth (at least one sample) of each window.
fn baseline_indices(x: &[f64], window: usize) -> Vec<Vec<usize>> {
    x.chunks(window)
        .enumerate()
        .map(|(w, chunk)| {
            let mut idx: Vec<usize> = (0..chunk.len()).collect();
            idx.sort_by(|&a, &b| chunk[a].total_cmp(&chunk[b]).then(a.cmp(&b)));
            idx.truncate((chunk.len() / 10).max(1));
            idx.into_iter().map(|i| w * window + i).collect()
        })
        .collect()
}

fn baseline_level(x: &[f64], window: usize) -> f64 {
    let idx: Vec<usize> = baseline_indices(x, window).into_iter().flatten().collect();
    idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64
}

fn linear_removal(trace: &ResistanceTrace, window: usize, per_cycle: bool) -> Vec<f64> {
    let x = &trace.ohms;
    let groups = baseline_indices(x, window);
    if per_cycle {
        let mut out = x.clone();
        for (w, idx) in groups.iter().enumerate() {
            let level = idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64;
            let end = ((w + 1) * window).min(x.len());
            for v in &mut out[w * window..end] {
                *v -= level;
            }
        }
        return out;
    }
    // Ordinary least squares on (sample index, value), centred for conditioning.
    let idx: Vec<usize> = groups.into_iter().flatten().collect();
    let n = idx.len() as f64;
    let mt = idx.iter().map(|&i| i as f64).sum::<f64>() / n;
    let my = idx.iter().map(|&i| x[i]).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &idx {
        let dt = i as f64 - mt;
        sxy += dt * (x[i] - my);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, &v)| v - (my + slope * (i as f64 - mt)))
        .collect()
}

/// Removes slow baseline drift.
///
/// `Linear` subtracts a least-squares line through the lowest decile of each
/// period window. `Highpass` applies a zero-phase second-order Butterworth
/// high-pass, then shifts the result so the baseline (lowest-decile level)
/// sits at zero again, since the filter also removes the mean. `Both` runs
/// the linear stage first.
pub fn remove_drift(
    trace: &ResistanceTrace,
    method: DriftMethod,
    opts: &DriftOptions,
) -> Result<ResistanceTrace, SigError> {
    if trace.is_empty() {
        return Err(SigError::TooShort { needed: 1, got: 0 });
    }
    let window = window_len(trace, opts.period_s)?;
    let highpass = matches!(method, DriftMethod::Highpass | DriftMethod::Both);
    if highpass {
        if !(opts.cutoff_hz > 0.0 && opts.cutoff_hz < 0.5 * trace.sample_rate_hz) {
            return Err(SigError::InvalidParameter(format!(
                "cutoff {} Hz is out of range",
                opts.cutoff_hz
            )));
        }
        let needed = (10.0 * trace.sample_rate_hz / opts.cutoff_hz).ceil() as usize;
        if trace.len() < needed {
            return Err(SigError::TooShort {
                needed,
                got: trace.len(),
            });
        }
    }
    let mut x = match method {
        DriftMethod::Highpass => trace.ohms.clone(),
        _ => linear_removal(trace, window, opts.per_cycle),
    };
    if highpass {
        let filter = butterworth_highpass(opts.cutoff_hz, trace.sample_rate_hz);
        let pad = (3.0 * trace.sample_rate_hz / opts.cutoff_hz).ceil() as usize;
        x = filtfilt_periodic(&filter, &x, pad, window);
        let level = baseline_level(&x, window);
        x.iter_mut().for_each(|v| *v -= level);
    }
    Ok(trace.with_ohms(x))
}
