//! Drift removal and cycle statistics against generated traces with known
//! ground truth.

use channelforge::sigproc::{
    cycle_stats, remove_drift, segment_cycles, synth_cycles, DriftMethod, DriftOptions, SynthSpec,
};
use std::time::Instant;

fn rms(a: &[f64]) -> f64 {
    (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt()
}

fn rel_rms_change(before: &[f64], after: &[f64]) -> f64 {
    let diff: Vec<f64> = before.iter().zip(after).map(|(a, b)| a - b).collect();
    rms(&diff) / rms(before)
}

/// Mean of the flat open-phase samples, which are zero in the clean signal.
fn baseline_mean(spec: &SynthSpec, ohms: &[f64]) -> f64 {
    let (sum, n) = ohms
        .iter()
        .enumerate()
        .filter(|(i, _)| spec.is_baseline_sample(*i))
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    sum / n as f64
}

#[test]
fn five_hundred_cycles_with_drift() {
    let spec = SynthSpec {
        cycles: 500,
        drift_ohm: 0.2,
        ..Default::default()
    };
    let trace = synth_cycles(&spec).unwrap();
    let start = Instant::now();
    let out = remove_drift(&trace, DriftMethod::Both, &DriftOptions::default()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.len(), trace.len());
    let base = baseline_mean(&spec, &out.ohms);
    assert!(base.abs() < 1e-3, "baseline mean {base}");
    let windows = segment_cycles(&out, spec.period_s).unwrap();
    assert_eq!(windows.len(), 500);
    let worst = windows
        .iter()
        .map(|w| (w.peak() - spec.amplitude_ohm).abs() / spec.amplitude_ohm)
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "worst peak error {worst}");
    eprintln!("500-cycle drift removal: {elapsed:?}, baseline {base:.2e}, worst peak error {worst:.2e}");
}

#[test]
fn zero_drift_passes_unchanged() {
    let spec = SynthSpec {
        cycles: 300,
        ..Default::default()
    };
    let trace = synth_cycles(&spec).unwrap();
    for method in [DriftMethod::Highpass, DriftMethod::Linear, DriftMethod::Both] {
        let out = remove_drift(&trace, method, &DriftOptions::default()).unwrap();
        let change = rel_rms_change(&trace.ohms, &out.ohms);
        assert!(change < 0.01, "{method:?}: {change}");
        let again = remove_drift(&out, method, &DriftOptions::default()).unwrap();
        assert!(rel_rms_change(&out.ohms, &again.ohms) < 0.01);
    }
}

#[test]
fn fifty_identical_cycles() {
    let spec = SynthSpec {
        cycles: 50,
        ..Default::default()
    };
    let trace = synth_cycles(&spec).unwrap();
    let windows = segment_cycles(&trace, 6.0).unwrap();
    assert_eq!(windows.len(), 50);
    assert!(windows.iter().all(|w| w.samples.len() == 6000));
    let stats = cycle_stats(&windows).unwrap();
    assert!((stats.mean_peak_ohm - 0.4).abs() / 0.4 < 0.01);
    assert_eq!(stats.sd_peak_ohm, 0.0);
    assert!(stats.sd_envelope.iter().all(|&v| v == 0.0));
}

#[test]
fn noisy_drifting_cycles_recover_amplitude() {
    let spec = SynthSpec {
        cycles: 50,
        drift_ohm: 0.05,
        noise_sd_ohm: 0.002,
        seed: 3,
        ..Default::default()
    };
    let trace = synth_cycles(&spec).unwrap();
    let out = remove_drift(&trace, DriftMethod::Linear, &DriftOptions::default()).unwrap();
    let stats = cycle_stats(&segment_cycles(&out, 6.0).unwrap()).unwrap();
    assert_eq!(stats.cycle_count, 50);
    // Peak of noisy data is biased up by a few noise SDs.
    assert!((stats.mean_peak_ohm - 0.4).abs() < 0.02, "{}", stats.mean_peak_ohm);
}
