//! Gauge time-series analysis: zero up-crossing wave statistics and spectral
//! energy at a given frequency.

/// Mean wave height (crest to trough) and mean period from the zero
/// up-crossing method over a time window. The signal is demeaned over the
/// window first. Returns None with fewer than two up-crossings.
pub fn zero_upcrossing_stats(
    t: &[f64],
    values: &[f64],
    window: (f64, f64),
) -> Option<(f64, f64)> {
    assert_eq!(t.len(), values.len());
    let idx: Vec<usize> = (0..t.len())
        .filter(|&i| t[i] >= window.0 && t[i] <= window.1)
        .collect();
    if idx.len() < 3 {
        return None;
    }
    let mean: f64 = idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
    let v: Vec<f64> = idx.iter().map(|&i| values[i] - mean).collect();
    let tt: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    // upward zero crossings with linear interpolation
    let mut crossings = Vec::new();
    for i in 1..v.len() {
        if v[i - 1] < 0.0 && v[i] >= 0.0 {
            let frac = -v[i - 1] / (v[i] - v[i - 1]);
            crossings.push(tt[i - 1] + frac * (tt[i] - tt[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    // one wave per crossing interval: height = max - min within it
    let mut heights = Vec::new();
    let mut periods = Vec::new();
    for w in crossings.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for i in 0..v.len() {
            if tt[i] >= t0 && tt[i] <= t1 {
                hi = hi.max(v[i]);
                lo = lo.min(v[i]);
            }
        }
        if hi > lo {
            heights.push(hi - lo);
            periods.push(t1 - t0);
        }
    }
    if heights.is_empty() {
        return None;
    }
    let mh = heights.iter().sum::<f64>() / heights.len() as f64;
    let mp = periods.iter().sum::<f64>() / periods.len() as f64;
    Some((mh, mp))
}

/// Amplitude of the Fourier component at frequency f over a window
/// (projection onto e^{-2 pi i f t}, trapezoid-free plain sum; use an
/// integer number of periods for clean estimates).
pub fn harmonic_amplitude(t: &[f64], values: &[f64], f: f64, window: (f64, f64)) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut n = 0usize;
    let mut sum = 0.0;
    for i in 0..t.len() {
        if t[i] >= window.0 && t[i] <= window.1 {
            sum += values[i];
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    for i in 0..t.len() {
        if t[i] >= window.0 && t[i] <= window.1 {
            let phase = 2.0 * std::f64::consts::PI * f * t[i];
            re += (values[i] - mean) * phase.cos();
            im += (values[i] - mean) * phase.sin();
        }
    }
    2.0 * (re * re + im * im).sqrt() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_height_and_period() {
        let a = 0.3;
        let period = 2.0;
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|&tt| 5.0 + a * (2.0 * std::f64::consts::PI * tt / period).sin())
            .collect();
        let (h, p) = zero_upcrossing_stats(&t, &v, (0.0, 20.0)).unwrap();
        assert!((h - 2.0 * a).abs() < 0.01, "height {h}");
        assert!((p - period).abs() < 0.011, "period {p}");
    }

    #[test]
    fn constant_signal_empty() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let v = vec![1.0; 100];
        assert!(zero_upcrossing_stats(&t, &v, (0.0, 99.0)).is_none());
    }

    #[test]
    fn two_tone_matches_brute_force_scan() {
        // independent oracle: brute-force crossing scan without interpolation
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|&tt| {
                (2.0 * std::f64::consts::PI * tt / 1.7).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * tt / 0.6).sin()
            })
            .collect();
        let (h, p) = zero_upcrossing_stats(&t, &v, (0.0, 20.0)).unwrap();
        // oracle
        let mut crossings = Vec::new();
        for i in 1..v.len() {
            if v[i - 1] < 0.0 && v[i] >= 0.0 && t[i] <= 20.0 {
                crossings.push(i);
            }
        }
        assert!(crossings.len() >= 2);
        let mut oh = Vec::new();
        let mut op = Vec::new();
        for w in crossings.windows(2) {
            let seg = &v[w[0]..w[1]];
            let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
            oh.push(hi - lo);
            op.push(t[w[1]] - t[w[0]]);
        }
        let oh_mean = oh.iter().sum::<f64>() / oh.len() as f64;
        let op_mean = op.iter().sum::<f64>() / op.len() as f64;
        assert!((h - oh_mean).abs() < 0.02 * oh_mean, "{h} vs {oh_mean}");
        assert!((p - op_mean).abs() < 0.02 * op_mean, "{p} vs {op_mean}");
    }

    #[test]
    fn harmonic_amplitude_recovers_components() {
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        let f0 = 0.5;
        let v: Vec<f64> = t
            .iter()
            .map(|&tt| {
                0.8 * (2.0 * std::f64::consts::PI * f0 * tt).sin()
                    + 0.2 * (2.0 * std::f64::consts::PI * 2.0 * f0 * tt).cos()
            })
            .collect();
        // integer number of periods: 0..16 s = 8 periods of f0
        let a1 = harmonic_amplitude(&t, &v, f0, (0.0, 16.0));
        let a2 = harmonic_amplitude(&t, &v, 2.0 * f0, (0.0, 16.0));
        assert!((a1 - 0.8).abs() < 0.01, "a1 = {a1}");
        assert!((a2 - 0.2).abs() < 0.01, "a2 = {a2}");
    }
}
