/// Linear-interpolation resampler. Output length is
/// `round(len · to / from)`; identity when the rates match.
pub fn resample_linear(samples: &[f32], from_rate: u32, to_rate: u32) -> Vec<f32> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = from_rate as f64 / to_rate as f64;
    let out_len = ((samples.len() as f64) * to_rate as f64 / from_rate as f64).round() as usize;
    let last = samples.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = pos.floor() as usize;
            if idx >= last {
                return samples[last];
            }
            let frac = pos - idx as f64;
            (samples[idx] as f64 * (1.0 - frac) + samples[idx + 1] as f64 * frac) as f32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_lengths() {
        let x = vec![0.0, 1.0, 0.0, -1.0];
        assert_eq!(resample_linear(&x, 48_000, 48_000), x);
        assert_eq!(resample_linear(&vec![0.0; 44_100], 44_100, 48_000).len(), 48_000);
        assert!(resample_linear(&[], 44_100, 48_000).is_empty());
    }

    #[test]
    fn upsample_interpolates() {
        let y = resample_linear(&[0.0, 1.0], 1, 2);
        assert_eq!(y, vec![0.0, 0.5, 1.0, 1.0]);
    }
}
