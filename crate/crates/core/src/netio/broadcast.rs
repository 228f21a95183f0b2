use super::osc::{OscArg, OscMessage};
use super::ADDRESS_PREFIX;
use crate::dsp::NUM_BARK_BANDS;

/// Loudness, centroid and the Bark bands.
pub const FEATURE_ARGS: usize = 2 + NUM_BARK_BANDS;

pub fn feature_message(source: &str, loudness_db: f64, centroid_hz: f64, bark: &[f64; NUM_BARK_BANDS]) -> OscMessage {
    let mut args = Vec::with_capacity(FEATURE_ARGS);
    args.push(OscArg::Float(loudness_db as f32));
    args.push(OscArg::Float(centroid_hz as f32));
    args.extend(bark.iter().map(|&b| OscArg::Float(b as f32)));
    OscMessage::new(format!("{ADDRESS_PREFIX}/features/{source}"), args)
}

/// Unknown affect values are sent as NaN.
pub fn meter_message(source: &str, loudness_db: f64, centroid_hz: f64, affect: Option<(f64, f64)>) -> OscMessage {
    let (v, a) = affect.unwrap_or((f64::NAN, f64::NAN));
    OscMessage::new(
        format!("{ADDRESS_PREFIX}/meter/{source}"),
        [loudness_db, centroid_hz, v, a].iter().map(|&x| OscArg::Float(x as f32)).collect(),
    )
}

/// Fires at `t = k / rate` for k = 0, 1, ..., at most once per call. The
/// k-th deadline is recomputed from k so there is no drift. Rates above the
/// block rate therefore saturate at one message per block.
#[derive(Debug, Clone)]
pub struct RateTicker {
    rate_hz: f64,
    count: u64,
}

impl RateTicker {
    pub fn new(rate_hz: f64) -> Self {
        Self { rate_hz, count: 0 }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn due(&mut self, t_s: f64) -> bool {
        if t_s + 1e-9 >= self.count as f64 / self.rate_hz {
            self.count += 1;
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FrameAnalyzer;

    #[test]
    fn silence_frame_message() {
        let a = FrameAnalyzer::new(48_000, 8192).unwrap();
        let (l, c, b) = a.describe_reactive(&[0.0; 512]);
        let m = feature_message("performer", l, c, &b);
        assert_eq!(m.address, "/revival/features/performer");
        assert_eq!(m.args.len(), 26);
        assert_eq!(m.args[0], OscArg::Float(-120.0));
        assert!(m.args[1..].iter().all(|x| *x == OscArg::Float(0.0)));
    }

    #[test]
    fn decimation_counts() {
        for (rate, secs, block) in [(30.0, 2.0, 512), (10.0, 10.0, 512), (100.0, 1.0, 512), (7.0, 3.0, 64)] {
            let mut t = RateTicker::new(rate);
            let blocks = (secs * 48_000.0 / block as f64) as usize;
            let n = (0..blocks).filter(|&k| t.due(k as f64 * block as f64 / 48_000.0)).count();
            let want = (rate * secs).min(blocks as f64);
            assert!((n as f64 - want).abs() <= 1.0, "{rate} Hz: {n}");
        }
    }

    #[test]
    fn meter_nan_when_unknown() {
        let m = meter_message("x", -30.0, 1000.0, None);
        assert_eq!(m.args.len(), 4);
        assert!(m.args[2].as_f32().unwrap().is_nan());
    }
}
