//! Moving-average and Butterworth low-pass filters.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Causal moving average of `order` samples. The first `order - 1` outputs
/// average over the samples seen so far.
pub fn moving_average(x: &[f64], order: usize) -> Vec<f64> {
    assert!(order > 0, "moving average order must be positive");
    (0..x.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(order);
            x[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Moving average that skips samples flagged invalid. Output is `None`
/// where the window holds no valid sample.
pub fn moving_average_masked(x: &[f64], valid: &[bool], order: usize) -> Vec<Option<f64>> {
    assert_eq!(x.len(), valid.len());
    (0..x.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(order);
            let (sum, n) = (lo..=i).filter(|&k| valid[k]).fold((0.0, 0usize), |(s, n), k| (s + x[k], n + 1));
            (n > 0).then(|| sum / n as f64)
        })
        .collect()
}

/// One section in direct form II transposed.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
    s: [f64; 2],
}

impl Section {
    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s[0];
        self.s[0] = self.b[1] * x - self.a[0] * y + self.s[1];
        self.s[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv * z_inv;
        num / den
    }

    fn settle(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.s[1] = self.b[2] * x - self.a[1] * y;
        self.s[0] = self.b[1] * x - self.a[0] * y + self.s[1];
    }
}

/// Butterworth low-pass discretised by impulse invariance and realised as a
/// parallel bank of first- and second-order sections.
///
/// Impulse invariance keeps the digital magnitude response on the analog
/// prototype `1 / sqrt(1 + (f / fc)^(2n))` well into the stopband, where the
/// bilinear transform would compress frequencies. The bank is scaled to an
/// exact DC gain of one.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthLowpass {
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
    sections: Vec<Section>,
}

impl ButterworthLowpass {
    pub fn new(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        assert!(order > 0, "filter order must be positive");
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0,
            "cutoff must lie strictly between 0 and Nyquist"
        );
        let n = order as f64;
        let wc = 2.0 * PI * cutoff_hz;
        let t = 1.0 / sample_rate_hz;
        let poles: Vec<Complex64> = (0..order)
            .map(|k| Complex64::from_polar(wc, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
            .collect();
        let mut sections = Vec::new();
        for (k, &p) in poles.iter().enumerate() {
            // Poles in the upper half-plane pair with their conjugates; the
            // real pole of odd orders stands alone.
            if p.im < -1e-9 * wc {
                continue;
            }
            let residue = poles
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .fold(Complex64::new(wc.powi(order as i32), 0.0), |acc, (_, &q)| acc / (p - q));
            let a = (p * t).exp();
            let r = residue * t;
            if p.im.abs() <= 1e-9 * wc {
                sections.push(Section { b: [r.re, 0.0, 0.0], a: [-a.re, 0.0], s: [0.0; 2] });
            } else {
                sections.push(Section {
                    b: [2.0 * r.re, -2.0 * (r * a.conj()).re, 0.0],
                    a: [-2.0 * a.re, a.norm_sqr()],
                    s: [0.0; 2],
                });
            }
        }
        let dc: f64 = sections.iter().map(Section::dc_gain).sum();
        for s in &mut sections {
            for b in &mut s.b {
                *b /= dc;
            }
        }
        Self { order, cutoff_hz, sample_rate_hz, sections }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.s = [0.0; 2];
        }
    }

    /// Puts the filter in the steady state of a constant input `x`.
    pub fn settle(&mut self, x: f64) {
        for s in &mut self.sections {
            s.settle(x);
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().map(|s| s.step(x)).sum()
    }

    /// Filters a whole signal causally, starting settled on its first sample.
    pub fn filter(&mut self, x: &[f64]) -> Vec<f64> {
        if let Some(&first) = x.first() {
            self.settle(first);
        }
        x.iter().map(|&v| self.step(v)).collect()
    }

    /// Magnitude of the digital frequency response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sample_rate_hz);
        self.sections.iter().map(|s| s.response(z_inv)).sum::<Complex64>().norm()
    }

    /// Magnitude of the analog prototype at `freq_hz`.
    pub fn analog_magnitude(&self, freq_hz: f64) -> f64 {
        1.0 / (1.0 + (freq_hz / self.cutoff_hz).powi(2 * self.order as i32)).sqrt()
    }
}

/// Linear interpolation of samples taken at `src_times` onto `dst_times`.
/// Both time axes must be increasing; values outside the source span hold
/// the nearest end sample.
pub fn interpolate_linear(src_times: &[f64], values: &[f64], dst_times: &[f64]) -> Vec<f64> {
    assert_eq!(src_times.len(), values.len());
    assert!(!values.is_empty(), "cannot interpolate an empty signal");
    let mut out = Vec::with_capacity(dst_times.len());
    let mut k = 0;
    for &t in dst_times {
        while k + 1 < src_times.len() && src_times[k + 1] <= t {
            k += 1;
        }
        let v = if t <= src_times[0] {
            values[0]
        } else if k + 1 >= src_times.len() {
            values[values.len() - 1]
        } else {
            let (t0, t1) = (src_times[k], src_times[k + 1]);
            let w = (t - t0) / (t1 - t0);
            values[k] + w * (values[k + 1] - values[k])
        };
        out.push(v);
    }
    out
}
