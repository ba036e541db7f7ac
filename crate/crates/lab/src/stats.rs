//! Small statistics helpers for Monte-Carlo summaries.

/// Paired per-frame comparison of two decoders on the same frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paired {
    pub frames: usize,
    /// Sum over frames of `a - b` bit errors.
    pub diff_bits: i64,
    /// Mean per-frame difference.
    pub mean: f64,
    pub std_err: f64,
    /// `mean / std_err`; zero when both vanish.
    pub z: f64,
}

impl Paired {
    /// `a` is significantly worse (more errors) than `b` at `sigmas`.
    pub fn a_worse(&self, sigmas: f64) -> bool {
        self.z > sigmas
    }
}

/// Compares the common prefix of two per-frame bit-error lists.
pub fn paired(a: &[u32], b: &[u32]) -> Paired {
    let n = a.len().min(b.len());
    let diffs: Vec<f64> = a[..n].iter().zip(&b[..n]).map(|(&x, &y)| x as f64 - y as f64).collect();
    let diff_bits = a[..n].iter().zip(&b[..n]).map(|(&x, &y)| x as i64 - y as i64).sum();
    let (mean, var) = mean_var(&diffs);
    let std_err = if n > 1 { (var / n as f64).sqrt() } else { 0.0 };
    let z = if std_err > 0.0 {
        mean / std_err
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    };
    Paired { frames: n, diff_bits, mean, std_err, z }
}

/// Mean and unbiased variance; the variance is zero for fewer than two
/// samples.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Least-squares slope of `ln y` on `ln x` over points with `x, y > 0`.
/// `None` with fewer than two distinct usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [64.0, 128.0, 256.0, 512.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[64.0], &[0.1]), None);
        assert_eq!(loglog_slope(&[64.0, 128.0], &[0.1, 0.0]), None);
    }

    #[test]
    fn paired_differences() {
        let p = paired(&[3, 0, 2, 5], &[1, 0, 2]);
        assert_eq!(p.frames, 3);
        assert_eq!(p.diff_bits, 2);
        assert!(p.z > 0.0);
        let same = paired(&[1, 2], &[1, 2]);
        assert_eq!((same.z, same.mean), (0.0, 0.0));
        assert!(paired(&[1, 1], &[0, 0]).a_worse(3.0));
    }

    #[test]
    fn moments() {
        assert_eq!(mean_var(&[1.0, 3.0]), (2.0, 2.0));
        assert_eq!(mean_var(&[4.0]), (4.0, 0.0));
    }
}
