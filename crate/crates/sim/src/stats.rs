use serde::{Deserialize, Serialize};

/// Summary statistics as consumed by the box plots. `std` is the sample
/// standard deviation (zero for a single value); quantiles interpolate
/// linearly between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_values(values: &[f64]) -> Summary {
    assert!(!values.is_empty(), "summary of an empty sample");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        mean,
        std,
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    }
}

/// Linear interpolation at position `q (n - 1)` of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value() {
        let s = summarize_values(&[3.5]);
        assert_eq!(
            s,
            Summary {
                mean: 3.5,
                std: 0.0,
                q25: 3.5,
                median: 3.5,
                q75: 3.5,
                min: 3.5,
                max: 3.5
            }
        );
    }

    #[test]
    fn two_values() {
        let s = summarize_values(&[4.0, 2.0]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.std, 2f64.sqrt());
        assert_eq!((s.q25, s.median, s.q75), (2.5, 3.0, 3.5));
        assert_eq!((s.min, s.max), (2.0, 4.0));
    }

    #[test]
    fn five_values() {
        let s = summarize_values(&[5.0, 1.0, 4.0, 2.0, 3.0]);
        assert_eq!((s.q25, s.median, s.q75), (2.0, 3.0, 4.0));
        assert_eq!(s.std, 2.5f64.sqrt());
    }
}
