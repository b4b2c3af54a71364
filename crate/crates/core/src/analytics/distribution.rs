//! Plot-ready distributions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Distinct values with the fraction of observations at or below each.
pub fn cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 = 1.0;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub fraction: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

const MAX_BINS: usize = 1000;

/// Histogram with Freedman–Diaconis bin width, normalized to fractions.
pub fn pdf(values: &[f64]) -> Vec<Bin> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / libm::cbrt(n as f64);
    let range = max - min;
    let bins = if range <= 0.0 || width <= 0.0 {
        1
    } else {
        (libm::ceil(range / width) as usize).clamp(1, MAX_BINS)
    };
    let step = if bins == 1 { range.max(0.0) } else { range / bins as f64 };
    let mut counts = alloc::vec![0usize; bins];
    for v in &sorted {
        let idx = if step > 0.0 { ((v - min) / step) as usize } else { 0 };
        counts[idx.min(bins - 1)] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, c)| Bin {
            lo: min + step * i as f64,
            hi: if i + 1 == bins {
                max
            } else {
                min + step * (i + 1) as f64
            },
            fraction: *c as f64 / n as f64,
        })
        .collect()
}

pub fn cdf_csv(rows: &[(&str, Vec<(f64, f64)>)]) -> String {
    let mut out = String::from("dataset,value,cumulative_fraction\n");
    for (name, points) in rows {
        for (v, f) in points {
            out.push_str(&format!("{name},{v},{f}\n"));
        }
    }
    out
}

pub fn pdf_csv(rows: &[(&str, Vec<Bin>)]) -> String {
    let mut out = String::from("dataset,bin_low,bin_high,fraction\n");
    for (name, bins) in rows {
        for b in bins {
            out.push_str(&format!("{name},{},{},{}\n", b.lo, b.hi, b.fraction));
        }
    }
    out
}
