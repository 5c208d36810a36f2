//! Agreement metrics between two score vectors.
//!
//! SROCC uses fractional (mean) ranks, KROCC is Kendall's tau-b computed
//! with Knight's O(n log n) merge-sort algorithm, PLCC is the plain sample
//! Pearson coefficient with no nonlinear fitting.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

pub const MIN_CORRELATION_LEN: usize = 3;

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<(), AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < min {
        return Err(AnalysisError::InsufficientLength { len: a.len(), min });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFiniteInput);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ranks starting at 1; tied values share the mean of the ranks they span.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn plcc(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, MIN_CORRELATION_LEN)?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(AnalysisError::DegenerateInput);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, MIN_CORRELATION_LEN)?;
    plcc(&fractional_ranks(a), &fractional_ranks(b))
}

/// Number of tied pairs within runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for x in sorted {
        if prev.as_ref() == Some(&x) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(x);
    }
    total + run * (run + 1) / 2
}

/// Sorts `v` by the second component and returns the number of exchanges
/// an insertion sort would perform (i.e. inversions).
fn merge_count(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].1.total_cmp(&v[i].1) == Ordering::Less {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b.
pub fn krocc(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, MIN_CORRELATION_LEN)?;
    let n = a.len() as u64;
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let total = n * (n - 1) / 2;
    let ties_a = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_both = tied_pairs(pairs.iter().copied());
    let mut buf = Vec::with_capacity(pairs.len());
    let swaps = merge_count(&mut pairs, &mut buf);
    let ties_b = tied_pairs(pairs.iter().map(|p| p.1));

    let untied_a = total - ties_a;
    let untied_b = total - ties_b;
    if untied_a == 0 || untied_b == 0 {
        return Err(AnalysisError::DegenerateInput);
    }
    // concordant - discordant
    let score = total as i64 - ties_a as i64 - ties_b as i64 + ties_both as i64 - 2 * swaps as i64;
    let tau = score as f64 / (untied_a as f64 * untied_b as f64).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, 1)?;
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub srocc: f64,
    pub plcc: f64,
    pub krocc: f64,
    pub rmse: f64,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(a: &[f64], b: &[f64]) -> Result<Self, AnalysisError> {
        Ok(CorrelationReport {
            srocc: srocc(a, b)?,
            plcc: plcc(a, b)?,
            krocc: krocc(a, b)?,
            rmse: rmse(a, b)?,
            n: a.len(),
        })
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("srocc", self.srocc), ("plcc", self.plcc), ("krocc", self.krocc)] {
            if !(v.is_finite() && (-1.0..=1.0).contains(&v)) {
                out.push(format!("{name} = {v} outside [-1, 1]"));
            }
        }
        if !(self.rmse.is_finite() && self.rmse >= 0.0) {
            out.push(format!("rmse = {} is not a nonnegative number", self.rmse));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srocc_examples() {
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(srocc(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // 1 - 6 * 4 / (5 * 24)
        let r = srocc(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn plcc_examples() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let affine: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((plcc(&a, &affine).unwrap() - 1.0).abs() < 1e-15);
        assert!((plcc(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn krocc_examples() {
        assert_eq!(krocc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0);
        // (8 - 2) / 10
        let r = krocc(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[2.0], &[5.0]).unwrap(), 3.0);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(srocc(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(AnalysisError::LengthMismatch { .. })));
        assert!(matches!(plcc(&[1.0, 2.0], &[1.0, 2.0]), Err(AnalysisError::InsufficientLength { .. })));
        assert!(matches!(krocc(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(AnalysisError::DegenerateInput)));
        assert!(matches!(plcc(&[1.0, 2.0, 3.0], &[2.0; 3]), Err(AnalysisError::DegenerateInput)));
        assert!(matches!(rmse(&[], &[]), Err(AnalysisError::InsufficientLength { .. })));
        assert!(matches!(rmse(&[f64::NAN], &[1.0]), Err(AnalysisError::NonFiniteInput)));
    }
}
