//! Gaussian-kernel MMD between two feature populations.
//!
//! The kernel is `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))` and `sigma`
//! defaults to the median pairwise distance of the pooled sample (self
//! pairs excluded).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::Matrix;

/// `n` feature vectors of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    pub source_tag: String,
}

impl FeatureCloud {
    pub fn new(n: usize, d: usize, rows: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if rows.len() != n * d {
            return Err(Error::Dimension(format!("{} values for {n} x {d} features", rows.len())));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self {
            n,
            d,
            rows,
            source_tag: source_tag.into(),
        })
    }

    pub fn from_matrix(m: Matrix, source_tag: impl Into<String>) -> Result<Self> {
        Self::new(m.rows, m.cols, m.values, source_tag)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// The first `n` rows.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n);
        Self {
            n,
            d: self.d,
            rows: self.rows[..n * self.d].to_vec(),
            source_tag: self.source_tag.clone(),
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(a: &FeatureCloud, b: &FeatureCloud) -> Result<()> {
    if a.d != b.d {
        return Err(Error::Dimension(format!(
            "feature dimensions differ: {} ({}) vs {} ({})",
            a.d, a.source_tag, b.d, b.source_tag
        )));
    }
    Ok(())
}

/// Median heuristic over all unordered pairs of the pooled sample.
///
/// Returns `0.0` when every point coincides; callers treat that as the
/// degenerate case (see [`Kernel::Indicator`]).
pub fn median_sigma(a: &FeatureCloud, b: &FeatureCloud) -> Result<f64> {
    check_dims(a, b)?;
    let pooled: Vec<&[f64]> = (0..a.n).map(|i| a.row(i)).chain((0..b.n).map(|i| b.row(i))).collect();
    let n = pooled.len();
    if n < 2 {
        return Err(Error::Data("median heuristic needs at least two points".into()));
    }
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pooled = &pooled;
            (i + 1..n).map(move |j| sq_dist(pooled[i], pooled[j]).sqrt())
        })
        .collect();
    let m = dists.len();
    let mid = m / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if m % 2 == 1 {
        Ok(upper)
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Gaussian { sigma: f64 },
    /// `k(x, y) = 1` iff `x == y`; the `sigma -> 0` limit of the Gaussian.
    Indicator,
}

impl Kernel {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp(),
            Kernel::Indicator => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Sum of `k(x_i, y_j)` over index pairs, skipping `i == j` when `skip_diag`.
/// Rows are reduced in a fixed order so the result is independent of the
/// thread count.
fn kernel_sum(x: &FeatureCloud, y: &FeatureCloud, kernel: Kernel, skip_diag: bool) -> f64 {
    let row_sums: Vec<f64> = (0..x.n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (0..y.n)
                .filter(|&j| !(skip_diag && i == j))
                .map(|j| kernel.eval(xi, y.row(j)))
                .sum::<f64>()
        })
        .collect();
    row_sums.iter().sum()
}

/// Unbiased MMD² estimate for an arbitrary kernel.
///
/// Within-sample means run over distinct pairs. With equal sample sizes the
/// cross term also skips `i == j` (the paired U-statistic), so identical
/// clouds give exactly zero; otherwise it averages all `n_a * n_b` pairs.
/// The estimate can be slightly negative.
pub fn mmd2_unbiased_kernel(a: &FeatureCloud, b: &FeatureCloud, kernel: Kernel) -> Result<f64> {
    check_dims(a, b)?;
    if a.n < 2 || b.n < 2 {
        return Err(Error::Data(format!(
            "MMD needs at least two samples per cloud, got {} and {}",
            a.n, b.n
        )));
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let kaa = kernel_sum(a, a, kernel, true) / (na * (na - 1.0));
    let kbb = kernel_sum(b, b, kernel, true) / (nb * (nb - 1.0));
    let kab = if a.n == b.n {
        kernel_sum(a, b, kernel, true) / (na * (na - 1.0))
    } else {
        kernel_sum(a, b, kernel, false) / (na * nb)
    };
    Ok(kaa + kbb - 2.0 * kab)
}

pub fn mmd2_unbiased(a: &FeatureCloud, b: &FeatureCloud, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    mmd2_unbiased_kernel(a, b, Kernel::Gaussian { sigma })
}

/// Result of an MMD comparison with the median-heuristic bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdResult {
    pub sigma: f64,
    pub mmd2: f64,
    /// All pooled points coincided; the indicator kernel was used.
    pub degenerate: bool,
}

pub fn mmd2_median(a: &FeatureCloud, b: &FeatureCloud) -> Result<MmdResult> {
    let sigma = median_sigma(a, b)?;
    if sigma > 0.0 {
        Ok(MmdResult {
            sigma,
            mmd2: mmd2_unbiased(a, b, sigma)?,
            degenerate: false,
        })
    } else {
        log::warn!("all pooled features coincide; falling back to the indicator kernel");
        Ok(MmdResult {
            sigma,
            mmd2: mmd2_unbiased_kernel(a, b, Kernel::Indicator)?,
            degenerate: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(d: usize, v: &[f64]) -> FeatureCloud {
        FeatureCloud::new(v.len() / d, d, v.to_vec(), "t").unwrap()
    }

    #[test]
    fn median_of_small_sets() {
        let a = cloud(2, &[0.0, 0.0]);
        let b = cloud(2, &[3.0, 0.0]);
        assert_eq!(median_sigma(&a, &b).unwrap(), 3.0);

        let a = cloud(1, &[0.0, 1.0]);
        let b = cloud(1, &[3.0]);
        assert_eq!(median_sigma(&a, &b).unwrap(), 2.0);

        // 4 points -> 6 distances {1,2,3,1,2,1}: sorted 1,1,1,2,2,3 -> median 1.5
        let a = cloud(1, &[0.0, 1.0]);
        let b = cloud(1, &[2.0, 3.0]);
        assert_eq!(median_sigma(&a, &b).unwrap(), 1.5);
    }

    #[test]
    fn identical_clouds_are_zero() {
        let a = cloud(2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.5, 3.0, 3.0]);
        assert_eq!(mmd2_unbiased(&a, &a.clone(), 1.3).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = cloud(1, &[0.0, 1.0]);
        let b = cloud(1, &[2.0, 4.0]);
        let s: f64 = 1.5;
        let k = |d: f64| (-d * d / (2.0 * s * s)).exp();
        // paired U-statistic for n = 2: h(z1, z2) + h(z2, z1) over 2 ordered pairs
        let expect = k(1.0) + k(2.0) - (k(4.0) + k(1.0));
        let got = mmd2_unbiased(&a, &b, s).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn errors() {
        let a = cloud(1, &[0.0, 1.0]);
        let b = cloud(2, &[0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(mmd2_unbiased(&a, &a, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(mmd2_unbiased(&a, &b, 1.0), Err(Error::Dimension(_))));
        let one = cloud(1, &[0.0]);
        assert!(mmd2_unbiased(&one, &a, 1.0).is_err());
    }

    #[test]
    fn degenerate_sigma_uses_indicator() {
        let a = cloud(1, &[2.0, 2.0]);
        let r = mmd2_median(&a, &a.clone()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.mmd2, 0.0);
    }
}
