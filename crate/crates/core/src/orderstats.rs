//! Variance of fixed-position ranked coordinates ("sample hardening").
//!
//! Positions are 1-based in ascending order: `k = 1` is the minimum and
//! `k = n` the maximum, which is the first coordinate after the descending
//! ranking used elsewhere in the crate.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Variance of the k-th ascending order statistic of n i.i.d. Exp(1)
/// variables, from the spacings representation.
pub fn analytic_exp_order_variance(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("position {k} outside 1..={n}")));
    }
    Ok((1..=k).map(|j| 1.0 / ((n - j + 1) as f64).powi(2)).sum())
}

fn sorted_draw<R: Rng + ?Sized>(n: usize, rng: &mut R, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..n).map(|_| rng.sample::<f64, _>(Exp1)));
    buf.sort_by(f64::total_cmp);
}

/// Welford accumulator for the unbiased sample variance.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.count - 1) as f64
    }
}

/// Monte Carlo variance of the k-th ascending coordinate of sorted Exp(1)
/// vectors.
pub fn empirical_order_variance<R: Rng + ?Sized>(n: usize, k: usize, trials: usize, rng: &mut R) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("position {k} outside 1..={n}")));
    }
    if trials < 2 {
        return Err(Error::Config("at least two trials are needed".into()));
    }
    let mut acc = Moments::default();
    let mut buf = Vec::with_capacity(n);
    for _ in 0..trials {
        sorted_draw(n, rng, &mut buf);
        acc.push(buf[k - 1]);
    }
    Ok(acc.variance())
}

/// Tabulated positions: minimum, median `ceil(n/2)` and maximum.
pub fn report_positions(n: usize) -> [usize; 3] {
    [1, n.div_ceil(2), n]
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardeningRow {
    pub n: usize,
    pub k: usize,
    pub empirical: f64,
    pub analytic: f64,
}

impl HardeningRow {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.analytic).abs() / self.analytic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardeningReport {
    pub trials: usize,
    pub rows: Vec<HardeningRow>,
}

pub const HARDENING_CSV_HEADER: &str = "n,k,empirical,analytic,trials";

impl HardeningReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HARDENING_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.8e},{:.8e},{}\n", r.n, r.k, r.empirical, r.analytic, self.trials));
        }
        out
    }

    /// Rows for the minimum coordinate, in input order of n.
    pub fn minimum_rows(&self) -> impl Iterator<Item = &HardeningRow> {
        self.rows.iter().filter(|r| r.k == 1)
    }
}

/// Empirical and analytic variances at the min, median and max positions for
/// every n. Each n shares its draws across the three positions.
pub fn hardening_report<R: Rng + ?Sized>(n_values: &[usize], trials: usize, rng: &mut R) -> Result<HardeningReport> {
    if n_values.is_empty() {
        return Err(Error::Config("no object counts given".into()));
    }
    if trials < 2 {
        return Err(Error::Config("at least two trials are needed".into()));
    }
    let mut rows = Vec::with_capacity(3 * n_values.len());
    let mut buf = Vec::new();
    for &n in n_values {
        if n == 0 {
            return Err(Error::Config("object count must be positive".into()));
        }
        let positions = report_positions(n);
        let mut acc = [Moments::default(); 3];
        for _ in 0..trials {
            sorted_draw(n, rng, &mut buf);
            for (a, &k) in acc.iter_mut().zip(&positions) {
                a.push(buf[k - 1]);
            }
        }
        for (a, &k) in acc.iter().zip(&positions) {
            rows.push(HardeningRow {
                n,
                k,
                empirical: a.variance(),
                analytic: analytic_exp_order_variance(n, k)?,
            });
        }
    }
    Ok(HardeningReport { trials, rows })
}

/// Analytic variance at `k = ceil(q n)` for each n.
pub fn quantile_variances(q: f64, n_values: &[usize]) -> Result<Vec<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile {q} outside (0, 1)")));
    }
    n_values
        .iter()
        .map(|&n| analytic_exp_order_variance(n, ((q * n as f64).ceil() as usize).max(1)))
        .collect()
}
