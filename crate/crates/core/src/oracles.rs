//! Label-generating solvers and objective evaluators for the three
//! resource-allocation tasks: subcarrier power allocation (water-filling),
//! interference coordination (WMMSE) and probabilistic caching
//! (water-filling on a concave success surrogate).
//!
//! All functions are pure and permutation equivariant in the object order.

use crate::error::{Error, Result};

/// Default WMMSE stopping tolerance on the amplitude change.
pub const WMMSE_TOL: f64 = 1e-5;
/// Default WMMSE iteration cap.
pub const WMMSE_MAX_ITER: usize = 500;
/// Default concavity constant of the caching success surrogate.
pub const DEFAULT_KAPPA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocInstance {
    pub gains: Vec<f64>,
    pub budget: f64,
    pub noise: f64,
}

impl PowerAllocInstance {
    pub fn new(gains: Vec<f64>, budget: f64, noise: f64) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidInstance("no subcarriers".into()));
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidInstance(format!("non-positive gain {g}")));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-positive budget {budget}")));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-positive noise {noise}")));
        }
        Ok(Self {
            gains,
            budget,
            noise,
        })
    }
}

/// Sum-rate maximizing power allocation under a total power budget.
///
/// Exact active-set form: the inverse SNR costs `noise / g` are sorted and the
/// largest prefix whose water level `mu` clears its worst member is kept.
pub fn waterfill_power(inst: &PowerAllocInstance) -> Vec<f64> {
    let costs: Vec<f64> = inst.gains.iter().map(|g| inst.noise / g).collect();
    let mut sorted = costs.clone();
    sorted.sort_by(f64::total_cmp);

    let mut prefix = 0.0;
    let mut level = inst.budget + sorted[0];
    for (k, cost) in sorted.iter().enumerate() {
        prefix += cost;
        let candidate = (inst.budget + prefix) / (k + 1) as f64;
        if candidate <= *cost {
            break;
        }
        level = candidate;
    }
    costs.iter().map(|c| (level - c).max(0.0)).collect()
}

/// `sum_i log2(1 + p_i g_i / noise)`.
pub fn sum_rate(gains: &[f64], powers: &[f64], noise: f64) -> Result<f64> {
    if gains.len() != powers.len() {
        return Err(Error::Shape(format!(
            "{} gains vs {} powers",
            gains.len(),
            powers.len()
        )));
    }
    Ok(gains
        .iter()
        .zip(powers)
        .map(|(g, p)| (p * g / noise).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2)
}

/// K-link Gaussian interference channel. `gains[k * K + j]` is the power gain
/// from transmitter `j` to receiver `k`; the diagonal holds the direct links.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceInstance {
    pub k: usize,
    pub gains: Vec<f64>,
    pub pmax: f64,
    pub noise: f64,
    pub weights: Vec<f64>,
}

impl InterferenceInstance {
    pub fn new(k: usize, gains: Vec<f64>, pmax: f64, noise: f64) -> Result<Self> {
        Self::with_weights(k, gains, pmax, noise, vec![1.0; k])
    }

    pub fn with_weights(
        k: usize,
        gains: Vec<f64>,
        pmax: f64,
        noise: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 || gains.len() != k * k {
            return Err(Error::InvalidInstance(format!(
                "gain matrix of {} entries is not {k}x{k}",
                gains.len()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let g = gains[a * k + b];
                let ok = if a == b { g > 0.0 } else { g >= 0.0 };
                if !ok || !g.is_finite() {
                    return Err(Error::InvalidInstance(format!("gain ({a},{b}) = {g}")));
                }
            }
        }
        if !(pmax > 0.0 && noise > 0.0) {
            return Err(Error::InvalidInstance("pmax and noise must be positive".into()));
        }
        if weights.len() != k || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInstance("weights must be K positive reals".into()));
        }
        Ok(Self {
            k,
            gains,
            pmax,
            noise,
            weights,
        })
    }

    #[inline]
    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.gains[rx * self.k + tx]
    }
}

/// Outcome of a WMMSE solve.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseSolution {
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One block-coordinate round (receivers, weights, transmitters) on the
/// amplitude vector `v`; returns the clipped next amplitudes.
pub fn wmmse_update(inst: &InterferenceInstance, v: &[f64]) -> Vec<f64> {
    let k = inst.k;
    let vmax = inst.pmax.sqrt();
    let mut u = vec![0.0; k];
    let mut w = vec![0.0; k];
    for rx in 0..k {
        let direct = inst.gain(rx, rx).sqrt();
        let received: f64 = (0..k).map(|tx| inst.gain(rx, tx) * v[tx] * v[tx]).sum();
        u[rx] = direct * v[rx] / (inst.noise + received);
        let mse = 1.0 - u[rx] * direct * v[rx];
        w[rx] = 1.0 / mse;
    }
    (0..k)
        .map(|tx| {
            let num = inst.weights[tx] * w[tx] * u[tx] * inst.gain(tx, tx).sqrt();
            let den: f64 = (0..k)
                .map(|rx| inst.weights[rx] * w[rx] * u[rx] * u[rx] * inst.gain(rx, tx))
                .sum();
            if den > 0.0 {
                (num / den).clamp(0.0, vmax)
            } else {
                0.0
            }
        })
        .collect()
}

/// `sum_k w_k log2(1 + SINR_k)`; no bound check.
fn weighted_rate(inst: &InterferenceInstance, powers: &[f64]) -> f64 {
    let k = inst.k;
    (0..k)
        .map(|rx| {
            let interference: f64 = (0..k)
                .filter(|tx| *tx != rx)
                .map(|tx| inst.gain(rx, tx) * powers[tx])
                .sum();
            let sinr = inst.gain(rx, rx) * powers[rx] / (inst.noise + interference);
            inst.weights[rx] * sinr.ln_1p()
        })
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Single-start WMMSE from the given amplitudes.
///
/// Stops when the largest amplitude change drops below `tol`. If `max_iter`
/// rounds pass without that, the iterate with the highest weighted sum rate
/// is returned with `converged = false`.
pub fn wmmse_from(
    inst: &InterferenceInstance,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<WmmseSolution> {
    if init.len() != inst.k {
        return Err(Error::Shape(format!(
            "{} initial amplitudes for {} links",
            init.len(),
            inst.k
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Domain("wmmse needs tol > 0 and max_iter >= 1".into()));
    }
    let vmax = inst.pmax.sqrt();
    let mut v: Vec<f64> = init.iter().map(|x| x.clamp(0.0, vmax)).collect();
    let mut best = (f64::NEG_INFINITY, v.clone());
    for iter in 1..=max_iter {
        let next = wmmse_update(inst, &v);
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if change < tol {
            return Ok(WmmseSolution {
                powers: v.iter().map(|x| x * x).collect(),
                iterations: iter,
                converged: true,
            });
        }
        let powers: Vec<f64> = v.iter().map(|x| x * x).collect();
        let rate = weighted_rate(inst, &powers);
        if rate > best.0 {
            best = (rate, v.clone());
        }
    }
    Ok(WmmseSolution {
        powers: best.1.iter().map(|x| x * x).collect(),
        iterations: max_iter,
        converged: false,
    })
}

/// WMMSE power control.
///
/// Runs the iteration from full power on every link and from each
/// single-link-on start, returning the stationary point with the highest
/// weighted sum rate. Ties keep the earliest start (full power first).
pub fn wmmse(inst: &InterferenceInstance, tol: f64, max_iter: usize) -> Result<WmmseSolution> {
    let vmax = inst.pmax.sqrt();
    let mut starts = vec![vec![vmax; inst.k]];
    if inst.k > 1 {
        for on in 0..inst.k {
            let mut v = vec![0.0; inst.k];
            v[on] = vmax;
            starts.push(v);
        }
    }
    let mut best: Option<(f64, WmmseSolution)> = None;
    for start in &starts {
        let sol = wmmse_from(inst, start, tol, max_iter)?;
        let rate = weighted_rate(inst, &sol.powers);
        if best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, sol));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Sum rate of the interference channel; powers must lie in `[0, pmax]`.
pub fn interference_sum_rate(inst: &InterferenceInstance, powers: &[f64]) -> Result<f64> {
    if powers.len() != inst.k {
        return Err(Error::Shape(format!(
            "{} powers for {} links",
            powers.len(),
            inst.k
        )));
    }
    let slack = 1e-12 * inst.pmax;
    if let Some(p) = powers
        .iter()
        .find(|p| !(**p >= -slack && **p <= inst.pmax + slack))
    {
        return Err(Error::Domain(format!("power {p} outside [0, {}]", inst.pmax)));
    }
    Ok(weighted_rate(inst, powers))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachingInstance {
    pub popularity: Vec<f64>,
    pub cache_budget: f64,
    pub kappa: f64,
}

impl CachingInstance {
    pub fn new(popularity: Vec<f64>, cache_budget: f64, kappa: f64) -> Result<Self> {
        let files = popularity.len();
        if files == 0 {
            return Err(Error::InvalidInstance("no files".into()));
        }
        if popularity.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidInstance("negative popularity".into()));
        }
        let total: f64 = popularity.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInstance(format!("popularity sums to {total}")));
        }
        if !(cache_budget > 0.0 && cache_budget <= files as f64) {
            return Err(Error::InvalidInstance(format!(
                "cache budget {cache_budget} outside (0, {files}]"
            )));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInstance(format!("kappa {kappa}")));
        }
        Ok(Self {
            popularity,
            cache_budget,
            kappa,
        })
    }
}

/// Caching probabilities maximizing the success surrogate under
/// `sum q = budget`, `0 <= q <= 1`.
///
/// Bisection runs on `ln(nu)`; the bracket runs from "every popular file
/// saturated" to "nothing cached".
pub fn cache_waterfill(inst: &CachingInstance) -> Vec<f64> {
    let files = inst.popularity.len();
    let budget = inst.cache_budget;
    if budget >= files as f64 {
        return vec![1.0; files];
    }
    let kappa = inst.kappa;
    let positive = inst.popularity.iter().filter(|p| **p > 0.0).count();
    if (positive as f64) <= budget {
        // Every requested file is cached surely; the rest of the budget has no
        // effect on the objective and is spread over the unrequested files.
        let spare = (budget - positive as f64) / (files - positive) as f64;
        return inst
            .popularity
            .iter()
            .map(|p| if *p > 0.0 { 1.0 } else { spare })
            .collect();
    }

    let alloc = |ln_nu: f64| -> Vec<f64> {
        inst.popularity
            .iter()
            .map(|p| {
                if *p > 0.0 {
                    (((kappa * p).ln() - ln_nu) / kappa).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let max_pop = inst.popularity.iter().cloned().fold(0.0, f64::max);
    let min_pop = inst
        .popularity
        .iter()
        .cloned()
        .filter(|p| *p > 0.0)
        .fold(f64::INFINITY, f64::min);
    // sum(alloc(hi)) = 0 < budget, sum(alloc(lo)) = positive > budget
    let mut hi = (kappa * max_pop).ln();
    let mut lo = (kappa * min_pop).ln() - kappa;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total: f64 = alloc(mid).iter().sum();
        if (total - budget).abs() <= 1e-13 * budget.max(1.0) {
            return alloc(mid);
        }
        if total > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    alloc(0.5 * (lo + hi))
}

/// Success surrogate `sum_f pop_f (1 - exp(-kappa q_f))`.
pub fn sop(inst: &CachingInstance, q: &[f64]) -> Result<f64> {
    if q.len() != inst.popularity.len() {
        return Err(Error::Shape(format!(
            "{} probabilities for {} files",
            q.len(),
            inst.popularity.len()
        )));
    }
    if let Some(x) = q.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
        return Err(Error::Domain(format!("caching probability {x} outside [0, 1]")));
    }
    Ok(inst
        .popularity
        .iter()
        .zip(q)
        .map(|(p, x)| -p * (-inst.kappa * x).exp_m1())
        .sum())
}
