//! Time-varying Poisson demand per class with truncated, cached support.

use rand::Rng;

use crate::error::{Error, Result};

/// Default tail mass dropped when truncating a Poisson support.
pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-9;

/// Poisson demand for one class in one epoch, truncated to `0..=d_max` and
/// renormalised over that support so the simulator and the exact solver see
/// the same law.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDemandDistribution {
    lambda: f64,
    pmf: Vec<f64>,
    tail: Vec<f64>,
    cdf: Vec<f64>,
    /// Mass kept by the truncation before renormalising.
    retained_mass: f64,
}

impl EpochDemandDistribution {
    pub fn poisson(lambda: f64, eps: f64) -> Result<Self> {
        let d_max = truncation_bound(lambda, eps)?;
        let raw: Vec<f64> = (0..=d_max).map(|x| poisson_pmf(lambda, x)).collect();
        let retained_mass: f64 = raw.iter().rev().sum();
        let pmf: Vec<f64> = raw.iter().map(|p| p / retained_mass).collect();

        let mut tail = vec![0.0; d_max + 1];
        let mut acc = 0.0;
        for x in (0..=d_max).rev() {
            acc += pmf[x];
            tail[x] = acc;
        }
        tail[0] = 1.0;

        let mut cdf = Vec::with_capacity(d_max + 1);
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        cdf[d_max] = 1.0;

        Ok(EpochDemandDistribution {
            lambda,
            pmf,
            tail,
            cdf,
            retained_mass,
        })
    }

    /// Point mass at zero.
    pub fn zero() -> Self {
        Self::poisson(0.0, DEFAULT_TRUNCATION_EPS).expect("zero rate is always valid")
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn d_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn retained_mass(&self) -> f64 {
        self.retained_mass
    }

    pub fn pmf(&self, x: usize) -> Result<f64> {
        self.pmf.get(x).copied().ok_or_else(|| {
            Error::invalid(format!("demand {x} outside support 0..={}", self.d_max()))
        })
    }

    /// `P(D >= x)`.
    pub fn tail(&self, x: usize) -> Result<f64> {
        self.tail.get(x).copied().ok_or_else(|| {
            Error::invalid(format!("demand {x} outside support 0..={}", self.d_max()))
        })
    }

    /// `P(D = x)`, zero beyond the support.
    #[inline]
    pub fn prob(&self, x: usize) -> f64 {
        self.pmf.get(x).copied().unwrap_or(0.0)
    }

    /// `P(D >= x)`, zero beyond the support.
    #[inline]
    pub fn tail_or_zero(&self, x: usize) -> f64 {
        self.tail.get(x).copied().unwrap_or(0.0)
    }

    pub fn pmf_slice(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(x, p)| x as f64 * p).sum()
    }

    /// Inverse-CDF lookup for `u` in `[0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.d_max())
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.pmf.len() == 1 {
            // still consume a draw so streams stay aligned across rates
            let _: f64 = rng.gen();
            return 0;
        }
        self.quantile(rng.gen::<f64>())
    }
}

fn poisson_pmf(lambda: f64, x: usize) -> f64 {
    if lambda == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (2..=x).map(|k| (k as f64).ln()).sum();
    (-lambda + x as f64 * lambda.ln() - ln_fact).exp()
}

/// Smallest `d` with `P(D > d) < eps` for `D ~ Poisson(lambda)`.
pub fn truncation_bound(lambda: f64, eps: f64) -> Result<usize> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "demand rate must be finite and nonnegative, got {lambda}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!(
            "truncation eps must lie in (0, 1), got {eps}"
        )));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    // Terms past this limit are far below any usable eps.
    let limit = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as usize;
    let mut pmf = Vec::with_capacity(limit + 1);
    let mut ln_fact = 0.0;
    for x in 0..=limit {
        if x > 1 {
            ln_fact += (x as f64).ln();
        }
        pmf.push((-lambda + x as f64 * lambda.ln() - ln_fact).exp());
    }
    // upper[d] = P(D > d), summed from the far tail inwards
    let mut above = 0.0;
    let mut bound = limit;
    for d in (0..limit).rev() {
        above += pmf[d + 1];
        if above < eps {
            bound = d;
        } else {
            break;
        }
    }
    Ok(bound)
}

/// Per-epoch demand laws for both classes over decision epochs `1..=N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSchedule {
    class1: Vec<EpochDemandDistribution>,
    class2: Vec<EpochDemandDistribution>,
    arrival_shape: Vec<f64>,
    eps: f64,
}

impl DemandSchedule {
    /// Rates `lambda^i_t = daily_total_i * shape_t`.
    pub fn from_daily_totals(
        daily1: f64,
        daily2: f64,
        arrival_shape: &[f64],
        eps: f64,
    ) -> Result<Self> {
        validate_shape(arrival_shape)?;
        let rates1: Vec<f64> = arrival_shape.iter().map(|w| daily1 * w).collect();
        let rates2: Vec<f64> = arrival_shape.iter().map(|w| daily2 * w).collect();
        let mut sched = Self::from_rates(&rates1, &rates2, eps)?;
        sched.arrival_shape = arrival_shape.to_vec();
        Ok(sched)
    }

    /// Explicit per-epoch rates; `rates1[t - 1]` is the class-1 mean at epoch `t`.
    pub fn from_rates(rates1: &[f64], rates2: &[f64], eps: f64) -> Result<Self> {
        if rates1.len() != rates2.len() || rates1.is_empty() {
            return Err(Error::invalid(
                "rate vectors must be nonempty and of equal length",
            ));
        }
        let build = |rates: &[f64]| -> Result<Vec<_>> {
            rates
                .iter()
                .map(|&l| EpochDemandDistribution::poisson(l, eps))
                .collect()
        };
        let total: f64 = rates1.iter().chain(rates2).sum();
        let shape = if total > 0.0 {
            rates1
                .iter()
                .zip(rates2)
                .map(|(a, b)| (a + b) / total)
                .collect()
        } else {
            vec![1.0 / rates1.len() as f64; rates1.len()]
        };
        Ok(DemandSchedule {
            class1: build(rates1)?,
            class2: build(rates2)?,
            arrival_shape: shape,
            eps,
        })
    }

    pub fn zero(num_epochs: usize) -> Self {
        Self::from_rates(
            &vec![0.0; num_epochs],
            &vec![0.0; num_epochs],
            DEFAULT_TRUNCATION_EPS,
        )
        .expect("zero rates are valid")
    }

    pub(crate) fn set_arrival_shape(&mut self, shape: Vec<f64>) -> Result<()> {
        if shape.len() != self.num_epochs() {
            return Err(Error::invalid(
                "arrival shape length does not match the schedule",
            ));
        }
        validate_shape(&shape)?;
        self.arrival_shape = shape;
        Ok(())
    }

    pub fn num_epochs(&self) -> usize {
        self.class1.len()
    }

    pub fn truncation_eps(&self) -> f64 {
        self.eps
    }

    pub fn arrival_shape(&self) -> &[f64] {
        &self.arrival_shape
    }

    /// Demand law of `class` (1 or 2) at decision epoch `t` (1-based).
    pub fn dist(&self, class: usize, t: usize) -> Result<&EpochDemandDistribution> {
        let table = match class {
            1 => &self.class1,
            2 => &self.class2,
            _ => {
                return Err(Error::invalid(format!(
                    "demand class must be 1 or 2, got {class}"
                )))
            }
        };
        if t == 0 || t > table.len() {
            return Err(Error::invalid(format!(
                "epoch {t} outside 1..={}",
                table.len()
            )));
        }
        Ok(&table[t - 1])
    }

    /// Both class laws at epoch `t`; panics outside `1..=N-1`.
    #[inline]
    pub fn pair(&self, t: usize) -> (&EpochDemandDistribution, &EpochDemandDistribution) {
        (&self.class1[t - 1], &self.class2[t - 1])
    }

    pub fn rates(&self, class: usize) -> Vec<f64> {
        let table = if class == 1 {
            &self.class1
        } else {
            &self.class2
        };
        table.iter().map(|d| d.lambda()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, class: usize, t: usize, rng: &mut R) -> Result<usize> {
        Ok(self.dist(class, t)?.sample(rng))
    }

    /// Draws class-1 then class-2 demand for epoch `t`.
    #[inline]
    pub fn sample_pair<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> crate::mdp::Demand {
        let (a, b) = self.pair(t);
        let d1 = a.sample(rng);
        let d2 = b.sample(rng);
        crate::mdp::Demand::new(d1, d2)
    }

    /// Single-class law with rates `lambda^1_t + lambda^2_t`.
    pub fn aggregated(&self) -> Result<Vec<EpochDemandDistribution>> {
        self.class1
            .iter()
            .zip(&self.class2)
            .map(|(a, b)| EpochDemandDistribution::poisson(a.lambda() + b.lambda(), self.eps))
            .collect()
    }
}

fn validate_shape(shape: &[f64]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::invalid("arrival shape must not be empty"));
    }
    if shape.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid(
            "arrival shape weights must be finite and nonnegative",
        ));
    }
    let sum: f64 = shape.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "arrival shape must sum to 1, sums to {sum}"
        )));
    }
    Ok(())
}

/// Unimodal daily arrival curve: lowest at 06:00, a raised-cosine climb to a
/// noon peak, then a slow decline back to 06:00 the next day. Epoch `t`
/// starts at `(t - 1) * epoch_minutes` after midnight. Peak-to-trough ratio is
/// 3. Normalised to sum to 1.
pub fn default_arrival_shape(num_epochs: usize, epoch_minutes: f64) -> Vec<f64> {
    const TROUGH: f64 = 1.0;
    const PEAK: f64 = 3.0;
    let weight = |hour: f64| {
        let h = hour.rem_euclid(24.0);
        let phase = if (6.0..=12.0).contains(&h) {
            (h - 6.0) / 6.0
        } else {
            let since_noon = if h > 12.0 { h - 12.0 } else { h + 12.0 };
            1.0 - since_noon / 18.0
        };
        TROUGH + (PEAK - TROUGH) * 0.5 * (1.0 - (std::f64::consts::PI * phase).cos())
    };
    let raw: Vec<f64> = (0..num_epochs)
        .map(|k| weight(k as f64 * epoch_minutes / 60.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}
