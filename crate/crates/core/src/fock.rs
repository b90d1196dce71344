//! Truncated Fock-space populations of one motional mode, and the Rabi
//! frequencies coupling neighbouring levels through the Raman sidebands.

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, Error, Result};

/// Largest probability mass a truncation may discard.
pub const TAIL_LIMIT: f64 = 1e-9;
/// Tolerance on Σ P_n = 1.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Occupation probabilities P_0..=P_{n_max} of a single motional mode.
///
/// `tail_mass` records the probability known to have been discarded by the
/// truncation (beyond `n_max`) before renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDistribution {
    probabilities: Vec<f64>,
    tail_mass: f64,
}

impl PopulationDistribution {
    /// Validates an explicit list of populations, `P_0` first.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::Contract(format!(
                "distribution needs n_max >= 1, got {} level(s)",
                probabilities.len()
            )));
        }
        if let Some((n, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && p.is_finite()))
        {
            return Err(Error::Contract(format!("P_{n} = {p} is not a probability")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Contract(format!(
                "populations sum to {total}, not 1"
            )));
        }
        Ok(Self {
            probabilities,
            tail_mass: 0.0,
        })
    }

    /// Renormalizes `raw` and records `tail_mass`, failing above [`TAIL_LIMIT`].
    pub(crate) fn renormalized(mut raw: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let n_max = raw.len().saturating_sub(1);
        if tail_mass > TAIL_LIMIT {
            return Err(Error::Truncation {
                tail: tail_mass,
                limit: TAIL_LIMIT,
                n_max,
            });
        }
        for p in raw.iter_mut() {
            if *p < 0.0 {
                // integrator round-off only
                *p = 0.0;
            }
        }
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|p| *p /= total);
        let mut dist = Self::from_probabilities(raw)?;
        dist.tail_mass = tail_mass;
        Ok(dist)
    }

    /// The number state |n⟩ inside a window of `n_max + 1` levels.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max || n_max < 1 {
            return Err(Error::Contract(format!(
                "level {n} does not fit a window with n_max = {n_max}"
            )));
        }
        let mut p = vec![0.0; n_max + 1];
        p[n] = 1.0;
        Self::from_probabilities(p)
    }

    pub fn ground(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// P_n, zero outside the window.
    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    /// Mean occupation Σ n·P_n.
    pub fn mean(&self) -> f64 {
        mean_occupation(self)
    }

    pub fn ground_state_fraction(&self) -> f64 {
        self.probabilities[0]
    }

    /// Pads the window with empty levels up to `n_max`.
    pub fn extended(&self, n_max: usize) -> Self {
        let mut p = self.probabilities.clone();
        if n_max > self.n_max() {
            p.resize(n_max + 1, 0.0);
        }
        Self {
            probabilities: p,
            tail_mass: self.tail_mass,
        }
    }

    /// Highest level carrying non-zero population.
    pub fn support_top(&self) -> usize {
        self.probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }
}

/// Default truncation for a thermal state of mean `nbar`: the larger of
/// `max(20, ⌈10·n̄ + 10⌉)` and the smallest window whose thermal tail stays
/// below [`TAIL_LIMIT`].
pub fn default_n_max(nbar: f64) -> usize {
    let base = 20usize.max((10.0 * nbar + 10.0).ceil() as usize);
    base.max(n_max_for_tail(nbar, TAIL_LIMIT))
}

/// Smallest `n_max` whose thermal tail at mean `nbar` is below `tail`.
pub fn n_max_for_tail(nbar: f64, tail: f64) -> usize {
    if nbar <= 0.0 {
        return 1;
    }
    // tail beyond N is q^(N+1)
    let q = nbar / (1.0 + nbar);
    ((tail.ln() / q.ln()).ceil() as usize).max(1)
}

/// Thermal tail mass Σ_{n > n_max} P_n.
pub fn thermal_tail_mass(nbar: f64, n_max: usize) -> f64 {
    let q = nbar / (1.0 + nbar);
    q.powi(n_max as i32 + 1)
}

/// Geometric distribution P_n = n̄ⁿ/(1+n̄)ⁿ⁺¹ truncated at `n_max` and
/// renormalized. Fails if the discarded tail exceeds [`TAIL_LIMIT`].
pub fn thermal_distribution(nbar: f64, n_max: usize) -> Result<PopulationDistribution> {
    let nbar = non_negative("nbar", nbar)?;
    if n_max < 1 {
        return Err(Error::Contract("n_max must be >= 1".into()));
    }
    let q = nbar / (1.0 + nbar);
    let mut p = Vec::with_capacity(n_max + 1);
    let mut term = 1.0 / (1.0 + nbar);
    for _ in 0..=n_max {
        p.push(term);
        term *= q;
    }
    PopulationDistribution::renormalized(p, thermal_tail_mass(nbar, n_max))
}

/// [`thermal_distribution`] with the window chosen by [`default_n_max`].
pub fn thermal_auto(nbar: f64) -> Result<PopulationDistribution> {
    let nbar = non_negative("nbar", nbar)?;
    thermal_distribution(nbar, default_n_max(nbar))
}

pub fn mean_occupation(dist: &PopulationDistribution) -> f64 {
    dist.probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

pub fn ground_state_fraction(dist: &PopulationDistribution) -> f64 {
    dist.ground_state_fraction()
}

/// Motional order of a Raman transition: the drive takes |n⟩ to |n − s⟩.
///
/// `s = +1` is the first upper sideband (n → n−1, blue of the carrier in
/// beatnote), `s = −1` the first lower sideband (n → n+1), `s = 0` the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SidebandOrder(i8);

impl SidebandOrder {
    pub const CARRIER: Self = Self(0);
    pub const UPPER: Self = Self(1);
    pub const LOWER: Self = Self(-1);
    pub const MAX_ORDER: i8 = 2;

    pub fn new(s: i8) -> Result<Self> {
        if s.abs() > Self::MAX_ORDER {
            return Err(Error::Domain {
                name: "sideband order",
                value: s as f64,
                expected: "|s| <= 2",
            });
        }
        Ok(Self(s))
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// Level reached from `n`, or `None` below the ground state.
    pub fn target(self, n: usize) -> Option<usize> {
        let m = n as i64 - self.0 as i64;
        (m >= 0).then_some(m as usize)
    }
}

impl TryFrom<i8> for SidebandOrder {
    type Error = Error;
    fn try_from(s: i8) -> Result<Self> {
        Self::new(s)
    }
}

impl From<SidebandOrder> for i8 {
    fn from(s: SidebandOrder) -> i8 {
        s.0
    }
}

/// How the n-dependence of the sideband Rabi frequency is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Leading order in η: Ω₀, ηΩ₀√n, ηΩ₀√(n+1), …
    #[default]
    LambDicke,
    /// Full Debye-Waller/Laguerre matrix element.
    Exact,
}

/// Validated Raman sideband drive: Lamb-Dicke parameter, carrier Rabi
/// frequency and coupling model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandDrive {
    pub eta: f64,
    pub omega0: f64,
    pub mode: CouplingMode,
}

impl SidebandDrive {
    pub fn new(eta: f64, omega0: f64, mode: CouplingMode) -> Result<Self> {
        Ok(Self {
            eta: non_negative("eta", eta)?,
            omega0: non_negative("omega0", omega0)?,
            mode,
        })
    }

    pub fn lamb_dicke(eta: f64, omega0: f64) -> Result<Self> {
        Self::new(eta, omega0, CouplingMode::LambDicke)
    }

    /// Rabi frequency of |n⟩ → |n − s⟩; zero when the target is below |0⟩.
    pub fn coupling(&self, n: usize, order: SidebandOrder) -> f64 {
        let Some(m) = order.target(n) else {
            return 0.0;
        };
        let (lo, hi) = if n < m { (n, m) } else { (m, n) };
        let k = order.value().unsigned_abs() as i32;
        match self.mode {
            CouplingMode::LambDicke => {
                // η^k·√(n_>!/n_<!)/k!
                let ratio: f64 = (lo + 1..=hi).map(|j| j as f64).product();
                let fact: f64 = (1..=k).map(f64::from).product();
                self.omega0 * self.eta.powi(k) * ratio.sqrt() / fact
            }
            CouplingMode::Exact => {
                let x = self.eta * self.eta;
                let ratio: f64 = (lo + 1..=hi).map(|j| 1.0 / j as f64).product();
                let element = (-x / 2.0).exp()
                    * self.eta.powi(k)
                    * ratio.sqrt()
                    * assoc_laguerre(lo, k as u32, x);
                self.omega0 * element.abs()
            }
        }
    }

    /// Rabi frequency of the first-upper-sideband transition |n⟩ → |n−1⟩.
    pub fn upper(&self, n: usize) -> f64 {
        self.coupling(n, SidebandOrder::UPPER)
    }

    pub fn lower(&self, n: usize) -> f64 {
        self.coupling(n, SidebandOrder::LOWER)
    }

    /// Duration of a π pulse on the upper sideband of level `n` (n ≥ 1).
    pub fn pi_time(&self, n: usize) -> Result<f64> {
        let w = self.upper(n.max(1));
        if w > 0.0 {
            Ok(std::f64::consts::PI / w)
        } else {
            Err(Error::Domain {
                name: "sideband Rabi frequency",
                value: w,
                expected: "> 0",
            })
        }
    }
}

/// Rabi frequency of |n⟩ → |n − s⟩ under `mode`, rad/s.
pub fn rabi_coupling(
    n: usize,
    order: SidebandOrder,
    eta: f64,
    omega0: f64,
    mode: CouplingMode,
) -> Result<f64> {
    Ok(SidebandDrive::new(eta, omega0, mode)?.coupling(n, order))
}

/// Generalized Laguerre polynomial L_n^α(x) by upward three-term recurrence.
pub fn assoc_laguerre(n: usize, alpha: u32, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut curr = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * curr - (k + a) * prev) / (k + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}
