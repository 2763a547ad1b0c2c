//! Exact stationary distributions of finite generators, balance checks, and
//! the product-form oracle.
//!
//! The solver replaces one balance equation with the normalization
//! constraint and runs dense LU with partial pivoting. Spaces above the
//! capacity cap are refused rather than approximated, and irreducibility is
//! verified structurally before solving since user tables may contain zero
//! rates.

use crate::dynamics::{
    enumerate_transitions, Direction, Generator, RateSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, lu_solve, Mat};
use crate::statespace::{Configuration, StateSpace};
use crate::tol;
use serde::{Deserialize, Serialize};

/// Probability vector over a ranked state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "pi")]
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn new(space: &StateSpace, probs: Vec<f64>) -> Result<Distribution> {
        if probs.len() != space.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for a state space of size {}",
                probs.len(),
                space.size()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0))
            || (sum - 1.0).abs() > tol::NORMALIZATION.max(1e-9)
        {
            return Err(Error::Domain(format!(
                "probability vector is not normalized (sum = {sum})"
            )));
        }
        Ok(Distribution {
            l: space.l(),
            n: space.n(),
            probs,
        })
    }

    /// Uniform distribution on the space.
    pub fn uniform(space: &StateSpace) -> Distribution {
        let size = space.size();
        Distribution {
            l: space.l(),
            n: space.n(),
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn get(&self, rank: usize) -> f64 {
        self.probs[rank]
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Pushforward under the cyclic right shift: the returned distribution
    /// gives `self`'s mass of `shift_left(eta)` to each `eta`.
    pub fn shift_pushforward(&self, space: &StateSpace) -> Result<Distribution> {
        let mut probs = vec![0.0; self.probs.len()];
        for (i, p) in probs.iter_mut().enumerate() {
            let pre = space.unrank(i).shift_left();
            *p = self.probs[space.rank(&pre)?];
        }
        Ok(Distribution {
            l: self.l,
            n: self.n,
            probs,
        })
    }
}

/// Stationary distribution of an irreducible generator, with the default
/// capacity cap.
pub fn stationary(space: &StateSpace, gen: &Generator) -> Result<Distribution> {
    stationary_with_capacity(space, gen, tol::DEFAULT_CAPACITY)
}

/// Stationary distribution with an explicit capacity cap.
pub fn stationary_with_capacity(
    space: &StateSpace,
    gen: &Generator,
    cap: usize,
) -> Result<Distribution> {
    let size = gen.size();
    if size != space.size() {
        return Err(Error::DimensionMismatch(
            "generator size does not match state space".into(),
        ));
    }
    if size > cap {
        return Err(Error::Capacity { size, cap });
    }
    if size == 1 {
        return Ok(Distribution {
            l: space.l(),
            n: space.n(),
            probs: vec![1.0],
        });
    }
    let components = gen.strongly_connected_components();
    if components != 1 {
        return Err(Error::Reducible { components });
    }

    // Solve pi Q = 0 as Q^T pi = 0, replacing row 0 of Q^T with the
    // normalization sum(pi) = 1.
    let mut a = Mat::zeros(size, size);
    for i in 0..size {
        for &(j, r) in gen.row(i) {
            if j != 0 {
                a.add(j, i, r);
            }
        }
        if i != 0 {
            a.add(i, i, gen.diagonal(i));
        }
    }
    for i in 0..size {
        a.set(0, i, 1.0);
    }
    let mut b = vec![0.0; size];
    b[0] = 1.0;
    let mut pi = lu_solve(&mut a, &b)?;

    // Renormalize and verify the master equation residual.
    let sum: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= sum;
    }
    let residual = gen
        .apply_left(&pi)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let scale = gen.max_rate().max(f64::MIN_POSITIVE);
    if residual > tol::STATIONARY_RESIDUAL * scale {
        return Err(Error::SolveFailed(format!(
            "stationarity residual {residual:.3e} exceeds {:.3e}",
            tol::STATIONARY_RESIDUAL * scale
        )));
    }
    if pi.iter().any(|&p| !(p.is_finite() && p > -1e-12)) {
        return Err(Error::SolveFailed("negative stationary mass".into()));
    }
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    Ok(Distribution {
        l: space.l(),
        n: space.n(),
        probs: pi,
    })
}

/// Worst master-equation violation of `sigma`: `max_eta |inflow - outflow|`.
pub fn balance_residual(sigma: &Distribution, gen: &Generator) -> Result<f64> {
    if sigma.probs.len() != gen.size() {
        return Err(Error::DimensionMismatch(
            "distribution length does not match generator".into(),
        ));
    }
    Ok(gen
        .apply_left(&sigma.probs)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Outcome of a per-transition balance check.
#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub holds: bool,
    /// Largest |forward - backward| probability current over all checked pairs.
    pub worst_violation: f64,
    /// Configuration rank, departure and arrival site of the worst pair.
    pub witness: Option<(usize, usize, usize)>,
}

/// Detailed balance: every transition's stationary current must equal the
/// current of the exact reverse transition.
pub fn check_detailed_balance(
    pi: &Distribution,
    spec: &RateSpec,
    space: &StateSpace,
) -> Result<BalanceReport> {
    let mut worst = 0.0f64;
    let mut witness = None;
    for i in 0..space.size() {
        let cfg = space.unrank(i);
        let p = pi.get(i);
        for t in enumerate_transitions(&cfg, spec)? {
            let forward = p * t.rate;
            // Reverse hop: the same particle moves back in the opposite
            // direction; the emptiness constraint is met by construction.
            let back_rate_base =
                spec.x[t.from - 1] * spec.u.get(t.target.occupation(t.to), t.target.occupation(t.from))?;
            let back_rate = match t.direction {
                Direction::Right => spec.q * back_rate_base,
                Direction::Left => back_rate_base,
            };
            let backward = pi.get(space.rank(&t.target)?) * back_rate;
            let diff = (forward - backward).abs();
            if diff > worst {
                worst = diff;
                witness = Some((i, t.from, t.to));
            }
        }
    }
    Ok(BalanceReport {
        holds: worst < tol::BALANCE_CHECK,
        worst_violation: worst,
        witness,
    })
}

/// Residual of the totally asymmetric per-site pairing at (`cfg`, `site`):
/// the unique incoming transition whose particle departs from `site` against
/// the unique outgoing transition whose particle arrives at `site`.
///
/// Returns `None` when no particle can pass through the site (fewer than
/// one occupied site besides `site`).
pub fn pairwise_site_residual(
    pi: &Distribution,
    spec: &RateSpec,
    space: &StateSpace,
    cfg: &Configuration,
    site: usize,
) -> Result<Option<f64>> {
    let occupied = cfg.occupied_sites();
    if occupied.is_empty() || occupied == [site] {
        return Ok(None);
    }
    // Outgoing: departure is the closest occupied site strictly left of `site`.
    let mut k = cfg.prev_site(site);
    while cfg.occupation(k) == 0 {
        k = cfg.prev_site(k);
    }
    let out_rate = spec.x[site - 1] * spec.u.get(cfg.occupation(k), cfg.occupation(site))?;
    let out_current = pi.get(space.rank(cfg)?) * out_rate;

    // Incoming: the particle left `site` for the closest occupied site
    // strictly to its right.
    let mut r = cfg.next_site(site);
    while cfg.occupation(r) == 0 {
        r = cfg.next_site(r);
    }
    let source = cfg.apply_move(r, site)?;
    let in_rate = spec.x[r - 1] * spec.u.get(cfg.occupation(site) + 1, cfg.occupation(r) - 1)?;
    let in_current = pi.get(space.rank(&source)?) * in_rate;

    Ok(Some(in_current - out_current))
}

/// Pairwise balance for the totally asymmetric process: for every
/// configuration and site, the matched incoming and outgoing currents of
/// [`pairwise_site_residual`] must agree.
pub fn check_pairwise_balance_talrmp(
    pi: &Distribution,
    spec: &RateSpec,
    space: &StateSpace,
) -> Result<BalanceReport> {
    if spec.q != 0.0 {
        return Err(Error::WrongVariant { q: spec.q });
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    for i in 0..space.size() {
        let cfg = space.unrank(i);
        for site in 1..=space.l() {
            if let Some(diff) = pairwise_site_residual(pi, spec, space, &cfg, site)? {
                if diff.abs() > worst {
                    worst = diff.abs();
                    witness = Some((i, site, site));
                }
            }
        }
    }
    Ok(BalanceReport {
        holds: worst < tol::BALANCE_CHECK,
        worst_violation: worst,
        witness,
    })
}

/// Product-form fit of a strictly positive distribution.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    /// True when the best per-site product fit reproduces the distribution.
    pub product: bool,
    /// Largest per-configuration residual of `log pi` against the fit.
    pub max_log_residual: f64,
    /// Numerical rank of the fitted design matrix.
    pub fit_rank: usize,
    /// Fitted one-point values `g_l(n)`, normalized so `g_l(0) = 1`.
    pub fitted: Vec<Vec<f64>>,
}

/// Least-squares fit of `log pi(eta) = sum_l log g_l(eta_l) - log Z` over
/// the whole space; PRODUCT iff the worst residual is below the pinned
/// tolerance.
pub fn product_form_oracle(pi: &Distribution, space: &StateSpace) -> Result<OracleReport> {
    if pi.probs.len() != space.size() {
        return Err(Error::DimensionMismatch(
            "distribution length does not match state space".into(),
        ));
    }
    if pi.probs.iter().any(|&p| p <= 0.0) {
        return Err(Error::Domain(
            "product-form fit requires strictly positive probabilities".into(),
        ));
    }
    let l = space.l();
    let n = space.n();
    let size = space.size();
    let levels = n + 1;
    // Unknowns: log g_l(n) for each site and occupancy, plus -log Z.
    let cols = l * levels + 1;
    let mut a = Mat::zeros(size, cols);
    let mut b = vec![0.0; size];
    for i in 0..size {
        let cfg = space.unrank(i);
        for site in 1..=l {
            a.add(i, (site - 1) * levels + cfg.occupation(site), 1.0);
        }
        a.set(i, cols - 1, 1.0);
        b[i] = pi.get(i).ln();
    }
    let fit = least_squares(&a, &b)?;
    let max_log_residual = fit.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    let fitted = (0..l)
        .map(|site| {
            let base = fit.x[site * levels];
            (0..levels)
                .map(|k| (fit.x[site * levels + k] - base).exp())
                .collect()
        })
        .collect();

    Ok(OracleReport {
        product: max_log_residual < tol::PRODUCT_FIT,
        max_log_residual,
        fit_rank: fit.rank,
        fitted,
    })
}
