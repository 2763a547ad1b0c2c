//! The discrete Hammersley process: the totally asymmetric long-range
//! process with hop rate `1/(n+1)` into a site holding n particles.
//!
//! Its stationary weights are multinomial, the partition function is
//! `(x_1 + ... + x_L)^N`, site marginals are binomial, and the edge current
//! has a closed form tied to a bijection between edge-crossing transitions
//! and the (N+1)-particle configurations with at least two occupied sites.
//! All quantities are computed in log space and exponentiated at the end,
//! since `(sum x)^N` overflows quickly.

use crate::dynamics::{enumerate_transitions, RateSpec, RateTable};
use crate::error::{Error, Result};
use crate::exact::Distribution;
use crate::statespace::{Configuration, StateSpace};
use serde::Serialize;

/// The discrete Hammersley system: ring size, particle count, and positive
/// site parameters.
#[derive(Clone, Debug, Serialize)]
pub struct HadSystem {
    pub l: usize,
    pub n: usize,
    pub x: Vec<f64>,
}

/// The Hammersley rate table `u(m, n) = 1/(n+1)` for m >= 1.
pub fn had_rate_table(n_max: usize) -> RateTable {
    RateTable::from_fn(n_max, |_, n| 1.0 / (n as f64 + 1.0)).expect("valid by construction")
}

impl HadSystem {
    pub fn new(l: usize, n: usize, x: Vec<f64>) -> Result<HadSystem> {
        if l == 0 {
            return Err(Error::InvalidLattice);
        }
        if x.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "{} site parameters for {l} sites",
                x.len()
            )));
        }
        if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain("site parameters must be positive".into()));
        }
        Ok(HadSystem { l, n, x })
    }

    /// The process as a rate spec (totally asymmetric).
    pub fn rate_spec(&self) -> RateSpec {
        RateSpec::new(had_rate_table(self.n), 0.0, self.x.clone()).expect("valid by construction")
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::enumerate(self.l, self.n)
    }

    fn sum_x(&self) -> f64 {
        self.x.iter().sum()
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Unnormalized stationary weight `N! prod_l x_l^{eta_l} / eta_l!`.
pub fn had_weight(eta: &Configuration, x: &[f64]) -> Result<f64> {
    Ok(log_had_weight(eta, x)?.exp())
}

fn log_had_weight(eta: &Configuration, x: &[f64]) -> Result<f64> {
    if eta.len() != x.len() {
        return Err(Error::DimensionMismatch(
            "configuration and site parameters differ in length".into(),
        ));
    }
    let mut lw = ln_factorial(eta.total());
    for s in 1..=eta.len() {
        let m = eta.occupation(s);
        lw += m as f64 * x[s - 1].ln() - ln_factorial(m);
    }
    Ok(lw)
}

/// Stationary probability `weight / (sum x)^N`.
pub fn had_probability(eta: &Configuration, x: &[f64]) -> Result<f64> {
    let sum_x: f64 = x.iter().sum();
    let n = eta.total();
    Ok((log_had_weight(eta, x)? - n as f64 * sum_x.ln()).exp())
}

/// The full stationary distribution in rank order.
pub fn had_distribution(sys: &HadSystem) -> Result<Distribution> {
    let space = sys.state_space()?;
    let probs = space
        .configurations()
        .map(|cfg| had_probability(&cfg, &sys.x))
        .collect::<Result<Vec<f64>>>()?;
    Distribution::new(&space, probs)
}

/// Stationary law of the occupation of one site: binomial with parameters
/// N and `x_site / sum x`.
pub fn site_marginal(sys: &HadSystem, site: usize) -> Result<Vec<f64>> {
    if site < 1 || site > sys.l {
        return Err(Error::SiteOutOfRange { site, l: sys.l });
    }
    let p = sys.x[site - 1] / sys.sum_x();
    let rest: f64 = sys
        .x
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != site - 1)
        .map(|(_, &v)| v)
        .sum();
    let q = rest / sys.sum_x();
    let n = sys.n;
    let ln_n_fact = ln_factorial(n);
    Ok((0..=n)
        .map(|m| {
            if sys.l == 1 {
                return if m == n { 1.0 } else { 0.0 };
            }
            let ln_binom = ln_n_fact - ln_factorial(m) - ln_factorial(n - m);
            (ln_binom + m as f64 * p.ln() + (n - m) as f64 * q.ln()).exp()
        })
        .collect())
}

/// Closed-form stationary edge current:
/// `(sum x / (N+1)) * (1 - sum_l x_l^{N+1} / (sum x)^{N+1})`.
///
/// The N = 0 system has no transitions, so its current is 0 rather than
/// the bare formula value.
pub fn edge_current_formula(sys: &HadSystem) -> Result<f64> {
    if sys.l < 2 {
        return Err(Error::NoEdge);
    }
    if sys.n == 0 {
        return Ok(0.0);
    }
    let sum_x = sys.sum_x();
    let ln_sum = sum_x.ln();
    let exponent = (sys.n + 1) as f64;
    // sum_l (x_l / sum x)^{N+1}, evaluated in log space.
    let pile_mass: f64 = sys
        .x
        .iter()
        .map(|&v| (exponent * (v.ln() - ln_sum)).exp())
        .sum();
    Ok(sum_x / exponent * (1.0 - pile_mass))
}

/// Check of the bijection between transitions crossing the edge (L, 1) and
/// the (N+1)-particle configurations with at least two occupied sites,
/// including the per-transition current identity
/// `pi(eta) x_l / (eta_l + 1) = (sum x / (N+1)) pi(eta^l)`.
#[derive(Clone, Debug, Serialize)]
pub struct BijectionReport {
    pub crossing_transitions: usize,
    pub multi_site_targets: usize,
    pub injective: bool,
    pub surjective: bool,
    pub max_current_identity_rel_err: f64,
    pub ok: bool,
}

pub fn edge_transition_bijection(sys: &HadSystem) -> Result<BijectionReport> {
    if sys.l < 2 {
        return Err(Error::NoEdge);
    }
    let space = sys.state_space()?;
    let spec = sys.rate_spec();
    let bigger = StateSpace::enumerate(sys.l, sys.n + 1)?;
    let sum_x = sys.sum_x();

    let mut seen = vec![false; bigger.size()];
    let mut crossing = 0usize;
    let mut injective = true;
    let mut max_rel = 0.0f64;

    for i in 0..space.size() {
        let cfg = space.unrank(i);
        for t in enumerate_transitions(&cfg, &spec)? {
            // A rightward hop crosses the (L, 1) edge exactly when it wraps.
            if t.to >= t.from {
                continue;
            }
            crossing += 1;
            let image = cfg.add_particle(t.to)?;
            let rank = bigger.rank(&image)?;
            if seen[rank] {
                injective = false;
            }
            seen[rank] = true;

            let lhs = had_probability(&cfg, &sys.x)? * t.rate;
            let rhs = sum_x / (sys.n + 1) as f64 * had_probability(&image, &sys.x)?;
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            max_rel = max_rel.max(rel);
        }
    }

    // The image set must be exactly the multi-site configurations.
    let mut multi = 0usize;
    let mut surjective = true;
    for j in 0..bigger.size() {
        let cfg = bigger.unrank(j);
        let is_multi = cfg.occupied_sites().len() >= 2;
        if is_multi {
            multi += 1;
        }
        if is_multi != seen[j] {
            surjective = false;
        }
    }

    let ok = injective && surjective && crossing == multi && max_rel < 1e-12;
    Ok(BijectionReport {
        crossing_transitions: crossing,
        multi_site_targets: multi,
        injective,
        surjective,
        max_current_identity_rel_err: max_rel,
        ok,
    })
}

/// Edge-current formula values over a range of particle counts.
pub fn current_monotonicity(
    l: usize,
    x: &[f64],
    n_range: impl IntoIterator<Item = usize>,
) -> Result<Vec<(usize, f64)>> {
    n_range
        .into_iter()
        .map(|n| {
            let sys = HadSystem::new(l, n, x.to_vec())?;
            Ok((n, edge_current_formula(&sys)?))
        })
        .collect()
}

/// CLI-facing report for one Hammersley system.
#[derive(Clone, Debug, Serialize)]
pub struct HadReport {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub x: Vec<f64>,
    /// Binomial marginal of site 1.
    pub marginal: Vec<f64>,
    pub current: f64,
    pub bijection_ok: bool,
}

pub fn had_report(sys: &HadSystem) -> Result<HadReport> {
    Ok(HadReport {
        l: sys.l,
        n: sys.n,
        x: sys.x.clone(),
        marginal: site_marginal(sys, 1)?,
        current: if sys.l >= 2 {
            edge_current_formula(sys)?
        } else {
            0.0
        },
        bijection_ok: if sys.l >= 2 {
            edge_transition_bijection(sys)?.ok
        } else {
            true
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_generator, edge_currents};
    use crate::factorise::log_sum_exp;
    use crate::exact::stationary;

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::new(v.to_vec())
    }

    #[test]
    fn weight_examples() {
        assert!((had_weight(&cfg(&[1, 1]), &[1.0, 2.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!((had_weight(&cfg(&[2, 0]), &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        // All particles on one site with unit parameters: N!/N! = 1.
        assert!((had_weight(&cfg(&[0, 5, 0]), &[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_power() {
        // Multinomial theorem: sum of weights is (sum x)^N.
        let x = [0.7, 1.9, 3.1];
        let space = StateSpace::enumerate(3, 5).unwrap();
        let logs: Vec<f64> = space
            .configurations()
            .map(|c| log_had_weight(&c, &x).unwrap())
            .collect();
        let total = log_sum_exp(&logs);
        let expect = 5.0 * (x.iter().sum::<f64>()).ln();
        assert!((total - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn probability_examples() {
        let x = [1.0, 2.0];
        assert!((had_probability(&cfg(&[2, 0]), &x).unwrap() - 1.0 / 9.0).abs() < 1e-14);
        assert!((had_probability(&cfg(&[1, 1]), &x).unwrap() - 4.0 / 9.0).abs() < 1e-14);
        // N = 0: point mass on the empty configuration.
        assert!((had_probability(&cfg(&[0, 0]), &x).unwrap() - 1.0).abs() < 1e-15);
        // Sums to one.
        let sys = HadSystem::new(4, 3, vec![0.5, 1.0, 1.5, 2.0]).unwrap();
        let d = had_distribution(&sys).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_solver() {
        let sys = HadSystem::new(3, 4, vec![1.0, 2.0, 3.0]).unwrap();
        let space = sys.state_space().unwrap();
        let gen = build_generator(&space, &sys.rate_spec()).unwrap();
        let pi = stationary(&space, &gen).unwrap();
        let d = had_distribution(&sys).unwrap();
        assert!(pi.max_abs_diff(&d) < 1e-12);
    }

    #[test]
    fn marginal_examples() {
        // L=2, N=2, x=(1,2): site 1 is Binomial(2, 1/3) = (4/9, 4/9, 1/9).
        let sys = HadSystem::new(2, 2, vec![1.0, 2.0]).unwrap();
        let m = site_marginal(&sys, 1).unwrap();
        assert!((m[0] - 4.0 / 9.0).abs() < 1e-14);
        assert!((m[1] - 4.0 / 9.0).abs() < 1e-14);
        assert!((m[2] - 1.0 / 9.0).abs() < 1e-14);

        // Uniform parameters: Binomial(N, 1/L).
        let sys = HadSystem::new(4, 3, vec![1.0; 4]).unwrap();
        let m = site_marginal(&sys, 2).unwrap();
        let p: f64 = 0.25;
        for (k, &v) in m.iter().enumerate() {
            let binom = [1.0, 3.0, 3.0, 1.0][k];
            let expect = binom * p.powi(k as i32) * (1.0 - p).powi((3 - k) as i32);
            assert!((v - expect).abs() < 1e-14);
        }

        // N = 0: point mass at zero occupancy.
        let sys = HadSystem::new(3, 0, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(site_marginal(&sys, 3).unwrap(), vec![1.0]);
    }

    #[test]
    fn marginal_matches_brute_force() {
        let sys = HadSystem::new(4, 5, vec![0.8, 1.3, 2.1, 0.6]).unwrap();
        let space = sys.state_space().unwrap();
        let d = had_distribution(&sys).unwrap();
        for site in 1..=4 {
            let marg = site_marginal(&sys, site).unwrap();
            let mut brute = vec![0.0; sys.n + 1];
            for (i, c) in space.configurations().enumerate() {
                brute[c.occupation(site)] += d.probs[i];
            }
            for (m, (&a, &b)) in marg.iter().zip(&brute).enumerate() {
                assert!((a - b).abs() < 1e-13, "site {site} occupancy {m}");
            }
        }
    }

    #[test]
    fn current_formula_examples() {
        // L=2, N=1, x=(1,1): (2/2) * (4-2)/4 = 1/2.
        let sys = HadSystem::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!((edge_current_formula(&sys).unwrap() - 0.5).abs() < 1e-15);
        // N = 0: no particles, no current.
        let sys = HadSystem::new(2, 0, vec![1.0, 1.0]).unwrap();
        assert_eq!(edge_current_formula(&sys).unwrap(), 0.0);
        // One site: no edge.
        assert!(matches!(
            edge_current_formula(&HadSystem::new(1, 3, vec![1.0]).unwrap()),
            Err(Error::NoEdge)
        ));
    }

    #[test]
    fn current_formula_matches_transition_sum() {
        let sys = HadSystem::new(3, 4, vec![1.0, 2.0, 3.0]).unwrap();
        let space = sys.state_space().unwrap();
        let spec = sys.rate_spec();
        let d = had_distribution(&sys).unwrap();
        let per_edge = edge_currents(&d.probs, &spec, &space).unwrap();
        let formula = edge_current_formula(&sys).unwrap();
        for (e, &c) in per_edge.iter().enumerate() {
            assert!(
                (c - formula).abs() < 1e-12 * formula.abs(),
                "edge {}: {c} vs {formula}",
                e + 1
            );
        }
        // Ring conservation: all edges equal.
        for w in per_edge.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn bijection_small_cases() {
        // L=2, N=1: one crossing transition onto (1,1).
        let sys = HadSystem::new(2, 1, vec![1.0, 1.0]).unwrap();
        let rep = edge_transition_bijection(&sys).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert_eq!(rep.crossing_transitions, 1);
        assert_eq!(rep.multi_site_targets, 1);

        // L=3, N=1: three crossing transitions, three multi-site targets.
        let sys = HadSystem::new(3, 1, vec![1.0, 2.0, 0.5]).unwrap();
        let rep = edge_transition_bijection(&sys).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert_eq!(rep.crossing_transitions, 3);

        // Excluded configurations are exactly the single-site pile-ups.
        let bigger = StateSpace::enumerate(3, 2).unwrap();
        let piles = bigger
            .configurations()
            .filter(|c| c.occupied_sites().len() == 1)
            .count();
        assert_eq!(rep.multi_site_targets + piles, bigger.size());
    }

    #[test]
    fn bijection_sweep() {
        for l in 2..=4 {
            for n in 1..=4 {
                let x: Vec<f64> = (1..=l).map(|i| 0.5 + 0.3 * i as f64).collect();
                let sys = HadSystem::new(l, n, x).unwrap();
                let rep = edge_transition_bijection(&sys).unwrap();
                assert!(rep.ok, "L={l} N={n}: {rep:?}");
            }
        }
    }

    #[test]
    fn monotonicity_values() {
        // Homogeneous two-site ring: the current is flat from N=1 to N=2
        // (both equal 1/2) and strictly decreasing afterwards.
        let vals = current_monotonicity(2, &[1.0, 1.0], 1..=5).unwrap();
        assert!((vals[0].1 - 0.5).abs() < 1e-15);
        assert!((vals[1].1 - 0.5).abs() < 1e-15);
        for w in vals[1..].windows(2) {
            assert!(w[1].1 < w[0].1, "{w:?}");
        }

        // Three sites: strictly decreasing over the whole range.
        let vals = current_monotonicity(3, &[1.0, 2.0, 3.0], 1..=10).unwrap();
        for w in vals.windows(2) {
            assert!(w[1].1 < w[0].1, "{w:?}");
        }

        // Single N: vacuously monotone.
        let vals = current_monotonicity(3, &[1.0, 1.0, 1.0], 4..=4).unwrap();
        assert_eq!(vals.len(), 1);
    }

    #[test]
    fn report_shape() {
        let sys = HadSystem::new(2, 2, vec![1.0, 2.0]).unwrap();
        let rep = had_report(&sys).unwrap();
        assert!(rep.bijection_ok);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["marginal"].is_array());
        assert!(json["current"].is_number());
        assert_eq!(json["bijection_ok"], true);
    }
}
