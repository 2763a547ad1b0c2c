//! Factorisation conditions on hop-rate tables, the one-point functions of
//! the factorising families, and constructors that realise a target
//! one-point weight.
//!
//! Four process families are classified: the inhomogeneous asymmetric case
//! (rates must depend on the arrival occupation only), its homogeneous
//! variant (a recursion in the table plus constant `u(.,0)`), and the
//! symmetric case with or without site parameters (a ratio identity).
//! Checkers operate on finite truncated tables, so a pass certifies the
//! condition only up to the table's `n_max`; every comparison uses the
//! relative tolerance in [`tol`](crate::tol) with its absolute floor.

use crate::dynamics::RateTable;
use crate::error::{Error, Result};
use crate::exact::Distribution;
use crate::statespace::StateSpace;
use crate::tol;
use serde::{Deserialize, Serialize};

/// Process family a rate table is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Inhomogeneous, partially or totally asymmetric (q != 1).
    Palrmp,
    /// Totally asymmetric; same condition and one-point function as
    /// [`Variant::Palrmp`].
    Talrmp,
    /// Homogeneous (all x_l = 1), q != 1.
    Hpalrmp,
    /// Symmetric (q = 1) with site parameters.
    Slrmp,
    /// Symmetric and homogeneous.
    Hslrmp,
}

/// Verdict of a condition check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One violated condition instance.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    /// Which sub-condition failed.
    pub condition: &'static str,
    pub m: usize,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Witness {
    fn new(condition: &'static str, m: usize, n: usize, lhs: f64, rhs: f64) -> Witness {
        Witness {
            condition,
            m,
            n,
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
        }
    }
}

/// Parameters extracted from a passing table.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extracted {
    /// Arrival-occupation rate function `phi(n) = u(1, n)`.
    Phi(Vec<f64>),
    /// The (b, c) pair of the homogeneous classification.
    Bc(BCPair),
    /// Nothing to extract (the ratio condition certifies directly).
    None,
}

/// Report of a condition check on a finite table.
#[derive(Clone, Debug, Serialize)]
pub struct CheckerReport {
    pub variant: Variant,
    pub verdict: Verdict,
    /// Largest occupation the table certifies.
    pub n_max: usize,
    pub extracted: Extracted,
    pub witnesses: Vec<Witness>,
}

impl CheckerReport {
    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// The `(b, c)` description of a homogeneous factorising table:
/// `b(m) = u(1, m)` and `c(m) = u(m, 1) - u(1, m)`, with `c(1) = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BCPair {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl BCPair {
    pub fn new(b: Vec<f64>, c: Vec<f64>) -> Result<BCPair> {
        if b.len() != c.len() {
            return Err(Error::DimensionMismatch(
                "b and c must have equal length".into(),
            ));
        }
        if b.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain("all b(n) must be positive".into()));
        }
        if c.len() < 2 || c[1] != 0.0 {
            return Err(Error::Domain("c(1) must be 0".into()));
        }
        Ok(BCPair { b, c })
    }

    /// Largest index covered.
    pub fn max_index(&self) -> usize {
        self.b.len() - 1
    }
}

fn report(
    variant: Variant,
    n_max: usize,
    extracted: Extracted,
    witnesses: Vec<Witness>,
) -> CheckerReport {
    CheckerReport {
        variant,
        verdict: if witnesses.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        n_max,
        extracted: if witnesses.is_empty() {
            extracted
        } else {
            Extracted::None
        },
        witnesses,
    }
}

/// Instances checked: departures m >= 1 within the physically reachable
/// band m + n <= n_max + 1 of the truncated table.
fn in_band(m: usize, n: usize, n_max: usize) -> bool {
    m >= 1 && m <= n_max && n <= n_max && m + n <= n_max + 1
}

/// Condition for the inhomogeneous asymmetric family: `u(m, n)` must not
/// depend on m for m >= 1. Extracts `phi(n) = u(1, n)` on pass.
pub fn check_palrmp(u: &RateTable) -> CheckerReport {
    check_palrmp_tol(u, tol::CONDITION_REL)
}

/// [`check_palrmp`] with an explicit relative tolerance.
pub fn check_palrmp_tol(u: &RateTable, rel: f64) -> CheckerReport {
    let close = |a: f64, b: f64| tol::rel_close(a, b, rel, tol::CONDITION_ABS_FLOOR);
    let n_max = u.n_max();
    let mut witnesses = Vec::new();
    for n in 0..=n_max {
        let phi_n = u.get(1, n).unwrap();
        if phi_n <= 0.0 && in_band(1, n, n_max) {
            witnesses.push(Witness::new("positivity", 1, n, phi_n, 0.0));
            continue;
        }
        for m in 2..=n_max {
            if !in_band(m, n, n_max) {
                continue;
            }
            let v = u.get(m, n).unwrap();
            if !close(v, phi_n) {
                witnesses.push(Witness::new("m-independence", m, n, v, phi_n));
            }
        }
    }
    let phi: Vec<f64> = (0..=n_max).map(|n| u.get(1, n).unwrap()).collect();
    report(Variant::Palrmp, n_max, Extracted::Phi(phi), witnesses)
}

/// Condition for the homogeneous asymmetric family: the table recursion
///
/// `u(m,n) = u(1,m)/u(1,n-1) * u(m+1,n-1) + (u(m,1)-u(1,m)) - (u(n,1)-u(1,n))`
///
/// together with constant `u(m, 0)`. Extracts the `(b, c)` pair on pass.
pub fn check_hpalrmp(u: &RateTable) -> Result<CheckerReport> {
    check_hpalrmp_tol(u, tol::CONDITION_REL)
}

/// [`check_hpalrmp`] with an explicit relative tolerance.
pub fn check_hpalrmp_tol(u: &RateTable, rel: f64) -> Result<CheckerReport> {
    let close = |a: f64, b: f64| tol::rel_close(a, b, rel, tol::CONDITION_ABS_FLOOR);
    let n_max = u.n_max();
    let mut witnesses = Vec::new();

    // The b column must be a positive rate function.
    for n in 0..=n_max {
        let v = u.get(1, n)?;
        if v <= 0.0 {
            witnesses.push(Witness::new("positivity", 1, n, v, 0.0));
        }
    }

    // (b): u(m, 0) constant over m >= 1.
    let u10 = u.get(1, 0)?;
    for m in 2..=n_max {
        let v = u.get(m, 0)?;
        if !close(v, u10) {
            witnesses.push(Witness::new("constant-u(m,0)", m, 0, v, u10));
        }
    }

    // (a): the recursion, wherever every referenced entry is tabulated.
    for m in 1..=n_max {
        for n in 1..=n_max {
            if m + n > n_max + 1 || m + 1 > n_max {
                continue;
            }
            let denom = u.get(1, n - 1)?;
            if denom <= 0.0 {
                witnesses.push(Witness::new("positivity", 1, n - 1, denom, 0.0));
                continue;
            }
            let lhs = u.get(m, n)?;
            let rhs = u.get(1, m)? / denom * u.get(m + 1, n - 1)?
                + (u.get(m, 1)? - u.get(1, m)?)
                - (u.get(n, 1)? - u.get(1, n)?);
            if !close(lhs, rhs) {
                witnesses.push(Witness::new("recursion", m, n, lhs, rhs));
            }
        }
    }

    let b: Vec<f64> = (0..=n_max).map(|m| u.get(1, m).unwrap()).collect();
    let c: Vec<f64> = (0..=n_max)
        .map(|m| u.get(m, 1).unwrap() - u.get(1, m).unwrap())
        .collect();
    let extracted = match BCPair::new(b, c) {
        Ok(pair) => Extracted::Bc(pair),
        Err(_) => Extracted::None,
    };
    Ok(report(Variant::Hpalrmp, n_max, extracted, witnesses))
}

/// Equivalent formulation of the homogeneous asymmetric condition:
/// a ratio identity plus an antisymmetry relation. Must agree with
/// [`check_hpalrmp`] on every table.
pub fn check_hpalrmp_alt(u: &RateTable) -> Result<CheckerReport> {
    check_hpalrmp_alt_tol(u, tol::CONDITION_REL)
}

/// [`check_hpalrmp_alt`] with an explicit relative tolerance.
pub fn check_hpalrmp_alt_tol(u: &RateTable, rel: f64) -> Result<CheckerReport> {
    let close = |a: f64, b: f64| tol::rel_close(a, b, rel, tol::CONDITION_ABS_FLOOR);
    let n_max = u.n_max();
    let mut witnesses = Vec::new();

    for n in 0..=n_max {
        let v = u.get(1, n)?;
        if v <= 0.0 {
            witnesses.push(Witness::new("positivity", 1, n, v, 0.0));
        }
    }

    // (a): u(m,n)/u(1,n) = u(n+1,m-1)/u(1,m-1).
    for m in 1..=n_max {
        for n in 1..=n_max {
            if m + n > n_max + 1 || n + 1 > n_max {
                continue;
            }
            let d1 = u.get(1, n)?;
            let d2 = u.get(1, m - 1)?;
            if d1 <= 0.0 || d2 <= 0.0 {
                witnesses.push(Witness::new("positivity", m, n, d1.min(d2), 0.0));
                continue;
            }
            let lhs = u.get(m, n)? / d1;
            let rhs = u.get(n + 1, m - 1)? / d2;
            if !close(lhs, rhs) {
                witnesses.push(Witness::new("ratio", m, n, lhs, rhs));
            }
        }
    }

    // (b): u(m,n) - u(n,m) = (u(m,1)-u(1,m)) - (u(n,1)-u(1,n)).
    for m in 1..=n_max {
        for n in 1..=n_max {
            if m + n > n_max + 1 {
                continue;
            }
            let lhs = u.get(m, n)? - u.get(n, m)?;
            let rhs = (u.get(m, 1)? - u.get(1, m)?) - (u.get(n, 1)? - u.get(1, n)?);
            if !close(lhs, rhs) {
                witnesses.push(Witness::new("antisymmetry", m, n, lhs, rhs));
            }
        }
    }

    let b: Vec<f64> = (0..=n_max).map(|m| u.get(1, m).unwrap()).collect();
    let c: Vec<f64> = (0..=n_max)
        .map(|m| u.get(m, 1).unwrap() - u.get(1, m).unwrap())
        .collect();
    let extracted = match BCPair::new(b, c) {
        Ok(pair) => Extracted::Bc(pair),
        Err(_) => Extracted::None,
    };
    Ok(report(Variant::Hpalrmp, n_max, extracted, witnesses))
}

/// Condition for the symmetric family (with or without site parameters):
///
/// `u(m,n) / (u(m,0) u(1,n)) = u(n+1,m-1) / (u(n+1,0) u(1,m-1))`.
pub fn check_slrmp(u: &RateTable) -> Result<CheckerReport> {
    check_slrmp_tol(u, tol::CONDITION_REL)
}

/// [`check_slrmp`] with an explicit relative tolerance.
pub fn check_slrmp_tol(u: &RateTable, rel: f64) -> Result<CheckerReport> {
    let close = |a: f64, b: f64| tol::rel_close(a, b, rel, tol::CONDITION_ABS_FLOOR);
    let n_max = u.n_max();
    let mut witnesses = Vec::new();
    for m in 1..=n_max {
        for n in 1..=n_max {
            if m + n > n_max + 1 || n + 1 > n_max {
                continue;
            }
            let d1 = u.get(m, 0)? * u.get(1, n)?;
            let d2 = u.get(n + 1, 0)? * u.get(1, m - 1)?;
            if d1 == 0.0 || d2 == 0.0 {
                return Err(Error::Domain(format!(
                    "ratio condition at (m,n)=({m},{n}) divides by a zero rate"
                )));
            }
            let lhs = u.get(m, n)? / d1;
            let rhs = u.get(n + 1, m - 1)? / d2;
            if !close(lhs, rhs) {
                witnesses.push(Witness::new("ratio", m, n, lhs, rhs));
            }
        }
    }
    Ok(report(Variant::Slrmp, n_max, Extracted::None, witnesses))
}

/// Run the checker matching `variant`.
pub fn check(variant: Variant, u: &RateTable) -> Result<CheckerReport> {
    check_tol(variant, u, tol::CONDITION_REL)
}

/// [`check`] with an explicit relative tolerance.
pub fn check_tol(variant: Variant, u: &RateTable, rel: f64) -> Result<CheckerReport> {
    match variant {
        Variant::Palrmp | Variant::Talrmp => Ok(check_palrmp_tol(u, rel)),
        Variant::Hpalrmp => check_hpalrmp_tol(u, rel),
        Variant::Slrmp | Variant::Hslrmp => check_slrmp_tol(u, rel),
    }
}

/// Per-site stationary weight of a factorising family, stored as log
/// prefix sums so large N never overflows.
///
/// The weight is `f(x, n) = x^n * prod_{i=1..n} w(i-1)` when the family
/// carries site parameters, and `f(n) = prod_{i=1..n} w(i-1)` otherwise.
/// `f(., 0) = 1` by construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OnePointTable {
    pub variant: Variant,
    /// Whether f carries the site parameter factor `x^n`.
    pub uses_x: bool,
    /// `log_prefix[n] = sum_{i=1..n} ln w(i-1)`.
    pub log_prefix: Vec<f64>,
}

impl OnePointTable {
    pub fn n_max(&self) -> usize {
        self.log_prefix.len() - 1
    }

    /// `ln f(x, n)`; `x` is ignored for homogeneous families.
    pub fn log_f(&self, x: f64, n: usize) -> f64 {
        let xs = if self.uses_x { n as f64 * x.ln() } else { 0.0 };
        xs + self.log_prefix[n]
    }

    /// `f(x, n)`.
    pub fn f(&self, x: f64, n: usize) -> f64 {
        self.log_f(x, n).exp()
    }

    /// Log partition function on `space` with site parameters `xs`,
    /// computed by direct summation over all configurations.
    pub fn log_z(&self, space: &StateSpace, xs: &[f64]) -> Result<f64> {
        if xs.len() != space.l() {
            return Err(Error::DimensionMismatch(
                "site parameter count does not match state space".into(),
            ));
        }
        if space.n() > self.n_max() {
            return Err(Error::InvalidInput(format!(
                "one-point table covers n <= {}, space needs {}",
                self.n_max(),
                space.n()
            )));
        }
        let logs: Vec<f64> = (0..space.size())
            .map(|i| {
                let cfg = space.unrank(i);
                (1..=space.l())
                    .map(|s| self.log_f(xs[s - 1], cfg.occupation(s)))
                    .sum()
            })
            .collect();
        Ok(log_sum_exp(&logs))
    }
}

pub(crate) fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logs.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// One-point weight of a passing table under `variant`.
///
/// Runs the matching checker first and refuses tables that fail it.
pub fn one_point(variant: Variant, u: &RateTable, n_max: usize) -> Result<OnePointTable> {
    if n_max > u.n_max() {
        return Err(Error::RateTableOverrun {
            m: 0,
            n: n_max,
            n_max: u.n_max(),
        });
    }
    let rep = check(variant, u)?;
    if !rep.pass() {
        return Err(Error::InvalidInput(format!(
            "table fails the {:?} condition ({} witnesses); no one-point function exists",
            variant,
            rep.witnesses.len()
        )));
    }
    let uses_x = matches!(variant, Variant::Palrmp | Variant::Talrmp | Variant::Slrmp);
    let w = |i: usize| -> Result<f64> {
        let v = match variant {
            Variant::Palrmp | Variant::Talrmp | Variant::Hpalrmp => u.get(1, i)?,
            Variant::Slrmp | Variant::Hslrmp => u.get(1, i)? / u.get(i + 1, 0)?,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!(
                "one-point factor at level {i} is not positive"
            )));
        }
        Ok(v)
    };
    let mut log_prefix = Vec::with_capacity(n_max + 1);
    log_prefix.push(0.0);
    let mut acc = 0.0;
    for n in 1..=n_max {
        acc += w(n - 1)?.ln();
        log_prefix.push(acc);
    }
    Ok(OnePointTable {
        variant,
        uses_x,
        log_prefix,
    })
}

/// Normalized product distribution from a one-point table.
///
/// Weights accumulate in log space, so the partition function cannot
/// overflow for desk-scale L and N.
pub fn factorised_distribution(
    table: &OnePointTable,
    space: &StateSpace,
    xs: &[f64],
) -> Result<Distribution> {
    let log_z = table.log_z(space, xs)?;
    let probs: Vec<f64> = (0..space.size())
        .map(|i| {
            let cfg = space.unrank(i);
            let lw: f64 = (1..=space.l())
                .map(|s| table.log_f(xs[s - 1], cfg.occupation(s)))
                .sum();
            (lw - log_z).exp()
        })
        .collect();
    Distribution::new(space, probs)
}

/// The raw `(b, c)` rate formula
///
/// `u(m,n) = b(0) prod_{k=1..n} b(m+k-1)/b(n-k)
///           + sum_{l=0..n-1} (c(m+l) - c(n-l)) prod_{k=1..l} b(m+k-1)/b(n-k)`
///
/// for m >= 1. The value can be negative for arbitrary pairs; only pairs
/// whose formula stays positive define a rate table.
pub fn bc_entry(pair: &BCPair, m: usize, n: usize) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    if n == 0 {
        return Ok(pair.b[0]);
    }
    if pair.max_index() < m + n - 1 {
        return Err(Error::InvalidInput(format!(
            "b/c cover indices 0..={}, entry ({m},{n}) needs 0..={}",
            pair.max_index(),
            m + n - 1
        )));
    }
    let b = &pair.b;
    let c = &pair.c;
    let mut prod = 1.0;
    let mut acc = 0.0;
    for l in 0..n {
        // prod holds prod_{k=1..l} b(m+k-1)/b(n-k) entering iteration l.
        acc += (c[m + l] - c[n - l]) * prod;
        prod *= b[m + l] / b[n - 1 - l];
    }
    Ok(b[0] * prod + acc)
}

/// Rate table generated by a `(b, c)` pair via [`bc_entry`].
///
/// Filling the full `(n_max+1)^2` grid needs b and c up to index
/// `2 n_max - 1`; pairs whose formula dips negative are rejected.
pub fn u_from_bc(pair: &BCPair, n_max: usize) -> Result<RateTable> {
    let need = if n_max >= 1 { 2 * n_max - 1 } else { 0 };
    if pair.max_index() < need {
        return Err(Error::InvalidInput(format!(
            "b/c cover indices 0..={}, full table of n_max {n_max} needs 0..={need}",
            pair.max_index()
        )));
    }
    let mut rows = Vec::with_capacity(n_max + 1);
    for m in 0..=n_max {
        let mut row = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            row.push(bc_entry(pair, m, n)?);
        }
        rows.push(row);
    }
    RateTable::new(rows)
}

/// The consistency sum
/// `sum_{l=0..n-1} (c(1+l) - c(n-l)) prod_{k=1..l} b(k)/b(n-k)`,
/// which vanishes for every pair with `c(1) = 0`.
pub fn consistency_sum(pair: &BCPair, n: usize) -> Result<f64> {
    if n < 1 || pair.max_index() < n {
        return Err(Error::InvalidInput(format!(
            "consistency sum needs b/c up to index {n}"
        )));
    }
    let b = &pair.b;
    let c = &pair.c;
    let mut prod = 1.0;
    let mut acc = 0.0;
    for l in 0..n {
        acc += (c[1 + l] - c[n - l]) * prod;
        prod *= b[1 + l] / b[n - 1 - l];
    }
    Ok(acc)
}

/// Build the arrival-only rate table realising weight `g`:
/// `u(m, n) = g(n+1)/g(n)` for m >= 1. Needs `g` on `0..=n_max+1`.
pub fn construct_rate_palrmp(g: &[f64], n_max: usize) -> Result<RateTable> {
    check_weight(g, n_max + 2)?;
    RateTable::from_fn(n_max, |_, n| g[n + 1] / g[n])
}

/// Build a homogeneous-only factorising table for weight `g`: arrival
/// ratios give `b`, and `c` grows inductively so every entry stays
/// positive, with `c(2)` nudged to keep `u(1,1) != u(2,1)` (so the table
/// never satisfies the arrival-only condition).
pub fn construct_rate_hpalrmp(g: &[f64], n_max: usize) -> Result<RateTable> {
    check_weight(g, n_max + 2)?;
    let top = if n_max >= 1 { 2 * n_max - 1 } else { 1 };
    let mut b = Vec::with_capacity(top + 1);
    for i in 0..=top {
        if i + 1 < g.len() {
            b.push(g[i + 1] / g[i]);
        } else {
            // Geometric extension of the weight beyond the tabulated range;
            // the one-point function on 0..=n_max is unaffected.
            b.push(*b.last().unwrap());
        }
    }

    let mut c = vec![0.0; top + 1];
    c[0] = -b[0];
    // c[1] = 0 already.
    for p in 2..=top {
        // u(m, n) with m+n = p+1 is linear in c(p) with positive
        // coefficient; collect the implied lower bounds.
        let mut low = f64::NEG_INFINITY;
        for n in 1..p {
            let m = p + 1 - n;
            let mut prod = 1.0;
            let mut affine = 0.0;
            for l in 0..n {
                if m + l == p {
                    break;
                }
                affine += (c[m + l] - c[n - l]) * prod;
                prod *= b[m + l] / b[n - 1 - l];
            }
            // Remaining term: (c(p) - c(1)) * prod, and the pure-b product.
            let coeff = prod;
            let mut bprod = 1.0;
            for k in 1..=n {
                bprod *= b[m + k - 1] / b[n - k];
            }
            affine += b[0] * bprod;
            low = low.max(-affine / coeff);
        }
        c[p] = low + 1.0;
        if p == 2 {
            // Keep u(2,1) = b(2)+c(2) away from u(1,1) = b(1).
            let u21 = b[2] + c[2];
            if (b[1] - u21).abs() <= 1e-6 * b[1].abs().max(u21.abs()).max(1.0) {
                c[2] += 1.0;
            }
        }
    }

    let pair = BCPair::new(b, c)?;
    u_from_bc(&pair, n_max)
}

/// Build a symmetric-only factorising table for weight `g`:
/// `u(m, n) = varphi(m) * g(n+1)/g(n) * varphi(n+1)` with the non-constant
/// departure factor `varphi`.
pub fn construct_rate_slrmp_with(
    g: &[f64],
    n_max: usize,
    varphi: impl Fn(usize) -> f64,
) -> Result<RateTable> {
    check_weight(g, n_max + 2)?;
    for m in 1..=n_max + 1 {
        if !(varphi(m).is_finite() && varphi(m) > 0.0) {
            return Err(Error::Domain(format!("varphi({m}) must be positive")));
        }
    }
    RateTable::from_fn(n_max, |m, n| varphi(m) * (g[n + 1] / g[n]) * varphi(n + 1))
}

/// [`construct_rate_slrmp_with`] using the default departure factor
/// `varphi(m) = m` (the smallest non-constant positive choice).
pub fn construct_rate_slrmp(g: &[f64], n_max: usize) -> Result<RateTable> {
    construct_rate_slrmp_with(g, n_max, |m| m as f64)
}

fn check_weight(g: &[f64], need: usize) -> Result<()> {
    if g.len() < need {
        return Err(Error::InvalidInput(format!(
            "weight must supply at least {need} values, got {}",
            g.len()
        )));
    }
    if g.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::Domain("weight values must be positive".into()));
    }
    Ok(())
}

/// Outcome of the circular-sum decomposition `F(n, m) = h(n) - h(m)`.
#[derive(Clone, Debug, Serialize)]
pub enum CircularDecomposition {
    /// The table decomposes; `h(n) = F(n, 1)` (1-based index n-1).
    Decomposed { h: Vec<f64> },
    /// A violating pair: `F(n, m) != h(n) - h(m)`.
    Failure {
        n: usize,
        m: usize,
        lhs: f64,
        rhs: f64,
    },
}

/// Try to write a pair table `F` over `1..=K` as a difference `h(n) - h(m)`
/// with `h(n) = F(n, 1)`.
pub fn circular_decompose(f: &[Vec<f64>]) -> Result<CircularDecomposition> {
    let k = f.len();
    if k == 0 || f.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch(
            "pair table must be square and non-empty".into(),
        ));
    }
    let h: Vec<f64> = (0..k).map(|n| f[n][0]).collect();
    for n in 0..k {
        for m in 0..k {
            let rhs = h[n] - h[m];
            if (f[n][m] - rhs).abs() > tol::CIRCULAR_DECOMPOSE {
                return Ok(CircularDecomposition::Failure {
                    n: n + 1,
                    m: m + 1,
                    lhs: f[n][m],
                    rhs,
                });
            }
        }
    }
    Ok(CircularDecomposition::Decomposed { h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn had_table(n_max: usize) -> RateTable {
        RateTable::from_fn(n_max, |_, n| 1.0 / (n as f64 + 1.0)).unwrap()
    }

    #[test]
    fn palrmp_checker_examples() {
        let rep = check_palrmp(&had_table(5));
        assert!(rep.pass());
        match &rep.extracted {
            Extracted::Phi(phi) => {
                for (n, &v) in phi.iter().enumerate() {
                    assert!((v - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
                }
            }
            other => panic!("expected phi, got {other:?}"),
        }

        // u(m,n) = m/(n+1) depends on the departure: fails, witness at (2,0).
        let u = RateTable::from_fn(5, |m, n| m as f64 / (n as f64 + 1.0)).unwrap();
        let rep = check_palrmp(&u);
        assert!(!rep.pass());
        assert!(rep
            .witnesses
            .iter()
            .any(|w| w.m == 2 && w.n == 0 && w.condition == "m-independence"));

        let ones = RateTable::from_fn(4, |_, _| 1.0).unwrap();
        let rep = check_palrmp(&ones);
        assert!(rep.pass());
    }

    #[test]
    fn hpalrmp_checker_passes_phi_tables() {
        let rep = check_hpalrmp(&had_table(5)).unwrap();
        assert!(rep.pass(), "witnesses: {:?}", rep.witnesses);
        match rep.extracted {
            Extracted::Bc(pair) => {
                assert_eq!(pair.c[1], 0.0);
                assert!((pair.c[0] + 1.0).abs() < 1e-15);
            }
            other => panic!("expected bc, got {other:?}"),
        }
    }

    #[test]
    fn hpalrmp_checker_fails_on_nonconstant_u_m0() {
        let u = RateTable::from_fn(5, |m, n| m as f64 / (n as f64 + 1.0)).unwrap();
        let rep = check_hpalrmp(&u).unwrap();
        assert!(!rep.pass());
        assert!(rep
            .witnesses
            .iter()
            .any(|w| w.condition == "constant-u(m,0)"));
    }

    #[test]
    fn u_from_bc_linear_example() {
        // b = 1, c(p) = p - 1 except c(1) = 0: u(m,n) = 1 + n(m-1).
        let top = 9;
        let b = vec![1.0; top + 1];
        let mut c: Vec<f64> = (0..=top).map(|p| p as f64 - 1.0).collect();
        c[1] = 0.0;
        let pair = BCPair::new(b, c).unwrap();
        let u = u_from_bc(&pair, 5).unwrap();
        assert_eq!(u.get(1, 1).unwrap(), 1.0);
        assert_eq!(u.get(2, 1).unwrap(), 2.0);
        assert_eq!(u.get(1, 2).unwrap(), 1.0);
        for m in 1..=5usize {
            for n in 0..=5usize {
                let expect = 1.0 + n as f64 * (m as f64 - 1.0);
                assert!((u.get(m, n).unwrap() - expect).abs() < 1e-12, "u({m},{n})");
            }
        }
        // It must pass the homogeneous condition but not the arrival-only one.
        assert!(check_hpalrmp(&u).unwrap().pass());
        assert!(!check_palrmp(&u).pass());
    }

    #[test]
    fn u_from_bc_um1_identity() {
        // u(m,1) = b(m) + c(m) for any pair.
        let b = vec![1.3, 0.7, 2.0, 1.1, 0.9, 1.6, 0.8, 1.2];
        let c = vec![-1.3, 0.0, 0.4, -0.2, 0.9, 0.1, -0.5, 0.3];
        let pair = BCPair::new(b.clone(), c.clone()).unwrap();
        let u = u_from_bc(&pair, 4).unwrap();
        for m in 1..=4usize {
            let expect = b[m] + c[m];
            assert!((u.get(m, 1).unwrap() - expect).abs() < 1e-12);
        }
        // And u(1, n) = b(n): the consistency identity in action.
        for n in 0..=4usize {
            assert!((u.get(1, n).unwrap() - b[n]).abs() * (1.0 / b[n]) < 1e-12);
        }
    }

    #[test]
    fn bc_formula_pure_b_reduction() {
        // With c = 0 everywhere (keeping c(0) = -b(0)), the generated rate
        // collapses to the bare product term b(0) prod b(m+k-1)/b(n-k).
        let b = vec![1.2, 0.8, 1.5, 0.9, 1.1, 0.7, 1.3, 1.0];
        let mut c = vec![0.0; 8];
        c[0] = -b[0];
        let pair = BCPair::new(b.clone(), c).unwrap();
        for m in 1..=4usize {
            for n in 0..=4usize {
                let mut expect = b[0];
                for k in 1..=n {
                    expect *= b[m + k - 1] / b[n - k];
                }
                let got = bc_entry(&pair, m, n).unwrap();
                assert!((got - expect).abs() < 1e-12 * expect.abs(), "u({m},{n})");
            }
        }
    }

    #[test]
    fn checker_report_json_shape() {
        let rep = check_palrmp(&had_table(3));
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["verdict"], "pass");
        assert!(v["extracted"]["phi"].is_array());
        assert!(v["witnesses"].as_array().unwrap().is_empty());

        let bad = RateTable::from_fn(3, |m, _| m as f64).unwrap();
        let v = serde_json::to_value(&check_palrmp(&bad)).unwrap();
        assert_eq!(v["verdict"], "fail");
        let w = &v["witnesses"][0];
        assert!(w["m"].is_number() && w["n"].is_number() && w["residual"].is_number());
    }

    #[test]
    fn consistency_sum_examples() {
        let b = vec![1.3, 0.7, 2.0, 1.1, 0.9, 1.6, 0.8, 1.2];
        let c = vec![-1.3, 0.0, 0.4, -0.2, 0.9, 0.1, -0.5, 0.3];
        let pair = BCPair::new(b, c).unwrap();
        // n = 1: the single term is c(1) - c(1) = 0 exactly.
        assert_eq!(consistency_sum(&pair, 1).unwrap(), 0.0);
        for n in 2..=7 {
            assert!(consistency_sum(&pair, n).unwrap().abs() < tol::CONSISTENCY_SUM);
        }
        // b = 1: plain telescoping.
        let pair = BCPair::new(vec![1.0; 5], vec![-1.0, 0.0, 0.7, -0.3, 0.5]).unwrap();
        assert!(consistency_sum(&pair, 4).unwrap().abs() < 1e-15);
    }

    #[test]
    fn slrmp_checker_examples() {
        // u(m,n) = m/(n+1): both sides of the ratio identity equal 1.
        let u = RateTable::from_fn(5, |m, n| m as f64 / (n as f64 + 1.0)).unwrap();
        assert!(check_slrmp(&u).unwrap().pass());
        // Anything passing the homogeneous condition passes here too.
        assert!(check_slrmp(&had_table(5)).unwrap().pass());
    }

    #[test]
    fn slrmp_u21_is_self_paired() {
        // The ratio identity maps (m,n) = (2,1) to itself, so u(2,1) is
        // unconstrained: perturbing it cannot break the condition.
        let base = RateTable::from_fn(5, |m, n| m as f64 / (n as f64 + 1.0)).unwrap();
        let perturbed = base
            .with_entry(2, 1, base.get(2, 1).unwrap() * 1.1)
            .unwrap();
        assert!(check_slrmp(&perturbed).unwrap().pass());
        // A 10% bump of u(2,2) breaks a genuine instance.
        let broken = base
            .with_entry(2, 2, base.get(2, 2).unwrap() * 1.1)
            .unwrap();
        let rep = check_slrmp(&broken).unwrap();
        assert!(!rep.pass());
        assert!(rep.witnesses.iter().any(|w| (w.m, w.n) == (2, 2)));
    }

    #[test]
    fn slrmp_zero_rate_is_domain_error() {
        let mut rows = had_table(3).to_rows();
        rows[2][0] = 0.0;
        let u = RateTable::new(rows).unwrap();
        assert!(matches!(check_slrmp(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn one_point_formulas() {
        // Arrival-only HAD rates: f(x, n) = x^n / n!.
        let t = one_point(Variant::Palrmp, &had_table(6), 6).unwrap();
        let mut fact = 1.0;
        for n in 0..=6usize {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = 2.0f64.powi(n as i32) / fact;
            assert!((t.f(2.0, n) - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(t.f(5.0, 0), 1.0);

        // Homogeneous with b = 1: f = 1 everywhere.
        let ones = RateTable::from_fn(4, |_, _| 1.0).unwrap();
        let t = one_point(Variant::Hpalrmp, &ones, 4).unwrap();
        for n in 0..=4usize {
            assert!((t.f(1.0, n) - 1.0).abs() < 1e-15);
        }

        // Symmetric homogeneous with u = m/(n+1): f(n) = 1/(n!)^2.
        let u = RateTable::from_fn(5, |m, n| m as f64 / (n as f64 + 1.0)).unwrap();
        let t = one_point(Variant::Hslrmp, &u, 5).unwrap();
        let mut fact = 1.0;
        for n in 0..=5usize {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = 1.0 / (fact * fact);
            assert!((t.f(1.0, n) - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn one_point_rejects_failing_table() {
        let u = RateTable::from_fn(4, |m, _| m as f64).unwrap();
        assert!(matches!(
            one_point(Variant::Palrmp, &u, 4),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn factorised_distribution_examples() {
        // HAD one-point on Omega_{2,2} with x = (1,2): (1/9, 4/9, 4/9).
        let t = one_point(Variant::Palrmp, &had_table(2), 2).unwrap();
        let space = StateSpace::enumerate(2, 2).unwrap();
        let d = factorised_distribution(&t, &space, &[1.0, 2.0]).unwrap();
        assert!((d.probs[0] - 1.0 / 9.0).abs() < 1e-14);
        assert!((d.probs[1] - 4.0 / 9.0).abs() < 1e-14);
        assert!((d.probs[2] - 4.0 / 9.0).abs() < 1e-14);

        // Constant one-point: uniform.
        let ones = RateTable::from_fn(3, |_, _| 1.0).unwrap();
        let t = one_point(Variant::Hpalrmp, &ones, 3).unwrap();
        let space = StateSpace::enumerate(3, 3).unwrap();
        let d = factorised_distribution(&t, &space, &[1.0, 1.0, 1.0]).unwrap();
        for &p in &d.probs {
            assert!((p - 1.0 / space.size() as f64).abs() < 1e-14);
        }

        // Single site: point mass.
        let space = StateSpace::enumerate(1, 4).unwrap();
        let t = one_point(Variant::Palrmp, &had_table(4), 4).unwrap();
        let d = factorised_distribution(&t, &space, &[1.0]).unwrap();
        assert_eq!(d.probs, vec![1.0]);
    }

    #[test]
    fn constructors_meet_their_contracts() {
        let g: Vec<f64> = vec![1.0, 0.6, 0.5, 0.9, 1.4, 0.3, 0.8, 1.1, 0.7, 1.2];
        let n_max = 8;

        let u1 = construct_rate_palrmp(&g, n_max).unwrap();
        assert!(check_palrmp(&u1).pass());

        let u2 = construct_rate_hpalrmp(&g, n_max).unwrap();
        assert!(check_hpalrmp(&u2).unwrap().pass());
        assert!(!check_palrmp(&u2).pass());

        let u3 = construct_rate_slrmp(&g, n_max).unwrap();
        assert!(check_slrmp(&u3).unwrap().pass());
        assert!(!check_hpalrmp(&u3).unwrap().pass());

        // All constructed entries positive for m >= 1.
        for u in [&u1, &u2, &u3] {
            for m in 1..=n_max {
                for n in 0..=n_max {
                    assert!(u.get(m, n).unwrap() > 0.0, "u({m},{n})");
                }
            }
        }
    }

    #[test]
    fn constructor_weights() {
        // Inverse factorials give the 1/(n+1) rates.
        let mut g = vec![1.0f64];
        for n in 1..=9 {
            g.push(g[n - 1] / n as f64);
        }
        let u = construct_rate_palrmp(&g, 8).unwrap();
        for n in 0..=8usize {
            assert!((u.get(1, n).unwrap() - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        }
        // g = 1 gives u = 1; g = 2^n gives phi = 2.
        let ones = vec![1.0; 10];
        let u = construct_rate_palrmp(&ones, 8).unwrap();
        assert_eq!(u.get(3, 5).unwrap(), 1.0);
        let geo: Vec<f64> = (0..10).map(|n| 2.0f64.powi(n)).collect();
        let u = construct_rate_palrmp(&geo, 8).unwrap();
        assert_eq!(u.get(2, 4).unwrap(), 2.0);
    }

    #[test]
    fn hpalrmp_roundtrip_through_bc() {
        let g: Vec<f64> = vec![1.0, 0.8, 1.3, 0.6, 1.1, 0.9, 1.5, 0.7, 1.2, 0.95];
        let u = construct_rate_hpalrmp(&g, 8).unwrap();
        let rep = check_hpalrmp(&u).unwrap();
        assert!(rep.pass());
        let pair = match rep.extracted {
            Extracted::Bc(p) => p,
            other => panic!("expected bc, got {other:?}"),
        };
        // Extracted pair reaches index 8, enough for a full 4x4 grid.
        let u_small = u_from_bc(&pair, 4).unwrap();
        for m in 0..=4usize {
            for n in 0..=4usize {
                let a = u.get(m, n).unwrap();
                let b = u_small.get(m, n).unwrap();
                assert!(
                    tol::rel_close(a, b, tol::CONDITION_REL, tol::CONDITION_ABS_FLOOR),
                    "u({m},{n}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn checker_hierarchy_on_examples() {
        // phi-type passes everything; hpalrmp-only passes slrmp; slrmp-only
        // passes nothing stronger.
        let g: Vec<f64> = vec![1.0, 1.4, 0.7, 1.2, 0.9, 1.1, 0.8, 1.3, 0.6, 1.05];
        let phi_table = construct_rate_palrmp(&g, 8).unwrap();
        assert!(check_palrmp(&phi_table).pass());
        assert!(check_hpalrmp(&phi_table).unwrap().pass());
        assert!(check_slrmp(&phi_table).unwrap().pass());

        let h_table = construct_rate_hpalrmp(&g, 8).unwrap();
        assert!(check_hpalrmp(&h_table).unwrap().pass());
        assert!(check_slrmp(&h_table).unwrap().pass());

        let s_table = construct_rate_slrmp(&g, 8).unwrap();
        assert!(check_slrmp(&s_table).unwrap().pass());
        assert!(!check_hpalrmp(&s_table).unwrap().pass());
        assert!(!check_palrmp(&s_table).pass());
    }

    #[test]
    fn alt_checker_agrees() {
        let g: Vec<f64> = vec![1.0, 0.9, 1.2, 0.8, 1.1, 1.3, 0.7, 1.0, 0.85, 1.15];
        for u in [
            construct_rate_palrmp(&g, 8).unwrap(),
            construct_rate_hpalrmp(&g, 8).unwrap(),
            construct_rate_slrmp(&g, 8).unwrap(),
            RateTable::from_fn(6, |m, n| 1.0 + 0.3 * m as f64 + 0.7 * n as f64).unwrap(),
        ] {
            let a = check_hpalrmp(&u).unwrap().pass();
            let b = check_hpalrmp_alt(&u).unwrap().pass();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constructed_tables_hit_their_weight() {
        use crate::dynamics::{build_generator, RateSpec};
        use crate::exact::stationary;

        let g: Vec<f64> = vec![1.3, 0.9, 1.6, 0.5, 1.2, 0.8, 1.4];
        let n_max = 4;

        // Homogeneous-only construction: one-point values equal g(n)/g(0).
        let u = construct_rate_hpalrmp(&g, n_max).unwrap();
        let t = one_point(Variant::Hpalrmp, &u, n_max).unwrap();
        for n in 0..=n_max {
            let expect = g[n] / g[0];
            assert!(
                (t.f(1.0, n) - expect).abs() < 1e-9 * expect,
                "f({n}) = {} vs {expect}",
                t.f(1.0, n)
            );
        }

        // Symmetric-only construction: the homogeneous symmetric process
        // solved exactly matches the product law with weight g(n)/g(0).
        let us = construct_rate_slrmp(&g, n_max).unwrap();
        let ts = one_point(Variant::Hslrmp, &us, n_max).unwrap();
        // The tabulated one-point function is g(n)/g(0) up to a geometric
        // factor, which the rescale freedom removes; the induced
        // distribution below is what must coincide.
        let rho = ts.f(1.0, 1) * g[0] / g[1];
        for n in 0..=n_max {
            let expect = g[n] / g[0] * rho.powi(n as i32);
            assert!(
                (ts.f(1.0, n) - expect).abs() < 1e-9 * expect,
                "f({n}) = {} vs {expect}",
                ts.f(1.0, n)
            );
        }
        for (l, n) in [(3usize, 3usize), (4, 4), (2, 4)] {
            let space = StateSpace::enumerate(l, n).unwrap();
            let spec = RateSpec::homogeneous(us.clone(), 1.0, l).unwrap();
            let gen = build_generator(&space, &spec).unwrap();
            let pi = stationary(&space, &gen).unwrap();
            let sigma = factorised_distribution(&ts, &space, &vec![1.0; l]).unwrap();
            assert!(pi.max_abs_diff(&sigma) < 1e-12, "L={l} N={n}");
        }
    }

    #[test]
    fn circular_decompose_examples() {
        // F(n,m) = n^2 - m^2 decomposes with h(n) = n^2 - 1.
        let k = 6;
        let f: Vec<Vec<f64>> = (1..=k)
            .map(|n| (1..=k).map(|m| (n * n) as f64 - (m * m) as f64).collect())
            .collect();
        match circular_decompose(&f).unwrap() {
            CircularDecomposition::Decomposed { h } => {
                for (i, &v) in h.iter().enumerate() {
                    let n = (i + 1) as f64;
                    assert!((v - (n * n - 1.0)).abs() < 1e-12);
                }
            }
            other => panic!("expected decomposition, got {other:?}"),
        }

        // F(n,m) = n*m is not a difference.
        let f: Vec<Vec<f64>> = (1..=3)
            .map(|n| (1..=3).map(|m| (n * m) as f64).collect())
            .collect();
        assert!(matches!(
            circular_decompose(&f).unwrap(),
            CircularDecomposition::Failure { .. }
        ));
    }

    #[test]
    fn circular_decompose_from_passing_table() {
        // F(m,n) = u(m,n) - u(1,m)/u(1,n-1) u(m+1,n-1) decomposes for a
        // homogeneous factorising table.
        let g: Vec<f64> = vec![1.0, 0.8, 1.3, 0.6, 1.1, 0.9, 1.5, 0.7, 1.2, 0.95];
        let u = construct_rate_hpalrmp(&g, 8).unwrap();
        let k = 4;
        let f: Vec<Vec<f64>> = (1..=k)
            .map(|m| {
                (1..=k)
                    .map(|n| {
                        u.get(m, n).unwrap()
                            - u.get(1, m).unwrap() / u.get(1, n - 1).unwrap()
                                * u.get(m + 1, n - 1).unwrap()
                    })
                    .collect()
            })
            .collect();
        assert!(matches!(
            circular_decompose(&f).unwrap(),
            CircularDecomposition::Decomposed { .. }
        ));
    }
}
