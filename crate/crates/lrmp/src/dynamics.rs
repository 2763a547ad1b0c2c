//! Long-range hop dynamics: rate specifications, legal transitions of a
//! configuration, the continuous-time generator, and probability currents.
//!
//! A particle at site k may hop to site l with rate `x_l * u(eta_k, eta_l)`
//! moving right, or `q * x_l * u(eta_k, eta_l)` moving left, provided every
//! site strictly between k and l in the hop direction is empty.

use crate::error::{Error, Result};
use crate::statespace::{Configuration, StateSpace};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Hop-rate component table `u(m, n)` for departure occupation m and
/// arrival occupation n, tabulated on `0..=n_max` in both arguments.
///
/// `u(0, n) = 0` always: empty sites emit no particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RateTable {
    n_max: usize,
    entries: Vec<f64>,
}

impl RateTable {
    /// Build from a square 2-D table indexed `[m][n]`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<RateTable> {
        if rows.is_empty() {
            return Err(Error::InvalidRateTable("empty table".into()));
        }
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for (m, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidRateTable(format!(
                    "row {m} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (n, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidRateTable(format!(
                        "u({m},{n}) = {v} is not a finite non-negative rate"
                    )));
                }
                if m == 0 && v != 0.0 {
                    return Err(Error::InvalidRateTable(format!(
                        "u(0,{n}) = {v}, but empty sites cannot emit particles"
                    )));
                }
                entries.push(v);
            }
        }
        Ok(RateTable {
            n_max: dim - 1,
            entries,
        })
    }

    /// Build from a function on `m >= 1`; `u(0, n)` is forced to zero.
    pub fn from_fn(n_max: usize, f: impl Fn(usize, usize) -> f64) -> Result<RateTable> {
        let rows = (0..=n_max)
            .map(|m| {
                (0..=n_max)
                    .map(|n| if m == 0 { 0.0 } else { f(m, n) })
                    .collect()
            })
            .collect();
        RateTable::new(rows)
    }

    /// Largest tabulated occupation.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, m: usize, n: usize) -> Result<f64> {
        if m > self.n_max || n > self.n_max {
            return Err(Error::RateTableOverrun {
                m,
                n,
                n_max: self.n_max,
            });
        }
        Ok(self.entries[m * (self.n_max + 1) + n])
    }

    /// Copy with a single entry replaced (used to perturb passing tables).
    pub fn with_entry(&self, m: usize, n: usize, v: f64) -> Result<RateTable> {
        if m == 0 {
            return Err(Error::InvalidRateTable("cannot set u(0,.)".into()));
        }
        let mut t = self.clone();
        if m > self.n_max || n > self.n_max {
            return Err(Error::RateTableOverrun {
                m,
                n,
                n_max: self.n_max,
            });
        }
        t.entries[m * (self.n_max + 1) + n] = v;
        Ok(t)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..=self.n_max)
            .map(|m| {
                (0..=self.n_max)
                    .map(|n| self.entries[m * (self.n_max + 1) + n])
                    .collect()
            })
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for RateTable {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<RateTable> {
        RateTable::new(rows)
    }
}

impl From<RateTable> for Vec<Vec<f64>> {
    fn from(t: RateTable) -> Vec<Vec<f64>> {
        t.to_rows()
    }
}

/// Full dynamical specification: rate table, left-hop asymmetry q, and the
/// per-site rate parameters `x_l > 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateSpec {
    pub u: RateTable,
    pub q: f64,
    pub x: Vec<f64>,
}

impl RateSpec {
    pub fn new(u: RateTable, q: f64, x: Vec<f64>) -> Result<RateSpec> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::Domain(format!("q = {q} must be finite and >= 0")));
        }
        if x.is_empty() {
            return Err(Error::InvalidLattice);
        }
        if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain(
                "all site parameters x_l must be positive".into(),
            ));
        }
        Ok(RateSpec { u, q, x })
    }

    /// Number of sites L.
    pub fn l(&self) -> usize {
        self.x.len()
    }

    /// Homogeneous spec: all site parameters 1.
    pub fn homogeneous(u: RateTable, q: f64, l: usize) -> Result<RateSpec> {
        RateSpec::new(u, q, vec![1.0; l])
    }

    /// Cyclically rotate the site parameters right by `shifts`; u and q are
    /// untouched. One shift sends x = (x_1,...,x_L) to (x_L, x_1,...,x_{L-1}).
    pub fn rotate(&self, shifts: usize) -> RateSpec {
        let l = self.x.len();
        let s = shifts % l;
        let mut x = Vec::with_capacity(l);
        for i in 0..l {
            x.push(self.x[(i + l - s) % l]);
        }
        RateSpec {
            u: self.u.clone(),
            q: self.q,
            x,
        }
    }
}

/// Direction of a hop on the ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

/// A single legal hop out of a configuration.
#[derive(Clone, Debug)]
pub struct Transition {
    /// Departure site (1-based).
    pub from: usize,
    /// Arrival site (1-based).
    pub to: usize,
    pub direction: Direction,
    pub rate: f64,
    pub target: Configuration,
}

/// A single legal hop into a configuration.
#[derive(Clone, Debug)]
pub struct IncomingTransition {
    /// Departure site in the source configuration (1-based).
    pub from: usize,
    /// Arrival site (1-based); occupied in the destination.
    pub to: usize,
    pub direction: Direction,
    pub rate: f64,
    pub source: Configuration,
}

/// All legal hops out of `cfg` under `spec`, zero-rate hops omitted.
///
/// From an occupied site the rightward targets run up to and including the
/// next occupied site; leftward targets (emitted only when q > 0) run down
/// to and including the previous occupied site. A lone occupied site can
/// reach every other site in either direction.
pub fn enumerate_transitions(cfg: &Configuration, spec: &RateSpec) -> Result<Vec<Transition>> {
    if cfg.len() != spec.l() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} sites, spec has {}",
            cfg.len(),
            spec.l()
        )));
    }
    let mut out = Vec::new();
    for s in cfg.occupied_sites() {
        let m = cfg.occupation(s);
        // Rightward walk until the next occupied site (inclusive).
        let mut l = cfg.next_site(s);
        while l != s {
            let n = cfg.occupation(l);
            let rate = spec.x[l - 1] * spec.u.get(m, n)?;
            if rate > 0.0 {
                out.push(Transition {
                    from: s,
                    to: l,
                    direction: Direction::Right,
                    rate,
                    target: cfg.apply_move(s, l)?,
                });
            }
            if n > 0 {
                break;
            }
            l = cfg.next_site(l);
        }
        if spec.q > 0.0 {
            let mut l = cfg.prev_site(s);
            while l != s {
                let n = cfg.occupation(l);
                let rate = spec.q * spec.x[l - 1] * spec.u.get(m, n)?;
                if rate > 0.0 {
                    out.push(Transition {
                        from: s,
                        to: l,
                        direction: Direction::Left,
                        rate,
                        target: cfg.apply_move(s, l)?,
                    });
                }
                if n > 0 {
                    break;
                }
                l = cfg.prev_site(l);
            }
        }
    }
    Ok(out)
}

/// All legal hops into `cfg` under `spec`, zero-rate hops omitted.
///
/// A hop into `cfg` arriving at occupied site t and departing from k exists
/// exactly when every site strictly between k and t (in the hop direction)
/// is empty in `cfg`; its rate is `x_t * u(eta_k + 1, eta_t - 1)` (times q
/// for left hops).
pub fn incoming_transitions(
    cfg: &Configuration,
    spec: &RateSpec,
) -> Result<Vec<IncomingTransition>> {
    if cfg.len() != spec.l() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} sites, spec has {}",
            cfg.len(),
            spec.l()
        )));
    }
    let mut inc = Vec::new();
    for t in cfg.occupied_sites() {
        let n_t = cfg.occupation(t);
        // Right hop k -> t: walk k leftwards; the first occupied k ends the walk.
        let mut k = cfg.prev_site(t);
        while k != t {
            let rate = spec.x[t - 1] * spec.u.get(cfg.occupation(k) + 1, n_t - 1)?;
            if rate > 0.0 {
                inc.push(IncomingTransition {
                    from: k,
                    to: t,
                    direction: Direction::Right,
                    rate,
                    source: cfg.apply_move(t, k)?,
                });
            }
            if cfg.occupation(k) > 0 {
                break;
            }
            k = cfg.prev_site(k);
        }
        if spec.q > 0.0 {
            let mut k = cfg.next_site(t);
            while k != t {
                let rate = spec.q * spec.x[t - 1] * spec.u.get(cfg.occupation(k) + 1, n_t - 1)?;
                if rate > 0.0 {
                    inc.push(IncomingTransition {
                        from: k,
                        to: t,
                        direction: Direction::Left,
                        rate,
                        source: cfg.apply_move(t, k)?,
                    });
                }
                if cfg.occupation(k) > 0 {
                    break;
                }
                k = cfg.next_site(k);
            }
        }
    }
    Ok(inc)
}

/// Sparse CTMC generator over a ranked state space. Rows hold aggregated
/// off-diagonal rates; the diagonal is minus the row sum.
#[derive(Clone, Debug)]
pub struct Generator {
    size: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Generator {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Off-diagonal entries of row i, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Diagonal entry: minus the total exit rate.
    pub fn diagonal(&self, i: usize) -> f64 {
        -self.rows[i].iter().map(|&(_, r)| r).sum::<f64>()
    }

    /// Largest off-diagonal rate (used to scale residual tolerances).
    pub fn max_rate(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|row| row.iter().map(|&(_, r)| r))
            .fold(0.0, f64::max)
    }

    /// Row vector product `sigma Q` (the net probability flow into each state).
    pub fn apply_left(&self, sigma: &[f64]) -> Vec<f64> {
        assert_eq!(sigma.len(), self.size);
        let mut out = vec![0.0; self.size];
        for (i, row) in self.rows.iter().enumerate() {
            let mut exit = 0.0;
            for &(j, r) in row {
                out[j] += sigma[i] * r;
                exit += r;
            }
            out[i] -= sigma[i] * exit;
        }
        out
    }

    /// Coordinate-list CSV `row,col,rate` of all entries including the diagonal.
    pub fn write_coo_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "row,col,rate")?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut exit = 0.0;
            for &(j, r) in row {
                writeln!(w, "{i},{j},{r}")?;
                exit += r;
            }
            if exit != 0.0 || self.size == 1 {
                writeln!(w, "{i},{i},{}", -exit)?;
            }
        }
        Ok(())
    }

    /// Strongly connected components of the positive-rate digraph (Tarjan,
    /// iterative). Irreducible generators have exactly one.
    pub fn strongly_connected_components(&self) -> usize {
        let n = self.size;
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        let mut next_index = 0usize;
        let mut components = 0usize;
        // Explicit DFS frames: (node, edge cursor).
        let mut frames: Vec<(usize, usize)> = Vec::new();

        for start in 0..n {
            if index[start] != usize::MAX {
                continue;
            }
            frames.push((start, 0));
            index[start] = next_index;
            low[start] = next_index;
            next_index += 1;
            stack.push(start);
            on_stack[start] = true;

            while let Some(&mut (v, ref mut cursor)) = frames.last_mut() {
                if *cursor < self.rows[v].len() {
                    let (w, _) = self.rows[v][*cursor];
                    *cursor += 1;
                    if index[w] == usize::MAX {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    frames.pop();
                    if let Some(&mut (parent, _)) = frames.last_mut() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        components += 1;
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            if w == v {
                                break;
                            }
                        }
                    }
                }
            }
        }
        components
    }
}

/// Assemble the generator of the process on `space` under `spec`.
pub fn build_generator(space: &StateSpace, spec: &RateSpec) -> Result<Generator> {
    if spec.l() != space.l() {
        return Err(Error::DimensionMismatch(format!(
            "spec has {} site parameters, state space has {} sites",
            spec.l(),
            space.l()
        )));
    }
    if spec.u.n_max() < space.n() {
        return Err(Error::RateTableOverrun {
            m: space.n(),
            n: 0,
            n_max: spec.u.n_max(),
        });
    }
    let size = space.size();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    for i in 0..size {
        let cfg = space.unrank(i);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for t in enumerate_transitions(&cfg, spec)? {
            let j = space.rank(&t.target)?;
            entries.push((j, t.rate));
        }
        entries.sort_by_key(|&(j, _)| j);
        // Parallel hops to the same target sum into one entry.
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (j, r) in entries {
            match merged.last_mut() {
                Some((jj, rr)) if *jj == j => *rr += r,
                _ => merged.push((j, r)),
            }
        }
        rows[i] = merged;
    }
    Ok(Generator { size, rows })
}

/// Incoming/outgoing right/left probability currents of one configuration
/// under a distribution `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurrentReport {
    pub irc: f64,
    pub orc: f64,
    pub ilc: f64,
    pub olc: f64,
}

impl CurrentReport {
    /// Net master-equation residual `(irc - orc) + (ilc - olc)`.
    pub fn residual(&self) -> f64 {
        (self.irc - self.orc) + (self.ilc - self.olc)
    }
}

/// Split the probability currents at `cfg` by direction.
pub fn current_decomposition(
    sigma: &[f64],
    cfg: &Configuration,
    spec: &RateSpec,
    space: &StateSpace,
) -> Result<CurrentReport> {
    if sigma.len() != space.size() {
        return Err(Error::DimensionMismatch(
            "distribution length does not match state space".into(),
        ));
    }
    let p = sigma[space.rank(cfg)?];
    let mut orc = 0.0;
    let mut olc = 0.0;
    for t in enumerate_transitions(cfg, spec)? {
        match t.direction {
            Direction::Right => orc += p * t.rate,
            Direction::Left => olc += p * t.rate,
        }
    }
    let mut irc = 0.0;
    let mut ilc = 0.0;
    for t in incoming_transitions(cfg, spec)? {
        let ps = sigma[space.rank(&t.source)?];
        match t.direction {
            Direction::Right => irc += ps * t.rate,
            Direction::Left => ilc += ps * t.rate,
        }
    }
    Ok(CurrentReport { irc, orc, ilc, olc })
}

/// Edges a hop crosses: every ring edge on the cyclic path from `from` to
/// `to` in the hop direction. Edge e (1-based) joins sites e and e+1 mod L.
fn crossed_edges(l: usize, from: usize, to: usize, direction: Direction) -> Vec<usize> {
    let mut edges = Vec::new();
    match direction {
        Direction::Right => {
            let mut s = from;
            while s != to {
                edges.push(s);
                s = s % l + 1;
            }
        }
        Direction::Left => {
            let mut s = from;
            while s != to {
                let prev = if s == 1 { l } else { s - 1 };
                edges.push(prev);
                s = prev;
            }
        }
    }
    edges
}

/// Signed stationary currents across all L ring edges under `sigma`.
///
/// Rightward crossings count positive, leftward negative; long hops
/// contribute to every edge along their path.
pub fn edge_currents(sigma: &[f64], spec: &RateSpec, space: &StateSpace) -> Result<Vec<f64>> {
    if sigma.len() != space.size() {
        return Err(Error::DimensionMismatch(
            "distribution length does not match state space".into(),
        ));
    }
    let l = space.l();
    let mut currents = vec![0.0; l];
    for i in 0..space.size() {
        let cfg = space.unrank(i);
        let p = sigma[i];
        for t in enumerate_transitions(&cfg, spec)? {
            let sign = match t.direction {
                Direction::Right => 1.0,
                Direction::Left => -1.0,
            };
            for e in crossed_edges(l, t.from, t.to, t.direction) {
                currents[e - 1] += sign * p * t.rate;
            }
        }
    }
    Ok(currents)
}

/// Signed stationary current across the single edge (`edge`, `edge`+1).
pub fn edge_current(
    sigma: &[f64],
    spec: &RateSpec,
    space: &StateSpace,
    edge: usize,
) -> Result<f64> {
    if space.l() < 2 {
        return Err(Error::NoEdge);
    }
    if edge < 1 || edge > space.l() {
        return Err(Error::SiteOutOfRange {
            site: edge,
            l: space.l(),
        });
    }
    Ok(edge_currents(sigma, spec, space)?[edge - 1])
}
