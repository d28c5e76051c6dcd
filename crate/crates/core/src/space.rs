//! Finite discrete-time filtered probability spaces: outcome sets with
//! weights, refining partition sequences, measurability-tagged processes,
//! conditional expectations, and optional/predictable projections.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::HashMap;
use std::hash::Hash;

/// Measurability contract carried by a [`Process`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Tag {
    Adapted,
    Predictable,
    Raw,
}

/// A partition of the outcome set `{0, …, n-1}` into disjoint atoms.
/// Atoms are ordered by their smallest member, so partitions derived from
/// a canonically ordered outcome set stay canonically ordered themselves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    /// Groups outcomes sharing a key into atoms, ordered by first occurrence.
    pub fn from_keys<K: Eq + Hash>(keys: &[K]) -> Partition {
        let mut index_of_key: HashMap<&K, usize> = HashMap::new();
        let mut atoms: Vec<Vec<usize>> = Vec::new();
        let mut atom_of = Vec::with_capacity(keys.len());
        for (outcome, key) in keys.iter().enumerate() {
            let next = atoms.len();
            let idx = *index_of_key.entry(key).or_insert(next);
            if idx == atoms.len() {
                atoms.push(Vec::new());
            }
            atoms[idx].push(outcome);
            atom_of.push(idx);
        }
        Partition { atoms, atom_of }
    }

    /// The one-atom partition (no information).
    pub fn trivial(n_outcomes: usize) -> Partition {
        Partition {
            atoms: vec![(0..n_outcomes).collect()],
            atom_of: vec![0; n_outcomes],
        }
    }

    /// The partition into singletons (full information).
    pub fn discrete(n_outcomes: usize) -> Partition {
        Partition {
            atoms: (0..n_outcomes).map(|i| vec![i]).collect(),
            atom_of: (0..n_outcomes).collect(),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.atom_of.len()
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom_of(&self, outcome: usize) -> usize {
        self.atom_of[outcome]
    }

    pub fn atom_members(&self, atom: usize) -> &[usize] {
        &self.atoms[atom]
    }

    /// True when every atom of `self` is contained in one atom of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n_outcomes() != coarser.n_outcomes() {
            return false;
        }
        self.atoms.iter().all(|atom| {
            let target = coarser.atom_of[atom[0]];
            atom.iter().all(|&o| coarser.atom_of[o] == target)
        })
    }

    /// True when `x` is constant on every atom.
    pub fn is_measurable<T: PartialEq>(&self, x: &[T]) -> bool {
        self.atoms.iter().all(|atom| {
            let first = &x[atom[0]];
            atom.iter().all(|&o| x[o] == *first)
        })
    }
}

/// A refining sequence of partitions indexed by times `0..=horizon`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    partitions: Vec<Partition>,
}

impl Filtration {
    pub fn new(partitions: Vec<Partition>) -> Result<Filtration> {
        if partitions.is_empty() {
            return Err(Error::Space("filtration needs at least time 0".into()));
        }
        let n = partitions[0].n_outcomes();
        for (t, p) in partitions.iter().enumerate() {
            if p.n_outcomes() != n {
                return Err(Error::Space(format!(
                    "partition at t={t} covers {} outcomes, expected {n}",
                    p.n_outcomes()
                )));
            }
            if t > 0 && !p.refines(&partitions[t - 1]) {
                return Err(Error::Space(format!(
                    "partition at t={t} does not refine the one at t={}",
                    t - 1
                )));
            }
        }
        Ok(Filtration { partitions })
    }

    pub fn horizon(&self) -> usize {
        self.partitions.len() - 1
    }

    pub fn n_outcomes(&self) -> usize {
        self.partitions[0].n_outcomes()
    }

    pub fn at(&self, t: usize) -> &Partition {
        &self.partitions[t]
    }

    /// Partition that conditions values at time `t` for a predictable claim:
    /// the one at `t-1`, except at `t=0` where it is the one at `0`.
    pub fn predictable_at(&self, t: usize) -> &Partition {
        &self.partitions[t.saturating_sub(1)]
    }
}

/// A finite filtered probability space: weighted outcomes plus the market
/// filtration. The outcome order is the canonical order used everywhere.
#[derive(Clone, Debug)]
pub struct FilteredSpace<T: Scalar> {
    horizon: usize,
    weights: Vec<T>,
    filtration: Filtration,
    labels: Vec<String>,
}

impl<T: Scalar> FilteredSpace<T> {
    pub fn new(
        horizon: usize,
        weights: Vec<T>,
        filtration: Filtration,
        labels: Vec<String>,
    ) -> Result<FilteredSpace<T>> {
        if horizon < 1 {
            return Err(Error::Space("horizon must be at least 1".into()));
        }
        if filtration.horizon() != horizon {
            return Err(Error::Space(format!(
                "filtration covers 0..={}, expected 0..={horizon}",
                filtration.horizon()
            )));
        }
        if weights.len() != filtration.n_outcomes() {
            return Err(Error::Space(format!(
                "{} weights for {} outcomes",
                weights.len(),
                filtration.n_outcomes()
            )));
        }
        if labels.len() != weights.len() {
            return Err(Error::Space("one label per outcome required".into()));
        }
        let space = FilteredSpace {
            horizon,
            weights,
            filtration,
            labels,
        };
        let report = validate_space(&space);
        if !report.is_empty() {
            return Err(Error::Space(report.join("; ")));
        }
        Ok(space)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_outcomes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, outcome: usize) -> &T {
        &self.weights[outcome]
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn atom_weight(&self, atom: &[usize]) -> T {
        let mut acc = T::zero();
        for &o in atom {
            acc = acc + self.weights[o].clone();
        }
        acc
    }

    /// Expectation of `x` under the outcome weights.
    pub fn expectation(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (o, v) in x.iter().enumerate() {
            acc = acc + self.weights[o].clone() * v.clone();
        }
        acc
    }

    /// Conditional expectation of `x` given a partition, broadcast back to
    /// the outcome set (constant on each atom).
    pub fn condition(&self, x: &[T], partition: &Partition) -> Vec<T> {
        assert_eq!(x.len(), self.n_outcomes(), "variable/outcome mismatch");
        let mut out = vec![T::zero(); x.len()];
        for atom in partition.atoms() {
            let mut num = T::zero();
            let mut den = T::zero();
            for &o in atom {
                num = num + self.weights[o].clone() * x[o].clone();
                den = den + self.weights[o].clone();
            }
            let avg = num / den;
            for &o in atom {
                out[o] = avg.clone();
            }
        }
        out
    }

    /// Conditional expectation given the market filtration at time `t`.
    pub fn condition_at(&self, x: &[T], t: usize) -> Vec<T> {
        self.condition(x, self.filtration.at(t))
    }
}

/// Spec'd diagnostic: every violated space invariant, with its location.
/// Empty means the space is valid.
pub fn validate_space<T: Scalar>(space: &FilteredSpace<T>) -> Vec<String> {
    let mut report = Vec::new();
    for (o, w) in space.weights.iter().enumerate() {
        if !w.is_positive() {
            report.push(format!("weight of outcome {o} is not strictly positive"));
        }
    }
    let mut total = T::zero();
    for w in &space.weights {
        total = total + w.clone();
    }
    if !total.eq_within(&T::one(), 1e-12, &T::one()) {
        report.push(format!("weights sum to {} instead of 1", total.render()));
    }
    let flt = &space.filtration;
    for t in 0..=flt.horizon() {
        let p = flt.at(t);
        let mut seen = vec![false; p.n_outcomes()];
        for atom in p.atoms() {
            for &o in atom {
                if seen[o] {
                    report.push(format!("outcome {o} covered twice at t={t}"));
                }
                seen[o] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            report.push(format!("partition at t={t} does not cover all outcomes"));
        }
        if t > 0 && !p.refines(flt.at(t - 1)) {
            report.push(format!("partition at t={t} does not refine t={}", t - 1));
        }
    }
    report
}

/// A time-indexed outcome-valued array with a measurability contract.
/// Values are indexed `values[t][outcome]`, `t` in `0..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Process<T: Scalar> {
    values: Vec<Vec<T>>,
    tag: Tag,
}

fn check_dims<T: Scalar>(values: &[Vec<T>], horizon: usize, n_outcomes: usize) -> Result<()> {
    if values.len() != horizon + 1 {
        return Err(Error::Dimension(format!(
            "process has {} time slices, expected {}",
            values.len(),
            horizon + 1
        )));
    }
    for (t, slice) in values.iter().enumerate() {
        if slice.len() != n_outcomes {
            return Err(Error::Dimension(format!(
                "slice at t={t} has {} entries, expected {n_outcomes}",
                slice.len()
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> Process<T> {
    /// Unconstrained values (pre-projection inputs).
    pub fn raw(values: Vec<Vec<T>>, horizon: usize, n_outcomes: usize) -> Result<Process<T>> {
        check_dims(&values, horizon, n_outcomes)?;
        Ok(Process {
            values,
            tag: Tag::Raw,
        })
    }

    /// Values constant on each atom of the filtration at the same time;
    /// violating slices are rejected.
    pub fn adapted(values: Vec<Vec<T>>, filtration: &Filtration) -> Result<Process<T>> {
        check_dims(&values, filtration.horizon(), filtration.n_outcomes())?;
        for (t, slice) in values.iter().enumerate() {
            if !filtration.at(t).is_measurable(slice) {
                return Err(Error::Measurability(format!(
                    "adapted tag rejected: slice at t={t} varies within an atom"
                )));
            }
        }
        Ok(Process {
            values,
            tag: Tag::Adapted,
        })
    }

    /// Values at `t ≥ 1` constant on each atom at `t-1` (at 0 on atoms at 0);
    /// violating slices are rejected.
    pub fn predictable(values: Vec<Vec<T>>, filtration: &Filtration) -> Result<Process<T>> {
        check_dims(&values, filtration.horizon(), filtration.n_outcomes())?;
        for (t, slice) in values.iter().enumerate() {
            if !filtration.predictable_at(t).is_measurable(slice) {
                return Err(Error::Measurability(format!(
                    "predictable tag rejected: slice at t={t} varies within a t-1 atom"
                )));
            }
        }
        Ok(Process {
            values,
            tag: Tag::Predictable,
        })
    }

    /// The constant process `c` (adapted and predictable; tagged adapted).
    pub fn constant(c: T, horizon: usize, n_outcomes: usize) -> Process<T> {
        Process {
            values: vec![vec![c; n_outcomes]; horizon + 1],
            tag: Tag::Adapted,
        }
    }

    pub fn zero(horizon: usize, n_outcomes: usize) -> Process<T> {
        Self::constant(T::zero(), horizon, n_outcomes)
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn n_outcomes(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn at(&self, t: usize) -> &[T] {
        &self.values[t]
    }

    pub fn value(&self, t: usize, outcome: usize) -> &T {
        &self.values[t][outcome]
    }

    /// Increment `X_t − X_{t−1}`; zero at `t = 0`.
    pub fn delta(&self, t: usize, outcome: usize) -> T {
        if t == 0 {
            T::zero()
        } else {
            self.values[t][outcome].clone() - self.values[t - 1][outcome].clone()
        }
    }

    pub fn terminal(&self) -> &[T] {
        self.values.last().expect("non-empty by construction")
    }

    /// Tags values adapted by construction (sums/products of conditioned
    /// slices); bypasses re-checking, for internal derivations only.
    pub(crate) fn into_adapted_unchecked(self) -> Process<T> {
        Process {
            values: self.values,
            tag: Tag::Adapted,
        }
    }

    /// Tags values predictable by construction; internal derivations only.
    pub(crate) fn into_predictable_unchecked(self) -> Process<T> {
        Process {
            values: self.values,
            tag: Tag::Predictable,
        }
    }

    /// Re-tags the process after verifying the claimed contract.
    pub fn with_tag(self, tag: Tag, filtration: &Filtration) -> Result<Process<T>> {
        match tag {
            Tag::Raw => Ok(Process {
                values: self.values,
                tag: Tag::Raw,
            }),
            Tag::Adapted => Process::adapted(self.values, filtration),
            Tag::Predictable => Process::predictable(self.values, filtration),
        }
    }

    fn zip_with(&self, other: &Process<T>, f: impl Fn(T, T) -> T) -> Process<T> {
        assert_eq!(self.values.len(), other.values.len(), "time mismatch");
        assert_eq!(self.n_outcomes(), other.n_outcomes(), "outcome mismatch");
        let tag = if self.tag == other.tag { self.tag } else { Tag::Raw };
        Process {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| f(x.clone(), y.clone()))
                        .collect()
                })
                .collect(),
            tag,
        }
    }

    pub fn add(&self, other: &Process<T>) -> Process<T> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Process<T>) -> Process<T> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product (tag degrades to the weaker of the two).
    pub fn mul(&self, other: &Process<T>) -> Process<T> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn neg(&self) -> Process<T> {
        Process {
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|v| -v.clone()).collect())
                .collect(),
            tag: self.tag,
        }
    }

    pub fn scale(&self, c: &T) -> Process<T> {
        Process {
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|v| c.clone() * v.clone()).collect())
                .collect(),
            tag: self.tag,
        }
    }

    /// `X_{t∧τ}` — the process stopped at a random time. Stopping an
    /// F-adapted process generally leaves only G-measurability, so the
    /// result is returned raw; re-tag under the intended filtration.
    pub fn stopped(&self, tau: &RandomTime) -> Process<T> {
        let horizon = self.horizon();
        let values = (0..=horizon)
            .map(|t| {
                (0..self.n_outcomes())
                    .map(|o| {
                        let cut = match tau.at(o) {
                            EventTime::At(s) => t.min(s),
                            EventTime::Beyond => t,
                        };
                        self.values[cut][o].clone()
                    })
                    .collect()
            })
            .collect();
        Process {
            values,
            tag: Tag::Raw,
        }
    }

    /// `X_{t∧cap}` — the process frozen at a deterministic time. Freezing
    /// preserves both the adapted and the predictable contract.
    pub fn capped_at(&self, cap: usize) -> Process<T> {
        let values = (0..self.values.len())
            .map(|t| self.values[t.min(cap)].clone())
            .collect();
        Process {
            values,
            tag: self.tag,
        }
    }

    /// The left-shifted path `t ↦ X_{t−1}` (value at 0 repeated), raw.
    pub fn lagged(&self) -> Process<T> {
        let mut values = Vec::with_capacity(self.values.len());
        values.push(self.values[0].clone());
        for t in 1..self.values.len() {
            values.push(self.values[t - 1].clone());
        }
        Process {
            values,
            tag: Tag::Raw,
        }
    }
}

/// Optional or predictable projection of a raw process.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProjectionMode {
    Optional,
    Predictable,
}

/// Projects each time slice onto the filtration: optional mode conditions
/// the slice at `t` on atoms at `t`; predictable mode on atoms at `t-1`
/// (at `t=0` on atoms at 0). The returned tag matches the mode.
pub fn project<T: Scalar>(
    space: &FilteredSpace<T>,
    x: &Process<T>,
    mode: ProjectionMode,
    filtration: &Filtration,
) -> Process<T> {
    let values: Vec<Vec<T>> = (0..=x.horizon())
        .map(|t| {
            let partition = match mode {
                ProjectionMode::Optional => filtration.at(t),
                ProjectionMode::Predictable => filtration.predictable_at(t),
            };
            space.condition(x.at(t), partition)
        })
        .collect();
    let tag = match mode {
        ProjectionMode::Optional => Tag::Adapted,
        ProjectionMode::Predictable => Tag::Predictable,
    };
    Process { values, tag }
}

/// A time in `{1, …, N} ∪ {beyond}`; `Beyond` encodes survival past the
/// horizon (and the role of `+∞`).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub enum EventTime {
    At(usize),
    Beyond,
}

impl EventTime {
    pub fn le(&self, t: usize) -> bool {
        matches!(self, EventTime::At(s) if *s <= t)
    }

    pub fn eq_time(&self, t: usize) -> bool {
        matches!(self, EventTime::At(s) if *s == t)
    }

    pub fn gt(&self, t: usize) -> bool {
        !self.le(t)
    }

    pub fn ge(&self, t: usize) -> bool {
        t == 0 || self.gt(t - 1)
    }

    /// `t ∧ τ` as a deterministic time index.
    pub fn min_with(&self, t: usize) -> usize {
        match self {
            EventTime::At(s) => t.min(*s),
            EventTime::Beyond => t,
        }
    }
}

/// The death time τ as a total map from outcomes to event times in
/// `{1, …, N} ∪ {beyond}` (no death at time 0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomTime {
    times: Vec<EventTime>,
}

impl RandomTime {
    pub fn new(times: Vec<EventTime>, horizon: usize) -> Result<RandomTime> {
        for (o, time) in times.iter().enumerate() {
            if let EventTime::At(s) = time {
                if *s == 0 || *s > horizon {
                    return Err(Error::Space(format!(
                        "time at outcome {o} is {s}, expected 1..={horizon} or beyond"
                    )));
                }
            }
        }
        Ok(RandomTime { times })
    }

    pub fn at(&self, outcome: usize) -> EventTime {
        self.times[outcome]
    }

    pub fn times(&self) -> &[EventTime] {
        &self.times
    }

    pub fn n_outcomes(&self) -> usize {
        self.times.len()
    }

    fn indicator<T: Scalar>(&self, pred: impl Fn(EventTime) -> bool) -> Vec<T> {
        self.times
            .iter()
            .map(|&s| if pred(s) { T::one() } else { T::zero() })
            .collect()
    }

    /// 1{τ > t} per outcome.
    pub fn ind_gt<T: Scalar>(&self, t: usize) -> Vec<T> {
        self.indicator(|s| s.gt(t))
    }

    /// 1{τ ≥ t} per outcome.
    pub fn ind_ge<T: Scalar>(&self, t: usize) -> Vec<T> {
        self.indicator(|s| s.ge(t))
    }

    /// 1{τ = t} per outcome.
    pub fn ind_eq<T: Scalar>(&self, t: usize) -> Vec<T> {
        self.indicator(|s| s.eq_time(t))
    }

    /// 1{τ ≤ t} per outcome.
    pub fn ind_le<T: Scalar>(&self, t: usize) -> Vec<T> {
        self.indicator(|s| s.le(t))
    }
}
