//! Product-space construction: a market tree (the traded-asset filtration)
//! combined with a conditional death law yields the filtered space, the
//! death time, and the asset process.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{EventTime, FilteredSpace, Filtration, Partition, Process, RandomTime};

/// One node of a market tree. Branch probability is measured from the
/// parent (the root carries 1); the label names the branch taken.
#[derive(Clone, Debug)]
pub struct MarketNode<T: Scalar> {
    pub parent: Option<usize>,
    pub prob: T,
    pub asset: T,
    pub label: String,
}

/// A rooted tree of market states, breadth-first ordered, with every leaf
/// at depth `horizon`. Leaves in order are the market outcomes.
#[derive(Clone, Debug)]
pub struct MarketTree<T: Scalar> {
    horizon: usize,
    nodes: Vec<MarketNode<T>>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

impl<T: Scalar> MarketTree<T> {
    /// Validates and indexes an explicit node list. Nodes must be listed
    /// parent-before-child; node 0 is the root.
    pub fn new(horizon: usize, nodes: Vec<MarketNode<T>>) -> Result<MarketTree<T>> {
        if horizon < 1 {
            return Err(Error::Space("market tree needs horizon >= 1".into()));
        }
        if nodes.is_empty() || nodes[0].parent.is_some() {
            return Err(Error::Space("node 0 must be the parentless root".into()));
        }
        let mut depth = vec![0usize; nodes.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node.parent {
                None => {
                    if i != 0 {
                        return Err(Error::Space(format!("node {i} lacks a parent")));
                    }
                }
                Some(p) => {
                    if p >= i {
                        return Err(Error::Space(format!(
                            "node {i} listed before its parent {p}"
                        )));
                    }
                    depth[i] = depth[p] + 1;
                    if depth[i] > horizon {
                        return Err(Error::Space(format!(
                            "node {i} sits below depth {horizon}"
                        )));
                    }
                    children[p].push(i);
                }
            }
            if !node.prob.is_positive() {
                return Err(Error::Space(format!(
                    "zero-probability outcome requested: branch into node {i}"
                )));
            }
        }
        for (i, kids) in children.iter().enumerate() {
            if depth[i] < horizon {
                if kids.is_empty() {
                    return Err(Error::Space(format!(
                        "node {i} at depth {} has no successors",
                        depth[i]
                    )));
                }
                let mut total = T::zero();
                for &k in kids {
                    total = total + nodes[k].prob.clone();
                }
                if !total.eq_within(&T::one(), 1e-12, &T::one()) {
                    return Err(Error::Space(format!(
                        "successor probabilities of node {i} sum to {}",
                        total.render()
                    )));
                }
            } else if !kids.is_empty() {
                return Err(Error::Space(format!("leaf node {i} has successors")));
            }
        }
        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&i| depth[i] == horizon)
            .collect();
        Ok(MarketTree {
            horizon,
            nodes,
            depth,
            children,
            leaves,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[MarketNode<T>] {
        &self.nodes
    }

    pub fn node_depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn children_of(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Leaf node ids in breadth-first order — the canonical market outcomes.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Ancestor of `node` at the given depth.
    pub fn ancestor(&self, node: usize, at_depth: usize) -> usize {
        let mut cur = node;
        while self.depth[cur] > at_depth {
            cur = self.nodes[cur].parent.expect("depth > 0 has a parent");
        }
        cur
    }

    /// Probability of reaching `node` from the root.
    pub fn reach_prob(&self, node: usize) -> T {
        let mut p = self.nodes[node].prob.clone();
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            if parent != 0 {
                p = p * self.nodes[parent].prob.clone();
            }
            cur = parent;
        }
        if node == 0 {
            T::one()
        } else {
            p
        }
    }

    /// Branch labels concatenated along the path to `node`.
    pub fn path_label(&self, node: usize) -> String {
        let mut parts = Vec::new();
        let mut cur = node;
        loop {
            match self.nodes[cur].parent {
                Some(parent) => {
                    parts.push(self.nodes[cur].label.clone());
                    cur = parent;
                }
                None => break,
            }
        }
        parts.reverse();
        parts.join("")
    }

    /// A binomial path tree: every node branches up (factor `up`) or down
    /// (factor `down`) with probability `p` / `1-p`; asset values are
    /// rescaled each step by the one-step mean so the result is a
    /// martingale for any positive-mean parameter choice.
    pub fn recombining_binomial(
        horizon: usize,
        s0: T,
        up: T,
        down: T,
        p: T,
    ) -> Result<MarketTree<T>> {
        if !p.is_positive() || !(T::one() - p.clone()).is_positive() {
            return Err(Error::Space(
                "zero-probability outcome requested: p must lie strictly inside (0,1)".into(),
            ));
        }
        let mean = p.clone() * up.clone() + (T::one() - p.clone()) * down.clone();
        if !mean.is_positive() {
            return Err(Error::Space(
                "one-step mean factor must be positive to normalize".into(),
            ));
        }
        let up_n = up / mean.clone();
        let down_n = down / mean;
        let mut nodes = vec![MarketNode {
            parent: None,
            prob: T::one(),
            asset: s0,
            label: String::new(),
        }];
        let mut level = vec![0usize];
        for _ in 1..=horizon {
            let mut next = Vec::new();
            for &parent in &level {
                let base = nodes[parent].asset.clone();
                for (factor, prob, label) in [
                    (up_n.clone(), p.clone(), "u"),
                    (down_n.clone(), T::one() - p.clone(), "d"),
                ] {
                    nodes.push(MarketNode {
                        parent: Some(parent),
                        prob,
                        asset: base.clone() * factor,
                        label: label.into(),
                    });
                    next.push(nodes.len() - 1);
                }
            }
            level = next;
        }
        MarketTree::new(horizon, nodes)
    }

    /// Product of two driver trees observed simultaneously: market states
    /// are pairs, branch probabilities multiply (independent drivers), and
    /// the traded asset is read from the first driver.
    pub fn product(a: &MarketTree<T>, b: &MarketTree<T>) -> Result<MarketTree<T>> {
        if a.horizon != b.horizon {
            return Err(Error::Space("driver horizons differ".into()));
        }
        let mut nodes = vec![MarketNode {
            parent: None,
            prob: T::one(),
            asset: a.nodes[0].asset.clone(),
            label: String::new(),
        }];
        // (a node, b node) -> product node id, per level.
        let mut level: Vec<(usize, usize, usize)> = vec![(0, 0, 0)];
        for _ in 1..=a.horizon {
            let mut next = Vec::new();
            for &(pa, pb, pid) in &level {
                for &ca in &a.children[pa] {
                    for &cb in &b.children[pb] {
                        nodes.push(MarketNode {
                            parent: Some(pid),
                            prob: a.nodes[ca].prob.clone() * b.nodes[cb].prob.clone(),
                            asset: a.nodes[ca].asset.clone(),
                            label: format!("{}{}", a.nodes[ca].label, b.nodes[cb].label),
                        });
                        next.push((ca, cb, nodes.len() - 1));
                    }
                }
            }
            level = next;
        }
        MarketTree::new(a.horizon, nodes)
    }
}

/// Conditional law of the death time given the full market path.
#[derive(Clone, Debug)]
pub enum DeathLaw<T: Scalar> {
    /// One row for every path: probabilities of death at 1..N, then of
    /// surviving past the horizon.
    IndependentTable { probs: Vec<T> },
    /// Death at a path-determined time, observable at that time: the set
    /// of paths dying at `s` must be a union of depth-`s` subtrees.
    FStoppingRule { leaf_times: Vec<EventTime> },
    /// Per-path per-step death intensities in [0,1]; the row is the product
    /// law `P(τ=t) = h_t·Π_{s<t}(1-h_s)`, `P(beyond) = Π(1-h_s)`.
    HazardModulated { leaf_hazards: Vec<Vec<T>> },
    /// Fully explicit row-stochastic law of τ per market path.
    ExplicitMatrix { rows: Vec<Vec<T>> },
}

/// A fully built scenario: the product space, the death time, the asset,
/// and the raw market/death data kept for serialization and round-trips.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar> {
    pub market: MarketTree<T>,
    pub death_rows: Vec<Vec<T>>,
    pub space: FilteredSpace<T>,
    pub tau: RandomTime,
    pub asset: Process<T>,
}

fn check_row<T: Scalar>(row: &[T], horizon: usize, leaf: usize) -> Result<()> {
    if row.len() != horizon + 1 {
        return Err(Error::Space(format!(
            "death row for path {leaf} has {} entries, expected {}",
            row.len(),
            horizon + 1
        )));
    }
    let mut total = T::zero();
    for v in row {
        if v.is_positive() || v.is_zero() {
            total = total + v.clone();
        } else {
            return Err(Error::Space(format!(
                "non-stochastic death row for path {leaf}: negative entry"
            )));
        }
    }
    if !total.eq_within(&T::one(), 1e-12, &T::one()) {
        return Err(Error::Space(format!(
            "non-stochastic death row for path {leaf}: sums to {}",
            total.render()
        )));
    }
    Ok(())
}

fn death_rows<T: Scalar>(market: &MarketTree<T>, law: &DeathLaw<T>) -> Result<Vec<Vec<T>>> {
    let n = market.horizon();
    let leaves = market.n_leaves();
    let rows: Vec<Vec<T>> = match law {
        DeathLaw::IndependentTable { probs } => {
            check_row(probs, n, 0)?;
            vec![probs.clone(); leaves]
        }
        DeathLaw::FStoppingRule { leaf_times } => {
            if leaf_times.len() != leaves {
                return Err(Error::Space("one death time per path required".into()));
            }
            // Observability: 1{τ=s} must be constant on each depth-s subtree.
            for s in 1..=n {
                let mut verdict_of_ancestor: Vec<Option<bool>> = vec![None; market.nodes().len()];
                for (leaf_idx, &leaf) in market.leaves().iter().enumerate() {
                    let anc = market.ancestor(leaf, s);
                    let dies_now = leaf_times[leaf_idx].eq_time(s);
                    match verdict_of_ancestor[anc] {
                        None => verdict_of_ancestor[anc] = Some(dies_now),
                        Some(prev) => {
                            if prev != dies_now {
                                return Err(Error::Measurability(format!(
                                    "death rule not observable at its own time: \
                                     paths under depth-{s} state {anc} disagree on death at {s}"
                                )));
                            }
                        }
                    }
                }
            }
            leaf_times
                .iter()
                .map(|&time| {
                    let mut row = vec![T::zero(); n + 1];
                    match time {
                        EventTime::At(s) => row[s - 1] = T::one(),
                        EventTime::Beyond => row[n] = T::one(),
                    }
                    row
                })
                .collect()
        }
        DeathLaw::HazardModulated { leaf_hazards } => {
            if leaf_hazards.len() != leaves {
                return Err(Error::Space("one hazard path per market path required".into()));
            }
            let mut rows = Vec::with_capacity(leaves);
            for (leaf, hazards) in leaf_hazards.iter().enumerate() {
                if hazards.len() != n {
                    return Err(Error::Space(format!(
                        "hazard path for path {leaf} has {} steps, expected {n}",
                        hazards.len()
                    )));
                }
                let mut row = Vec::with_capacity(n + 1);
                let mut alive = T::one();
                for h in hazards {
                    let inside = (h.is_positive() || h.is_zero())
                        && ((T::one() - h.clone()).is_positive() || (T::one() - h.clone()).is_zero());
                    if !inside {
                        return Err(Error::Space(format!(
                            "hazard value {} outside [0,1] on path {leaf}",
                            h.render()
                        )));
                    }
                    row.push(alive.clone() * h.clone());
                    alive = alive * (T::one() - h.clone());
                }
                row.push(alive);
                rows.push(row);
            }
            rows
        }
        DeathLaw::ExplicitMatrix { rows } => {
            if rows.len() != leaves {
                return Err(Error::Space("one death row per market path required".into()));
            }
            for (leaf, row) in rows.iter().enumerate() {
                check_row(row, n, leaf)?;
            }
            rows.clone()
        }
    };
    Ok(rows)
}

/// Builds the product space (market × death states), the market filtration
/// generated by market coordinates only, the death time, and the asset.
pub fn build_space<T: Scalar>(market: MarketTree<T>, law: &DeathLaw<T>) -> Result<Model<T>> {
    let n = market.horizon();
    let rows = death_rows(&market, law)?;

    // Product outcomes: (market leaf, death state) with positive weight,
    // leaves in breadth-first order, states in time order then "beyond".
    let mut weights = Vec::new();
    let mut labels = Vec::new();
    let mut taus = Vec::new();
    let mut leaf_of_outcome = Vec::new();
    for (leaf_idx, &leaf) in market.leaves().iter().enumerate() {
        let leaf_prob = market.reach_prob(leaf);
        let path = market.path_label(leaf);
        for (state, p) in rows[leaf_idx].iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            weights.push(leaf_prob.clone() * p.clone());
            if state < n {
                taus.push(EventTime::At(state + 1));
                labels.push(format!("{path}:d{}", state + 1));
            } else {
                taus.push(EventTime::Beyond);
                labels.push(format!("{path}:a"));
            }
            leaf_of_outcome.push(leaf);
        }
    }
    if weights.is_empty() {
        return Err(Error::Space("no outcomes with positive weight".into()));
    }

    let partitions: Vec<Partition> = (0..=n)
        .map(|t| {
            let keys: Vec<usize> = leaf_of_outcome
                .iter()
                .map(|&leaf| market.ancestor(leaf, t))
                .collect();
            Partition::from_keys(&keys)
        })
        .collect();
    let filtration = Filtration::new(partitions)?;
    let space = FilteredSpace::new(n, weights, filtration, labels)?;
    let tau = RandomTime::new(taus, n)?;

    let asset_values: Vec<Vec<T>> = (0..=n)
        .map(|t| {
            leaf_of_outcome
                .iter()
                .map(|&leaf| market.nodes()[market.ancestor(leaf, t)].asset.clone())
                .collect()
        })
        .collect();
    let asset = Process::adapted(asset_values, space.filtration())?;

    Ok(Model {
        market,
        death_rows: rows,
        space,
        tau,
        asset,
    })
}
