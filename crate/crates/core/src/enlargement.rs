//! Progressive enlargement of the market filtration by a death time:
//! the enlarged partition sequence, the conditional survival processes,
//! their martingale part, the pure-death martingale, the vanishing-time
//! rules, the hat transform, and the model-assumption validators.

use crate::calculus::{
    angle_bracket, dual_projection, is_martingale, martingale_from_terminal, Diagnostic,
};
use crate::error::{Error, Result};
use crate::scalar::{ratio_or_zero, Scalar};
use crate::space::{
    EventTime, FilteredSpace, Filtration, Partition, Process, ProjectionMode, RandomTime,
};

/// Everything derived from one death time on one space.
#[derive(Clone, Debug)]
pub struct EnlargementBundle<T: Scalar> {
    /// The progressively enlarged filtration: each market atom at `t`
    /// split into survivors and the per-time death classes.
    pub g_filtration: Filtration,
    /// The death time itself.
    pub tau: RandomTime,
    /// Survival process `G_t = P(τ > t | F_t)`; starts at 1.
    pub g: Process<T>,
    /// `G̃_t = P(τ ≥ t | F_t)`.
    pub g_tilde: Process<T>,
    /// Raw death indicator `D_t = 1{τ ≤ t}`.
    pub d: Process<T>,
    /// Dual optional projection of `D` onto the market filtration;
    /// nondecreasing, starts at 0.
    pub dof: Process<T>,
    /// `m = G + dof` — a martingale under the market filtration.
    pub m: Process<T>,
    /// Pure-death martingale under the enlarged filtration:
    /// `ΔN_t = ΔD_t − 1{t ≤ τ} Δdof_t / G̃_t`.
    pub ng: Process<T>,
    /// First time `G` hits zero, per outcome (beyond if never).
    pub r: Vec<EventTime>,
    /// `r` where additionally `G̃` vanishes there (beyond otherwise).
    pub r_tilde: Vec<EventTime>,
}

/// Splits each market atom at `t` into the survivor part `{τ > t}` and one
/// part per death time `s ≤ t`, dropping empty intersections. The result
/// refines the market filtration and makes the death time observable.
pub fn enlarge_filtration<T: Scalar>(
    space: &FilteredSpace<T>,
    tau: &RandomTime,
) -> Result<Filtration> {
    let n = space.horizon();
    let partitions: Vec<Partition> = (0..=n)
        .map(|t| {
            let keys: Vec<(usize, usize)> = (0..space.n_outcomes())
                .map(|o| {
                    let market_atom = space.filtration().at(t).atom_of(o);
                    let death_class = match tau.at(o) {
                        EventTime::At(s) if s <= t => s,
                        _ => usize::MAX, // still alive at t
                    };
                    (market_atom, death_class)
                })
                .collect();
            Partition::from_keys(&keys)
        })
        .collect();
    Filtration::new(partitions)
}

/// Derives the full bundle of enlargement processes and verifies their
/// structural identities; any breach is an internal defect.
pub fn azema_bundle<T: Scalar>(
    space: &FilteredSpace<T>,
    tau: &RandomTime,
) -> Result<EnlargementBundle<T>> {
    if tau.n_outcomes() != space.n_outcomes() {
        return Err(Error::Dimension(
            "death time and space disagree on outcomes".into(),
        ));
    }
    let n = space.horizon();
    let n_outcomes = space.n_outcomes();
    let g_filtration = enlarge_filtration(space, tau)?;

    let d = Process::raw(
        (0..=n).map(|t| tau.ind_le::<T>(t)).collect(),
        n,
        n_outcomes,
    )?;
    let g_values: Vec<Vec<T>> = (0..=n)
        .map(|t| space.condition_at(&tau.ind_gt::<T>(t), t))
        .collect();
    let g = Process::adapted(g_values, space.filtration())?;
    let g_tilde_values: Vec<Vec<T>> = (0..=n)
        .map(|t| space.condition_at(&tau.ind_ge::<T>(t), t))
        .collect();
    let g_tilde = Process::adapted(g_tilde_values, space.filtration())?;
    let dof = dual_projection(space, &d, ProjectionMode::Optional, space.filtration())?;
    let m = g.add(&dof);

    // Structural identities that must hold by construction.
    for o in 0..n_outcomes {
        if !g.value(0, o).is_zero() && *g.value(0, o) != T::one() {
            return Err(Error::Defect("survival does not start at 1".into()));
        }
        for t in 1..=n {
            let rebuilt = g.value(t, o).clone() + dof.delta(t, o);
            if rebuilt != *g_tilde.value(t, o) {
                return Err(Error::Defect(format!(
                    "survival identity G̃ = G + Δdof broken at t={t}"
                )));
            }
            if dof.delta(t, o).to_f64() < -1e-15 {
                return Err(Error::Defect("death compensator decreases".into()));
            }
        }
    }
    if !is_martingale(space, &m, space.filtration()).ok {
        return Err(Error::Defect(
            "survival-plus-compensator process fails the martingale test".into(),
        ));
    }

    let mut ng_values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=n {
        let prev = &ng_values[t - 1];
        let mut slice = Vec::with_capacity(n_outcomes);
        for o in 0..n_outcomes {
            let alive_to_t = tau.at(o).ge(t);
            let hazard = if alive_to_t {
                if g_tilde.value(t, o).is_zero() {
                    return Err(Error::Defect(
                        "G̃ vanishes on an outcome that is still alive".into(),
                    ));
                }
                dof.delta(t, o) / g_tilde.value(t, o).clone()
            } else {
                T::zero()
            };
            slice.push(prev[o].clone() + d.delta(t, o) - hazard);
        }
        ng_values.push(slice);
    }
    let ng = Process::adapted(ng_values, &g_filtration)?;
    if !is_martingale(space, &ng, &g_filtration).ok {
        return Err(Error::Defect(
            "pure-death process fails the martingale test under the enlarged filtration".into(),
        ));
    }

    let mut r = Vec::with_capacity(n_outcomes);
    let mut r_tilde = Vec::with_capacity(n_outcomes);
    for o in 0..n_outcomes {
        let hit = (1..=n).find(|&t| g.value(t, o).is_zero());
        match hit {
            Some(t) => {
                r.push(EventTime::At(t));
                if g_tilde.value(t, o).is_zero() {
                    r_tilde.push(EventTime::At(t));
                } else {
                    r_tilde.push(EventTime::Beyond);
                }
            }
            None => {
                r.push(EventTime::Beyond);
                r_tilde.push(EventTime::Beyond);
            }
        }
    }

    Ok(EnlargementBundle {
        g_filtration,
        tau: tau.clone(),
        g,
        g_tilde,
        d,
        dof,
        m,
        ng,
        r,
        r_tilde,
    })
}

/// Transforms a market-filtration martingale into one under the enlarged
/// filtration:
/// `M̂_t = M_{t∧τ} − Σ_{s≤t∧τ} ΔM_s Δm_s / G̃_s + Σ_{s≤t∧τ} E[ΔM_s 1{R̃=s} | F_{s−1}]`.
pub fn hat_transform<T: Scalar>(
    space: &FilteredSpace<T>,
    mart: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Process<T>> {
    if !is_martingale(space, mart, space.filtration()).ok {
        return Err(Error::NotMartingale(
            "hat transform input fails the martingale test".into(),
        ));
    }
    let n = space.horizon();
    let n_outcomes = space.n_outcomes();

    // Per-step pieces: the drift correction (only where alive) and the
    // vanishing-time correction (conditioned on the previous step).
    let mut drift = vec![vec![T::zero(); n_outcomes]];
    let mut vanish = vec![vec![T::zero(); n_outcomes]];
    for s in 1..=n {
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| {
                if bundle.tau.at(o).ge(s) {
                    mart.delta(s, o) * bundle.m.delta(s, o)
                        / bundle.g_tilde.value(s, o).clone()
                } else {
                    T::zero()
                }
            })
            .collect();
        drift.push(slice);
        let hit: Vec<T> = (0..n_outcomes)
            .map(|o| {
                if bundle.r_tilde[o].eq_time(s) {
                    mart.delta(s, o)
                } else {
                    T::zero()
                }
            })
            .collect();
        vanish.push(space.condition_at(&hit, s - 1));
    }

    let values: Vec<Vec<T>> = (0..=n)
        .map(|t| {
            (0..n_outcomes)
                .map(|o| {
                    let cut = bundle.tau.at(o).min_with(t);
                    let mut acc = mart.value(cut, o).clone();
                    for s in 1..=cut {
                        acc = acc - drift[s][o].clone() + vanish[s][o].clone();
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let hatted = Process::adapted(values, &bundle.g_filtration)?;
    if !is_martingale(space, &hatted, &bundle.g_filtration).ok {
        return Err(Error::Defect(
            "hat transform output fails the martingale test under the enlarged filtration".into(),
        ));
    }
    Ok(hatted)
}

/// Result of checking the model assumptions tying the asset to the death
/// time: the asset must be a market martingale, its angle bracket with the
/// survival martingale part must vanish, and the asset must not jump where
/// `G̃ = 0 < G_−`.
#[derive(Clone, Debug)]
pub struct ModelReport {
    pub asset_martingale: Diagnostic,
    pub orthogonality: Diagnostic,
    /// First `(t, outcome)` where the asset jumps on `{G̃ = 0 < G_−}`.
    pub jump_violation: Option<(usize, usize)>,
}

impl ModelReport {
    pub fn passes(&self) -> bool {
        self.asset_martingale.ok && self.orthogonality.ok && self.jump_violation.is_none()
    }

    pub fn lines(&self) -> Vec<String> {
        vec![
            format!(
                "asset martingale: {} (worst deviation {:.3e} at t={}, atom {})",
                if self.asset_martingale.ok { "pass" } else { "FAIL" },
                self.asset_martingale.worst_abs,
                self.asset_martingale.at_time,
                self.asset_martingale.at_atom
            ),
            format!(
                "asset ⟂ survival-martingale-part: {} (worst deviation {:.3e} at t={}, atom {})",
                if self.orthogonality.ok { "pass" } else { "FAIL" },
                self.orthogonality.worst_abs,
                self.orthogonality.at_time,
                self.orthogonality.at_atom
            ),
            match self.jump_violation {
                None => "no asset jump where G̃ = 0 < G_-: pass".into(),
                Some((t, o)) => format!("asset jumps where G̃ = 0 < G_-: FAIL at t={t}, outcome {o}"),
            },
        ]
    }
}

/// Checks the three standing model assumptions for an asset and a bundle.
pub fn validate_model<T: Scalar>(
    space: &FilteredSpace<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<ModelReport> {
    let asset_martingale = is_martingale(space, asset, space.filtration());

    let angle = angle_bracket(space, asset, &bundle.m, space.filtration())?;
    let mut orthogonality = Diagnostic {
        ok: true,
        worst_abs: 0.0,
        at_time: 0,
        at_atom: 0,
    };
    let scale = {
        let mut s = T::one();
        for t in 0..=space.horizon() {
            for v in angle.at(t) {
                let a = v.abs();
                if a > s {
                    s = a;
                }
            }
        }
        s
    };
    for t in 1..=space.horizon() {
        let partition = space.filtration().at(t - 1);
        for (atom_idx, atom) in partition.atoms().iter().enumerate() {
            let dev = angle.delta(t, atom[0]);
            let fails = if T::EXACT {
                !dev.is_zero()
            } else {
                !dev.eq_within(&T::zero(), 1e-10, &scale)
            };
            if fails {
                orthogonality.ok = false;
            }
            let mag = dev.to_f64().abs();
            if mag > orthogonality.worst_abs {
                orthogonality.worst_abs = mag;
                orthogonality.at_time = t;
                orthogonality.at_atom = atom_idx;
            }
        }
    }

    let mut jump_violation = None;
    'outer: for t in 1..=space.horizon() {
        for o in 0..space.n_outcomes() {
            let jumps = !asset.delta(t, o).is_zero();
            let tilde_zero = bundle.g_tilde.value(t, o).is_zero();
            let prev_positive = bundle.g.value(t - 1, o).is_positive();
            if jumps && tilde_zero && prev_positive {
                jump_violation = Some((t, o));
                break 'outer;
            }
        }
    }

    Ok(ModelReport {
        asset_martingale,
        orthogonality,
        jump_violation,
    })
}

/// A death time is pseudo-stopping exactly when the survival martingale
/// part stays constant.
pub fn is_pseudo_stopping<T: Scalar>(bundle: &EnlargementBundle<T>) -> bool {
    let base = bundle.m.value(0, 0).clone();
    for t in 0..=bundle.m.horizon() {
        for v in bundle.m.at(t) {
            let same = if T::EXACT {
                *v == base
            } else {
                v.eq_within(&base, 1e-10, &T::one())
            };
            if !same {
                return false;
            }
        }
    }
    true
}

/// The surface slice `t ↦ P(τ > s | F_t)` — a market martingale in `t`.
pub fn survival_surface<T: Scalar>(
    space: &FilteredSpace<T>,
    tau: &RandomTime,
    s: usize,
) -> Process<T> {
    martingale_from_terminal(space, &tau.ind_gt::<T>(s), space.filtration())
}

/// Residual of the compensator transfer identity: the enlarged-filtration
/// compensator of the stopped process, minus `G_−^{-1} 1{·≤τ}` integrated
/// against the market compensator of `G̃`-weighted increments — evaluated
/// on `{G_− > 0}`. Identically zero when the identity holds.
pub fn compensator_identity_check<T: Scalar>(
    space: &FilteredSpace<T>,
    v: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Process<T>> {
    if v.at(0).iter().any(|c| !c.is_zero()) {
        return Err(Error::Precondition("process must start at 0".into()));
    }
    let n = space.horizon();
    let n_outcomes = space.n_outcomes();

    let stopped = v.stopped(&bundle.tau);
    let lhs = dual_projection(
        space,
        &stopped,
        ProjectionMode::Predictable,
        &bundle.g_filtration,
    )?;

    // Market compensator of the G̃-weighted increments of v.
    let mut weighted_values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=n {
        let prev = &weighted_values[t - 1];
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| prev[o].clone() + bundle.g_tilde.value(t, o).clone() * v.delta(t, o))
            .collect();
        weighted_values.push(slice);
    }
    let weighted = Process::raw(weighted_values, n, n_outcomes)?;
    let market_comp = dual_projection(
        space,
        &weighted,
        ProjectionMode::Predictable,
        space.filtration(),
    )?;

    let mut residual = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=n {
        let prev = &residual[t - 1];
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| {
                let g_prev = bundle.g.value(t - 1, o);
                if !g_prev.is_positive() {
                    return prev[o].clone();
                }
                let rhs_inc = if bundle.tau.at(o).ge(t) {
                    market_comp.delta(t, o) / g_prev.clone()
                } else {
                    T::zero()
                };
                prev[o].clone() + lhs.delta(t, o) - rhs_inc
            })
            .collect();
        residual.push(slice);
    }
    Process::raw(residual, n, n_outcomes)
}
