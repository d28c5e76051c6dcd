//! The claim martingales attached to a death-benefit process and the
//! three-component optional representation of the claim under the
//! enlarged filtration: a pure-financial part driven by the hatted claim
//! martingale, a correlation part driven by the hatted survival
//! martingale part, and a pure-mortality part driven by the pure-death
//! martingale.

use crate::calculus::{bracket, is_martingale, martingale_from_terminal};
use crate::enlargement::{hat_transform, EnlargementBundle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{EventTime, FilteredSpace, Process, Tag};

/// The claim value at the death time: `h_τ 1{τ ≤ N}`, zero if death never
/// happens inside the horizon.
pub fn death_claim_terminal<T: Scalar>(h: &Process<T>, bundle: &EnlargementBundle<T>) -> Vec<T> {
    (0..h.n_outcomes())
        .map(|o| match bundle.tau.at(o) {
            EventTime::At(s) => h.value(s, o).clone(),
            EventTime::Beyond => T::zero(),
        })
        .collect()
}

/// Market-filtration claim martingale
/// `M^h_t = E[Σ_u h_u Δdof_u | F_t]` for an adapted benefit process `h`.
pub fn death_claim_martingale<T: Scalar>(
    space: &FilteredSpace<T>,
    h: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Process<T>> {
    if h.tag() == Tag::Raw {
        return Err(Error::Measurability(
            "death benefit process must be adapted".into(),
        ));
    }
    let terminal: Vec<T> = (0..space.n_outcomes())
        .map(|o| {
            let mut acc = T::zero();
            for u in 1..=space.horizon() {
                acc = acc + h.value(u, o).clone() * bundle.dof.delta(u, o);
            }
            acc
        })
        .collect();
    Ok(martingale_from_terminal(space, &terminal, space.filtration()))
}

/// Market-filtration claim martingale for a predictable benefit:
/// `m^h_t = E[Σ_u h_u (F_u − F_{u−1}) | F_t]` with `F := 1 − G`.
pub fn predictable_claim_martingale<T: Scalar>(
    space: &FilteredSpace<T>,
    h: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Process<T>> {
    if h.tag() != Tag::Predictable {
        return Err(Error::Measurability(
            "benefit process must be predictable for this claim martingale".into(),
        ));
    }
    let terminal: Vec<T> = (0..space.n_outcomes())
        .map(|o| {
            let mut acc = T::zero();
            for u in 1..=space.horizon() {
                // ΔF_u = −ΔG_u.
                acc = acc - h.value(u, o).clone() * bundle.g.delta(u, o);
            }
            acc
        })
        .collect();
    Ok(martingale_from_terminal(space, &terminal, space.filtration()))
}

/// Running integral `(h·dof)_t = Σ_{s≤t} h_s Δdof_s` — adapted because
/// both factors are known at `s`.
pub fn benefit_against_compensator<T: Scalar>(
    h: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Process<T>> {
    let n = h.horizon();
    let k = h.n_outcomes();
    let mut values = vec![vec![T::zero(); k]];
    for t in 1..=n {
        let prev = &values[t - 1];
        let slice: Vec<T> = (0..k)
            .map(|o| prev[o].clone() + h.value(t, o).clone() * bundle.dof.delta(t, o))
            .collect();
        values.push(slice);
    }
    Process::raw(values, n, k)
}

/// The optional representation of a death claim under the enlarged
/// filtration, with the claim martingale that generated it.
#[derive(Clone, Debug)]
pub struct Representation<T: Scalar> {
    /// `H_t = E[h_τ 1{τ≤N} | G_t]`.
    pub total: Process<T>,
    /// `(1/G_−) 1{·≤τ} · M̂^h`.
    pub pure_financial: Process<T>,
    /// `−((M^h − h·dof)_− / G_−²) 1{·≤τ} · m̂`.
    pub correlation: Process<T>,
    /// `((hG − M^h + h·dof)/G) 1{· < R} · N^G`.
    pub pure_mortality: Process<T>,
    /// The market-filtration claim martingale `M^h`.
    pub mh: Process<T>,
    /// The running integral `(h·dof)`.
    pub h_dof: Process<T>,
}

/// Builds the three-component representation and verifies, exactly, that
/// the components reconstruct the claim martingale and that the
/// pure-mortality component is orthogonal to the other two.
pub fn optional_representation<T: Scalar>(
    space: &FilteredSpace<T>,
    h: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<Representation<T>> {
    if h.tag() == Tag::Raw {
        return Err(Error::Measurability(
            "death benefit process must be adapted".into(),
        ));
    }
    let n = space.horizon();
    let k = space.n_outcomes();

    let mh = death_claim_martingale(space, h, bundle)?;
    let h_dof = benefit_against_compensator(h, bundle)?;
    let mh_hat = hat_transform(space, &mh, bundle)?;
    let m_hat = hat_transform(space, &bundle.m, bundle)?;
    let total = martingale_from_terminal(
        space,
        &death_claim_terminal(h, bundle),
        &bundle.g_filtration,
    );

    let mut fin = vec![vec![T::zero(); k]];
    let mut cor = vec![vec![T::zero(); k]];
    let mut mort = vec![vec![T::zero(); k]];
    for s in 1..=n {
        let mut fin_slice = Vec::with_capacity(k);
        let mut cor_slice = Vec::with_capacity(k);
        let mut mort_slice = Vec::with_capacity(k);
        for o in 0..k {
            let alive = bundle.tau.at(o).ge(s);
            let (df, dc) = if alive {
                let g_prev = bundle.g.value(s - 1, o).clone();
                if !g_prev.is_positive() {
                    return Err(Error::Defect(
                        "survival vanished strictly before the death time".into(),
                    ));
                }
                let df = mh_hat.delta(s, o) / g_prev.clone();
                let coeff = (mh.value(s - 1, o).clone() - h_dof.value(s - 1, o).clone())
                    / (g_prev.clone() * g_prev);
                (df, T::zero() - coeff * m_hat.delta(s, o))
            } else {
                (T::zero(), T::zero())
            };
            let before_r = match bundle.r[o] {
                EventTime::At(r) => s < r,
                EventTime::Beyond => true,
            };
            let dm = if before_r {
                let g_now = bundle.g.value(s, o).clone();
                let coeff = (h.value(s, o).clone() * g_now.clone()
                    - mh.value(s, o).clone()
                    + h_dof.value(s, o).clone())
                    / g_now;
                coeff * bundle.ng.delta(s, o)
            } else {
                T::zero()
            };
            fin_slice.push(fin[s - 1][o].clone() + df);
            cor_slice.push(cor[s - 1][o].clone() + dc);
            mort_slice.push(mort[s - 1][o].clone() + dm);
        }
        fin.push(fin_slice);
        cor.push(cor_slice);
        mort.push(mort_slice);
    }
    let pure_financial = Process::adapted(fin, &bundle.g_filtration)?;
    let correlation = Process::adapted(cor, &bundle.g_filtration)?;
    let pure_mortality = Process::adapted(mort, &bundle.g_filtration)?;

    // Invariant 1: exact pathwise reconstruction.
    for t in 0..=n {
        for o in 0..k {
            let lhs = total.value(t, o).clone() - total.value(0, o).clone();
            let rhs = pure_financial.value(t, o).clone()
                + correlation.value(t, o).clone()
                + pure_mortality.value(t, o).clone();
            let same = if T::EXACT {
                lhs == rhs
            } else {
                lhs.eq_within(&rhs, 1e-9, &T::one())
            };
            if !same {
                return Err(Error::Defect(format!(
                    "representation does not reconstruct the claim at t={t}, outcome {o}"
                )));
            }
        }
    }
    // Invariant 2: the mortality component is orthogonal to the rest.
    let hedgeable = pure_financial.add(&correlation);
    let cross = bracket(&pure_mortality, &hedgeable)?;
    if !is_martingale(space, &cross, &bundle.g_filtration).ok {
        return Err(Error::Defect(
            "mortality component is not orthogonal to the hedgeable components".into(),
        ));
    }
    for piece in [&pure_financial, &correlation, &pure_mortality] {
        if !is_martingale(space, piece, &bundle.g_filtration).ok {
            return Err(Error::Defect(
                "a representation component fails the martingale test".into(),
            ));
        }
    }

    Ok(Representation {
        total,
        pure_financial,
        correlation,
        pure_mortality,
        mh,
        h_dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::tests::one_step_coin_market;
    use crate::build::{build_space, DeathLaw};
    use crate::enlargement::azema_bundle;
    use crate::enlargement::tests::{
        anticipative_asset_model, hazard_two_driver_model, independent_coin_model,
        observable_death_model,
    };
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn zero_and_unit_benefits() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let zero = Process::constant(r(0, 1), 1, 4);
        let mh = death_claim_martingale(&model.space, &zero, &bundle).unwrap();
        assert_eq!(mh.at(1), vec![r(0, 1); 4].as_slice());

        let one = Process::constant(r(1, 1), 1, 4);
        let mh = death_claim_martingale(&model.space, &one, &bundle).unwrap();
        // Total death probability within the horizon is 1/2 here.
        assert_eq!(mh.at(0), vec![r(1, 2); 4].as_slice());
        assert_eq!(mh.at(1), vec![r(1, 2); 4].as_slice());
    }

    #[test]
    fn up_move_benefit_prices_to_one_quarter() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        // Benefit pays 1 at death iff the market moved up.
        let up: Vec<Rational> = (0..4)
            .map(|o| {
                if model.asset.value(1, o) > model.asset.value(0, o) {
                    r(1, 1)
                } else {
                    r(0, 1)
                }
            })
            .collect();
        let h = Process::adapted(vec![vec![r(0, 1); 4], up], model.space.filtration()).unwrap();
        let mh = death_claim_martingale(&model.space, &h, &bundle).unwrap();
        assert_eq!(mh.at(0), vec![r(1, 4); 4].as_slice());
    }

    #[test]
    fn predictable_claim_martingale_requires_predictability() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let adapted_only = Process::adapted(
            vec![
                vec![r(0, 1); 4],
                vec![r(1, 1), r(1, 1), r(0, 1), r(0, 1)],
            ],
            model.space.filtration(),
        )
        .unwrap();
        assert!(matches!(
            predictable_claim_martingale(&model.space, &adapted_only, &bundle),
            Err(Error::Measurability(_))
        ));

        // Constant benefit c = 3: m^h ≡ 3·(1 − G_1) = 3/2 on the coin.
        let c = Process::predictable(
            vec![vec![r(3, 1); 4], vec![r(3, 1); 4]],
            model.space.filtration(),
        )
        .unwrap();
        let m_h = predictable_claim_martingale(&model.space, &c, &bundle).unwrap();
        assert_eq!(m_h.at(0), vec![r(3, 2); 4].as_slice());
        assert_eq!(m_h.at(1), vec![r(3, 2); 4].as_slice());
    }

    #[test]
    fn representation_on_coin_up_benefit() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        // Outcomes: (u, τ=1), (u, alive), (d, τ=1), (d, alive).
        let h = Process::adapted(
            vec![
                vec![r(0, 1); 4],
                vec![r(1, 1), r(1, 1), r(0, 1), r(0, 1)],
            ],
            model.space.filtration(),
        )
        .unwrap();
        let rep = optional_representation(&model.space, &h, &bundle).unwrap();
        assert_eq!(rep.total.at(0), vec![r(1, 4); 4].as_slice());
        assert_eq!(
            rep.total.at(1),
            &[r(1, 1), r(0, 1), r(0, 1), r(0, 1)]
        );
        assert_eq!(
            rep.pure_financial.at(1),
            &[r(1, 4), r(1, 4), r(-1, 4), r(-1, 4)]
        );
        assert_eq!(rep.correlation.at(1), vec![r(0, 1); 4].as_slice());
        assert_eq!(
            rep.pure_mortality.at(1),
            &[r(1, 2), r(-1, 2), r(0, 1), r(0, 1)]
        );
    }

    #[test]
    fn observable_death_has_no_mortality_component() {
        let model = observable_death_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let one = Process::constant(r(1, 1), 1, 2);
        let rep = optional_representation(&model.space, &one, &bundle).unwrap();
        // Claim pays 1{τ=1} = 1{down}.
        assert_eq!(rep.total.at(1), &[r(0, 1), r(1, 1)]);
        assert_eq!(rep.pure_mortality.at(1), vec![r(0, 1); 2].as_slice());
    }

    #[test]
    fn certain_death_constant_benefit_is_riskless() {
        let market = one_step_coin_market();
        let model = build_space(
            market,
            &DeathLaw::IndependentTable {
                probs: vec![r(1, 1), r(0, 1)],
            },
        )
        .unwrap();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let c = Process::constant(r(7, 1), 1, model.space.n_outcomes());
        let rep = optional_representation(&model.space, &c, &bundle).unwrap();
        for t in 0..=1 {
            for o in 0..model.space.n_outcomes() {
                assert_eq!(*rep.total.value(t, o), r(7, 1));
                assert!(rep.pure_financial.value(t, o).is_zero());
                assert!(rep.correlation.value(t, o).is_zero());
                assert!(rep.pure_mortality.value(t, o).is_zero());
            }
        }
    }

    #[test]
    fn representation_reconstructs_on_two_step_models() {
        // The representation needs no model assumptions: it must also
        // reconstruct when the death law anticipates the asset noise.
        for model in [anticipative_asset_model(), hazard_two_driver_model()] {
            let bundle = azema_bundle(&model.space, &model.tau).unwrap();
            // Benefit = current asset value at death.
            let rep = optional_representation(&model.space, &model.asset, &bundle).unwrap();
            let terminal = death_claim_terminal(&model.asset, &bundle);
            let n = model.space.horizon();
            for o in 0..model.space.n_outcomes() {
                assert_eq!(rep.total.value(n, o), &terminal[o]);
            }
            // A benefit with a non-trivial time profile as well.
            let mut scaled = Vec::new();
            for t in 0..=n {
                scaled.push(
                    model
                        .asset
                        .at(t)
                        .iter()
                        .map(|v| v.clone() * r(t as i64 + 1, 2))
                        .collect::<Vec<_>>(),
                );
            }
            let h = Process::adapted(scaled, model.space.filtration()).unwrap();
            optional_representation(&model.space, &h, &bundle).unwrap();
        }
    }
}
