//! Risk-minimizing hedging of life-insurance claims: the market-level
//! hedge, its transfer to the enlarged filtration, the direct
//! enlarged-filtration hedge, strategy evaluation (value / cost / risk),
//! the product-claim decompositions for endowments and annuities, and the
//! closed forms available under pseudo-stopping or independent mortality.

use crate::calculus::{are_orthogonal, bracket, gkw, is_martingale, martingale_from_terminal};
use crate::enlargement::{
    hat_transform, is_pseudo_stopping, survival_surface, validate_model, EnlargementBundle,
};
use crate::error::{Error, Result};
use crate::representation::{benefit_against_compensator, death_claim_martingale};
use crate::scalar::{agree, Scalar};
use crate::space::{
    EventTime, FilteredSpace, Filtration, Process, RandomTime, Tag,
};

/// An insurance claim over a term: a survival benefit paid at the term if
/// the insured outlives it, a death benefit paid at the death time if it
/// falls within the term, and optionally the annuity accumulator that
/// generated both.
#[derive(Clone, Debug)]
pub struct Claim<T: Scalar> {
    /// Payment deadline `T` (1..=horizon).
    pub term: usize,
    /// Benefit paid at `term` on `{τ > term}`; known at `term`.
    pub survival_benefit: Vec<T>,
    /// Benefit paid at `τ` on `{τ ≤ term}`; values after the term are
    /// zeroed at construction.
    pub death_benefit: Process<T>,
    /// When present, the nondecreasing accumulator `C` with
    /// `survival_benefit = C_term` and `death_benefit = C`.
    pub annuity: Option<Process<T>>,
}

impl<T: Scalar> Claim<T> {
    pub fn new(
        space: &FilteredSpace<T>,
        term: usize,
        survival_benefit: Vec<T>,
        death_benefit: Process<T>,
    ) -> Result<Claim<T>> {
        if term == 0 || term > space.horizon() {
            return Err(Error::Precondition(format!(
                "claim term must lie in 1..={}, got {term}",
                space.horizon()
            )));
        }
        if survival_benefit.len() != space.n_outcomes() {
            return Err(Error::Dimension(
                "survival benefit has the wrong number of outcomes".into(),
            ));
        }
        if !space.filtration().at(term).is_measurable(&survival_benefit) {
            return Err(Error::Measurability(
                "survival benefit must be known at the term".into(),
            ));
        }
        if death_benefit.tag() == Tag::Raw {
            return Err(Error::Measurability(
                "death benefit process must be adapted".into(),
            ));
        }
        if death_benefit.horizon() != space.horizon()
            || death_benefit.n_outcomes() != space.n_outcomes()
        {
            return Err(Error::Dimension(
                "death benefit shape does not match the space".into(),
            ));
        }
        let mut values = death_benefit.values().to_vec();
        for slice in values.iter_mut().skip(term + 1) {
            for v in slice.iter_mut() {
                *v = T::zero();
            }
        }
        let death_benefit = Process::adapted(values, space.filtration())?;
        Ok(Claim {
            term,
            survival_benefit,
            death_benefit,
            annuity: None,
        })
    }

    pub fn pure_endowment(
        space: &FilteredSpace<T>,
        term: usize,
        survival_benefit: Vec<T>,
    ) -> Result<Claim<T>> {
        let zero = Process::constant(T::zero(), space.horizon(), space.n_outcomes());
        Claim::new(space, term, survival_benefit, zero)
    }

    pub fn term_insurance(
        space: &FilteredSpace<T>,
        term: usize,
        death_benefit: Process<T>,
    ) -> Result<Claim<T>> {
        let zeros = vec![T::zero(); space.n_outcomes()];
        Claim::new(space, term, zeros, death_benefit)
    }

    /// Endowment insurance generated by an accumulator: pays `C_τ` on
    /// death within the term and `C_term` on survival.
    pub fn annuity(
        space: &FilteredSpace<T>,
        term: usize,
        accumulator: Process<T>,
    ) -> Result<Claim<T>> {
        if accumulator.tag() == Tag::Raw {
            return Err(Error::Measurability(
                "annuity accumulator must be adapted".into(),
            ));
        }
        if accumulator.at(0).iter().any(|v| !v.is_zero()) {
            return Err(Error::Precondition(
                "annuity accumulator must start at zero".into(),
            ));
        }
        for t in 1..=accumulator.horizon() {
            for o in 0..accumulator.n_outcomes() {
                let d = accumulator.delta(t, o);
                if !d.is_zero() && !d.is_positive() {
                    return Err(Error::Precondition(
                        "annuity accumulator must be nondecreasing".into(),
                    ));
                }
            }
        }
        let survival = accumulator.at(term).to_vec();
        let mut claim = Claim::new(space, term, survival, accumulator.clone())?;
        claim.annuity = Some(accumulator);
        Ok(claim)
    }

    /// Total payout per outcome: death benefit at `τ ≤ term`, survival
    /// benefit on `{τ > term}`.
    pub fn payoff(&self, tau: &RandomTime) -> Vec<T> {
        (0..self.survival_benefit.len())
            .map(|o| match tau.at(o) {
                EventTime::At(s) if s <= self.term => self.death_benefit.value(s, o).clone(),
                _ => self.survival_benefit[o].clone(),
            })
            .collect()
    }

    /// Cumulative payment stream `A_t`: the death benefit enters at the
    /// death time, the survival benefit at the term.
    pub fn payments(&self, tau: &RandomTime) -> Vec<Vec<T>> {
        let n = self.death_benefit.horizon();
        let k = self.survival_benefit.len();
        (0..=n)
            .map(|t| {
                (0..k)
                    .map(|o| match tau.at(o) {
                        EventTime::At(s) if s <= self.term => {
                            if s <= t {
                                self.death_benefit.value(s, o).clone()
                            } else {
                                T::zero()
                            }
                        }
                        _ => {
                            if t >= self.term {
                                self.survival_benefit[o].clone()
                            } else {
                                T::zero()
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// The survival-drift loading of the asset: the martingale
/// `U = 1{G_− > 0}·[S, m]`, its integrand against `S`, and the orthogonal
///残 residual from the market-level decomposition `U = φ·S + L`.
#[derive(Clone, Debug)]
pub struct PhiM<T: Scalar> {
    pub u: Process<T>,
    pub phi: Process<T>,
    pub residual: Process<T>,
}

/// Decomposes the asset/survival interaction and verifies the structural
/// identities the transfer formula relies on: `U` is a market martingale,
/// `G_− + φ` stays positive wherever `G_−` does, and the hatted asset
/// satisfies `(G_− + φ)·Ŝ = G_−·S^τ − L̂` pathwise.
pub fn phi_m<T: Scalar>(
    space: &FilteredSpace<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<PhiM<T>> {
    let report = validate_model(space, asset, bundle)?;
    if !report.passes() {
        return Err(Error::Assumption(report.lines().join("; ")));
    }
    let n = space.horizon();
    let k = space.n_outcomes();

    let mut u_values = vec![vec![T::zero(); k]];
    for t in 1..=n {
        let prev = &u_values[t - 1];
        let slice: Vec<T> = (0..k)
            .map(|o| {
                let inc = if bundle.g.value(t - 1, o).is_positive() {
                    asset.delta(t, o) * bundle.m.delta(t, o)
                } else {
                    T::zero()
                };
                prev[o].clone() + inc
            })
            .collect();
        u_values.push(slice);
    }
    let u = Process::adapted(u_values, space.filtration())?;
    if !is_martingale(space, &u, space.filtration()).ok {
        return Err(Error::Defect(
            "asset/survival interaction process fails the martingale test".into(),
        ));
    }
    let parts = gkw(space, &u, std::slice::from_ref(asset), space.filtration(), false)?;
    let phi = parts.integrands.into_iter().next().expect("one integrand");
    let residual = parts.residual;

    for t in 1..=n {
        for o in 0..k {
            let g_prev = bundle.g.value(t - 1, o);
            if bundle.tau.at(o).ge(t) && !g_prev.is_positive() {
                return Err(Error::Defect(
                    "survival vanished strictly before the death time".into(),
                ));
            }
            if g_prev.is_positive()
                && !(g_prev.clone() + phi.value(t, o).clone()).is_positive()
            {
                return Err(Error::Defect(
                    "shifted survival weight G_- + φ lost positivity".into(),
                ));
            }
        }
    }

    let s_hat = hat_transform(space, asset, bundle)?;
    let l_hat = hat_transform(space, &residual, bundle)?;
    let stopped = asset.stopped(&bundle.tau);
    for o in 0..k {
        let mut lhs = T::zero();
        let mut rhs = T::zero();
        for s in 1..=n {
            let g_prev = bundle.g.value(s - 1, o).clone();
            lhs = lhs + (g_prev.clone() + phi.value(s, o).clone()) * s_hat.delta(s, o);
            rhs = rhs + g_prev * stopped.delta(s, o);
            let want = rhs.clone() - (l_hat.value(s, o).clone() - l_hat.value(0, o).clone());
            if !agree(&lhs, &want) {
                return Err(Error::Defect(format!(
                    "hatted-asset identity failed at t={s}, outcome {o}"
                )));
            }
        }
    }

    Ok(PhiM { u, phi, residual })
}

/// Market-level quadratic hedge of a claim value known at the term:
/// the integrand and orthogonal residual of the conditional-expectation
/// martingale with respect to the asset.
pub fn hedge_F<T: Scalar>(
    space: &FilteredSpace<T>,
    claim_value: &[T],
    asset: &Process<T>,
) -> Result<(Process<T>, Process<T>)> {
    let mart = martingale_from_terminal(space, claim_value, space.filtration());
    let parts = gkw(space, &mart, std::slice::from_ref(asset), space.filtration(), true)?;
    let xi = parts.integrands.into_iter().next().expect("one integrand");
    Ok((xi, parts.residual))
}

fn gkw_single<T: Scalar>(
    space: &FilteredSpace<T>,
    mart: &Process<T>,
    asset: &Process<T>,
) -> Result<(Process<T>, Process<T>)> {
    let parts = gkw(space, mart, std::slice::from_ref(asset), space.filtration(), false)?;
    let xi = parts.integrands.into_iter().next().expect("one integrand");
    Ok((xi, parts.residual))
}

/// Complete description of a hedging strategy for one claim: initial
/// capital, per-asset positions, the unhedgeable residual, and the value,
/// cost and remaining-risk processes, plus named sub-strategies when a
/// decomposition produced them.
#[derive(Clone, Debug)]
pub struct HedgeReport<T: Scalar> {
    pub initial_capital: T,
    pub strategy: Vec<Process<T>>,
    pub residual: Process<T>,
    pub value: Process<T>,
    pub cost: Process<T>,
    pub risk: Process<T>,
    pub attribution: Vec<(String, Process<T>)>,
    pub notes: Vec<String>,
}

/// Value, cost and remaining-risk processes of an arbitrary admissible
/// strategy against a claim's payment stream:
/// `V_t = E[A_N − A_t | ·]`, `C = V + A − Σ ξ_i·X_i`,
/// `R_t = E[(C_N − C_t)² | ·]`.
pub fn evaluate_strategy<T: Scalar>(
    space: &FilteredSpace<T>,
    strategies: &[Process<T>],
    claim: &Claim<T>,
    assets: &[Process<T>],
    bundle: &EnlargementBundle<T>,
    filtration: &Filtration,
) -> Result<(Process<T>, Process<T>, Process<T>)> {
    if strategies.len() != assets.len() {
        return Err(Error::Dimension(
            "one strategy process per asset is required".into(),
        ));
    }
    let n = space.horizon();
    let k = space.n_outcomes();
    for xi in strategies {
        for t in 0..=n {
            if !filtration.predictable_at(t).is_measurable(xi.at(t)) {
                return Err(Error::Measurability(
                    "strategy must be predictable for the hedging filtration".into(),
                ));
            }
        }
    }
    for x in assets {
        if !is_martingale(space, x, filtration).ok {
            return Err(Error::NotMartingale(
                "traded asset fails the martingale test under the hedging filtration".into(),
            ));
        }
    }

    let payments = claim.payments(&bundle.tau);
    let mut gains = vec![vec![T::zero(); k]];
    for t in 1..=n {
        let prev = &gains[t - 1];
        let slice: Vec<T> = (0..k)
            .map(|o| {
                let mut acc = prev[o].clone();
                for (xi, x) in strategies.iter().zip(assets) {
                    acc = acc + xi.value(t, o).clone() * x.delta(t, o);
                }
                acc
            })
            .collect();
        gains.push(slice);
    }

    let mut v_values = Vec::with_capacity(n + 1);
    let mut c_values = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let remaining: Vec<T> = (0..k)
            .map(|o| payments[n][o].clone() - payments[t][o].clone())
            .collect();
        let v = space.condition(&remaining, filtration.at(t));
        let c: Vec<T> = (0..k)
            .map(|o| v[o].clone() + payments[t][o].clone() - gains[t][o].clone())
            .collect();
        v_values.push(v);
        c_values.push(c);
    }
    let mut r_values = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let sq: Vec<T> = (0..k)
            .map(|o| {
                let d = c_values[n][o].clone() - c_values[t][o].clone();
                d.clone() * d
            })
            .collect();
        r_values.push(space.condition(&sq, filtration.at(t)));
    }
    let value = Process::raw(v_values, n, k)?;
    let cost = Process::raw(c_values, n, k)?;
    let risk = Process::raw(r_values, n, k)?;
    Ok((value, cost, risk))
}

/// Shared tail of every hedge construction: verifies the reconstruction
/// `H = H_0 + Σ ξ_i·X_i + L`, residual orthogonality to every asset, and
/// the cost identity, then assembles the report.
#[allow(clippy::too_many_arguments)]
fn finish_report<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    strategies: Vec<Process<T>>,
    assets: &[Process<T>],
    residual: Process<T>,
    h: &Process<T>,
    bundle: &EnlargementBundle<T>,
    filtration: &Filtration,
    attribution: Vec<(String, Process<T>)>,
    notes: Vec<String>,
) -> Result<HedgeReport<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let h0 = h.value(0, 0).clone();

    for o in 0..k {
        let mut gains = T::zero();
        for t in 1..=n {
            for (xi, x) in strategies.iter().zip(assets) {
                gains = gains + xi.value(t, o).clone() * x.delta(t, o);
            }
            let rebuilt = h0.clone() + gains.clone() + residual.value(t, o).clone();
            if !agree(h.value(t, o), &rebuilt) {
                return Err(Error::Defect(format!(
                    "strategy and residual do not rebuild the claim at t={t}, outcome {o}"
                )));
            }
        }
    }
    for x in assets {
        if !are_orthogonal(space, &residual, x, filtration)?.ok {
            return Err(Error::Defect(
                "hedge residual correlates with a traded asset".into(),
            ));
        }
    }
    let (value, cost, risk) =
        evaluate_strategy(space, &strategies, claim, assets, bundle, filtration)?;
    for t in 0..=n {
        for o in 0..k {
            let drift = cost.value(t, o).clone() - cost.value(0, o).clone();
            if !agree(&drift, residual.value(t, o)) {
                return Err(Error::Defect(format!(
                    "cost drift differs from the residual at t={t}, outcome {o}"
                )));
            }
        }
    }
    Ok(HedgeReport {
        initial_capital: h0,
        strategy: strategies,
        residual,
        value,
        cost,
        risk,
        attribution,
        notes,
    })
}

/// Ingredients of the market-level hedge of a claim, shared by the
/// transfer route and the closed-form corollaries.
struct MarketLegs<T: Scalar> {
    mk: Process<T>,
    kdof: Process<T>,
    mg: Process<T>,
    xi_f: Process<T>,
    l_f: Process<T>,
}

fn market_legs<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<MarketLegs<T>> {
    let mk = death_claim_martingale(space, &claim.death_benefit, bundle)?;
    let kdof = benefit_against_compensator(&claim.death_benefit, bundle)?;
    let mg_terminal: Vec<T> = (0..space.n_outcomes())
        .map(|o| claim.survival_benefit[o].clone() * bundle.g.value(claim.term, o).clone())
        .collect();
    let mg = martingale_from_terminal(space, &mg_terminal, space.filtration());
    let combined = mk.add(&mg);
    let (xi_f, l_f) = gkw_single(space, &combined, asset)?;
    Ok(MarketLegs {
        mk,
        kdof,
        mg,
        xi_f,
        l_f,
    })
}

/// Risk-minimizing hedge of a claim under the enlarged filtration via the
/// market-level decomposition: the strategy is the market integrand
/// scaled by `(G_− + φ)^{-1}` while the insured is alive and within the
/// term, and the residual collects the hatted market residuals, the
/// survival-drift correction, and the pure-death component.
pub fn hedge_G<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<HedgeReport<T>> {
    let pm = phi_m(space, asset, bundle)?;
    let n = space.horizon();
    let k = space.n_outcomes();
    let legs = market_legs(space, claim, asset, bundle)?;

    let l_m_hat = hat_transform(space, &pm.residual, bundle)?;
    let l_f_hat = hat_transform(space, &legs.l_f, bundle)?;
    let m_hat = hat_transform(space, &bundle.m, bundle)?;

    let mut xi_values = vec![vec![T::zero(); k]];
    let mut l_values = vec![vec![T::zero(); k]];
    for s in 1..=n {
        let mut xi_slice = Vec::with_capacity(k);
        let mut l_slice = Vec::with_capacity(k);
        for o in 0..k {
            let alive = bundle.tau.at(o).ge(s);
            let mut l_inc = T::zero();
            let mut xi = T::zero();
            if alive {
                let g_prev = bundle.g.value(s - 1, o).clone();
                if !g_prev.is_positive() {
                    return Err(Error::Defect(
                        "survival vanished strictly before the death time".into(),
                    ));
                }
                let den = g_prev.clone() + pm.phi.value(s, o).clone();
                if s <= claim.term {
                    xi = legs.xi_f.value(s, o).clone() / den.clone();
                }
                // Hatted market residual, re-scaled survival-drift
                // residual, and the hatted-drift correction term.
                l_inc = l_inc + l_f_hat.delta(s, o) / g_prev.clone();
                l_inc = l_inc
                    - legs.xi_f.value(s, o).clone() * l_m_hat.delta(s, o)
                        / (g_prev.clone() * den);
                let mut coeff = legs.mk.value(s - 1, o).clone()
                    - legs.kdof.value(s - 1, o).clone();
                if s <= claim.term {
                    coeff = coeff + legs.mg.value(s - 1, o).clone();
                }
                l_inc = l_inc - coeff * m_hat.delta(s, o) / (g_prev.clone() * g_prev);
            }
            let before_r = match bundle.r[o] {
                EventTime::At(r) => s < r,
                EventTime::Beyond => true,
            };
            if before_r {
                let g_now = bundle.g.value(s, o).clone();
                let mut coeff = claim.death_benefit.value(s, o).clone() * g_now.clone()
                    - legs.mk.value(s, o).clone()
                    + legs.kdof.value(s, o).clone();
                if s <= claim.term {
                    coeff = coeff - legs.mg.value(s, o).clone();
                }
                l_inc = l_inc + coeff * bundle.ng.delta(s, o) / g_now;
            }
            xi_slice.push(xi);
            l_slice.push(l_values[s - 1][o].clone() + l_inc);
        }
        xi_values.push(xi_slice);
        l_values.push(l_slice);
    }
    let xi_g = Process::predictable(xi_values, &bundle.g_filtration)?;
    let l_g = Process::adapted(l_values, &bundle.g_filtration)?;

    let h = martingale_from_terminal(space, &claim.payoff(&bundle.tau), &bundle.g_filtration);
    let stopped = asset.stopped(&bundle.tau);
    let attribution = vec![
        ("market-level strategy".to_string(), legs.xi_f.clone()),
        ("market-level residual".to_string(), legs.l_f.clone()),
        ("survival-drift loading".to_string(), pm.phi.clone()),
        ("survival-drift residual".to_string(), pm.residual.clone()),
    ];
    let report = finish_report(
        space,
        claim,
        vec![xi_g],
        std::slice::from_ref(&stopped),
        l_g,
        &h,
        bundle,
        &bundle.g_filtration,
        attribution,
        vec!["transfer-formula route".into()],
    )?;

    // The portfolio value must match its conditional-survival closed form.
    for t in 0..=n {
        for o in 0..k {
            let expected = if bundle.tau.at(o).gt(t) {
                let g_now = bundle.g.value(t, o).clone();
                if !g_now.is_positive() {
                    return Err(Error::Defect(
                        "survival vanished on a still-alive outcome".into(),
                    ));
                }
                let mut num =
                    legs.mk.value(t, o).clone() - legs.kdof.value(t, o).clone();
                if t < claim.term {
                    num = num + legs.mg.value(t, o).clone();
                }
                num / g_now
            } else {
                T::zero()
            };
            if !agree(report.value.value(t, o), &expected) {
                return Err(Error::Defect(format!(
                    "portfolio value differs from its closed form at t={t}, outcome {o}"
                )));
            }
        }
    }
    Ok(report)
}

/// Risk-minimizing hedge computed directly under the enlarged filtration:
/// project the claim martingale on the stopped assets, with no
/// market-level formulas involved. Supports several assets.
pub fn hedge_G_direct<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    assets: &[Process<T>],
    bundle: &EnlargementBundle<T>,
) -> Result<HedgeReport<T>> {
    if assets.is_empty() {
        return Err(Error::Dimension("at least one asset is required".into()));
    }
    let stopped: Vec<Process<T>> = assets.iter().map(|a| a.stopped(&bundle.tau)).collect();
    for s in &stopped {
        if !is_martingale(space, s, &bundle.g_filtration).ok {
            return Err(Error::NotMartingale(
                "stopped asset fails the martingale test under the enlarged filtration".into(),
            ));
        }
    }
    let h = martingale_from_terminal(space, &claim.payoff(&bundle.tau), &bundle.g_filtration);
    let parts = gkw(space, &h, &stopped, &bundle.g_filtration, false)?;
    finish_report(
        space,
        claim,
        parts.integrands,
        &stopped,
        parts.residual,
        &h,
        bundle,
        &bundle.g_filtration,
        Vec::new(),
        vec!["direct projection under the enlarged filtration".into()],
    )
}

/// One leg of a product-claim decomposition: a market martingale with its
/// integrand and residual against the asset.
#[derive(Clone, Debug)]
pub struct ComponentHedge<T: Scalar> {
    pub martingale: Process<T>,
    pub strategy: Process<T>,
    pub residual: Process<T>,
}

struct ProductLegs<T: Scalar> {
    benefit: ComponentHedge<T>,
    survival: ComponentHedge<T>,
    covariance: ComponentHedge<T>,
    product_mart: Process<T>,
}

/// Decomposes `E[g·G_term | F_t]` into benefit, survival-probability and
/// covariance legs, and verifies the product decomposition
/// `M = G_0 U_0 + G_−·U + U_−·G + Cor` pathwise.
fn split_product_legs<T: Scalar>(
    space: &FilteredSpace<T>,
    g: &[T],
    term: usize,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<ProductLegs<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    if !space.filtration().at(term).is_measurable(g) {
        return Err(Error::Measurability(
            "survival benefit must be known at the term".into(),
        ));
    }
    let u_g = martingale_from_terminal(space, g, space.filtration());
    let surface = survival_surface(space, &bundle.tau, term).capped_at(term);
    let product_terminal: Vec<T> = (0..k)
        .map(|o| g[o].clone() * bundle.g.value(term, o).clone())
        .collect();
    let product_mart = martingale_from_terminal(space, &product_terminal, space.filtration());

    let br = bracket(&surface, &u_g)?;
    let cor_values: Vec<Vec<T>> = (0..=n)
        .map(|t| {
            (0..k)
                .map(|o| {
                    br.value(t, o).clone() + product_mart.value(t, o).clone()
                        - surface.value(t, o).clone() * u_g.value(t, o).clone()
                })
                .collect()
        })
        .collect();
    let cor = Process::adapted(cor_values, space.filtration())?;

    // Product decomposition of the conditional expectation.
    for o in 0..k {
        let mut acc = surface.value(0, o).clone() * u_g.value(0, o).clone()
            + cor.value(0, o).clone();
        if !agree(product_mart.value(0, o), &acc) {
            return Err(Error::Defect("product decomposition failed at t=0".into()));
        }
        for t in 1..=n {
            acc = acc
                + surface.value(t - 1, o).clone() * u_g.delta(t, o)
                + u_g.value(t - 1, o).clone() * surface.delta(t, o)
                + cor.delta(t, o);
            if !agree(product_mart.value(t, o), &acc) {
                return Err(Error::Defect(format!(
                    "product decomposition failed at t={t}, outcome {o}"
                )));
            }
        }
    }

    let (xi_b, l_b) = gkw_single(space, &u_g, asset)?;
    let (xi_s, l_s) = gkw_single(space, &surface, asset)?;
    let (xi_c, l_c) = gkw_single(space, &cor, asset)?;
    Ok(ProductLegs {
        benefit: ComponentHedge {
            martingale: u_g,
            strategy: xi_b,
            residual: l_b,
        },
        survival: ComponentHedge {
            martingale: surface,
            strategy: xi_s,
            residual: l_s,
        },
        covariance: ComponentHedge {
            martingale: cor,
            strategy: xi_c,
            residual: l_c,
        },
        product_mart,
    })
}

/// Pure-endowment decomposition: benefit, survival-probability and
/// covariance legs whose combination is verified against the direct
/// market hedge of `g·G_term`, plus the transferred hedge report.
#[derive(Clone, Debug)]
pub struct EndowmentSplit<T: Scalar> {
    pub benefit: ComponentHedge<T>,
    pub survival: ComponentHedge<T>,
    pub covariance: ComponentHedge<T>,
    pub product_mart: Process<T>,
    pub combined_strategy: Process<T>,
    pub combined_residual: Process<T>,
    pub report: HedgeReport<T>,
}

pub fn endowment_split<T: Scalar>(
    space: &FilteredSpace<T>,
    g: &[T],
    term: usize,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<EndowmentSplit<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let legs = split_product_legs(space, g, term, asset, bundle)?;
    let (xi_h, l_h) = gkw_single(space, &legs.product_mart, asset)?;

    for s in 1..=n {
        for o in 0..k {
            let combo = legs.survival.martingale.value(s - 1, o).clone()
                * legs.benefit.strategy.value(s, o).clone()
                + legs.benefit.martingale.value(s - 1, o).clone()
                    * legs.survival.strategy.value(s, o).clone()
                + legs.covariance.strategy.value(s, o).clone();
            if !agree(xi_h.value(s, o), &combo) {
                return Err(Error::Defect(format!(
                    "strategy legs do not combine to the direct hedge at t={s}, outcome {o}"
                )));
            }
        }
    }
    for o in 0..k {
        let mut acc = T::zero();
        for t in 1..=n {
            acc = acc
                + legs.survival.martingale.value(t - 1, o).clone()
                    * legs.benefit.residual.delta(t, o)
                + legs.benefit.martingale.value(t - 1, o).clone()
                    * legs.survival.residual.delta(t, o)
                + legs.covariance.residual.delta(t, o);
            if !agree(l_h.value(t, o), &acc) {
                return Err(Error::Defect(format!(
                    "residual legs do not combine to the direct hedge at t={t}, outcome {o}"
                )));
            }
        }
    }

    let claim = Claim::pure_endowment(space, term, g.to_vec())?;
    let mut report = hedge_G(space, &claim, asset, bundle)?;
    report.attribution.extend([
        (
            "survival-benefit leg strategy".to_string(),
            legs.benefit.strategy.clone(),
        ),
        (
            "survival-probability leg strategy".to_string(),
            legs.survival.strategy.clone(),
        ),
        (
            "covariance leg strategy".to_string(),
            legs.covariance.strategy.clone(),
        ),
    ]);
    Ok(EndowmentSplit {
        benefit: legs.benefit,
        survival: legs.survival,
        covariance: legs.covariance,
        product_mart: legs.product_mart,
        combined_strategy: xi_h,
        combined_residual: l_h,
        report,
    })
}

/// Annuity decomposition: the endowment legs for the terminal accumulator
/// value plus the death leg paying the accumulator at the death time.
#[derive(Clone, Debug)]
pub struct AnnuitySplit<T: Scalar> {
    pub terminal_benefit: ComponentHedge<T>,
    pub survival: ComponentHedge<T>,
    pub covariance: ComponentHedge<T>,
    pub death_leg: ComponentHedge<T>,
    /// Running integral of the accumulator against the death compensator.
    pub accumulated_at_death: Process<T>,
    pub combined_strategy: Process<T>,
    pub combined_residual: Process<T>,
    pub report: HedgeReport<T>,
}

pub fn annuity_split<T: Scalar>(
    space: &FilteredSpace<T>,
    accumulator: &Process<T>,
    term: usize,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<AnnuitySplit<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let claim = Claim::annuity(space, term, accumulator.clone())?;
    let legs = split_product_legs(space, &claim.survival_benefit, term, asset, bundle)?;

    let accumulated_at_death = benefit_against_compensator(&claim.death_benefit, bundle)?;
    let death_mart = death_claim_martingale(space, &claim.death_benefit, bundle)?;
    let (xi_d, l_d) = gkw_single(space, &death_mart, asset)?;

    let combined_mart = legs.product_mart.add(&death_mart);
    let (xi_h, l_h) = gkw_single(space, &combined_mart, asset)?;

    for s in 1..=n {
        for o in 0..k {
            let combo = legs.survival.martingale.value(s - 1, o).clone()
                * legs.benefit.strategy.value(s, o).clone()
                + legs.benefit.martingale.value(s - 1, o).clone()
                    * legs.survival.strategy.value(s, o).clone()
                + legs.covariance.strategy.value(s, o).clone()
                + xi_d.value(s, o).clone();
            if !agree(xi_h.value(s, o), &combo) {
                return Err(Error::Defect(format!(
                    "annuity strategy legs do not combine at t={s}, outcome {o}"
                )));
            }
        }
    }
    for o in 0..k {
        let mut acc = T::zero();
        for t in 1..=n {
            acc = acc
                + legs.survival.martingale.value(t - 1, o).clone()
                    * legs.benefit.residual.delta(t, o)
                + legs.benefit.martingale.value(t - 1, o).clone()
                    * legs.survival.residual.delta(t, o)
                + legs.covariance.residual.delta(t, o)
                + l_d.delta(t, o);
            if !agree(l_h.value(t, o), &acc) {
                return Err(Error::Defect(format!(
                    "annuity residual legs do not combine at t={t}, outcome {o}"
                )));
            }
        }
    }

    let mut report = hedge_G(space, &claim, asset, bundle)?;
    report.attribution.extend([
        (
            "terminal-benefit leg strategy".to_string(),
            legs.benefit.strategy.clone(),
        ),
        (
            "survival-probability leg strategy".to_string(),
            legs.survival.strategy.clone(),
        ),
        (
            "covariance leg strategy".to_string(),
            legs.covariance.strategy.clone(),
        ),
        ("death leg strategy".to_string(), xi_d.clone()),
    ]);
    Ok(AnnuitySplit {
        terminal_benefit: legs.benefit,
        survival: legs.survival,
        covariance: legs.covariance,
        death_leg: ComponentHedge {
            martingale: death_mart,
            strategy: xi_d,
            residual: l_d,
        },
        accumulated_at_death,
        combined_strategy: xi_h,
        combined_residual: l_h,
        report,
    })
}

/// If the death time's conditional law given every terminal market atom
/// is the same, returns the deterministic survival curve `t ↦ P(τ > t)`.
pub fn independent_survival_probabilities<T: Scalar>(
    space: &FilteredSpace<T>,
    tau: &RandomTime,
) -> Option<Vec<T>> {
    let n = space.horizon();
    let mut reference: Option<Vec<T>> = None;
    for atom in space.filtration().at(n).atoms() {
        let total = space.atom_weight(atom);
        let mut law = vec![T::zero(); n + 1];
        for &o in atom {
            let idx = match tau.at(o) {
                EventTime::At(s) => s - 1,
                EventTime::Beyond => n,
            };
            law[idx] = law[idx].clone() + space.atom_weight(&[o]);
        }
        for q in law.iter_mut() {
            *q = q.clone() / total.clone();
        }
        match &reference {
            None => reference = Some(law),
            Some(r) => {
                if !r.iter().zip(&law).all(|(a, b)| agree(a, b)) {
                    return None;
                }
            }
        }
    }
    let law = reference?;
    let p_gt: Vec<T> = (0..=n)
        .map(|t| {
            let mut acc = T::zero();
            for q in law.iter().skip(t) {
                acc = acc + q.clone();
            }
            acc
        })
        .collect();
    Some(p_gt)
}

/// Closed-form risk-minimizing hedge when a special-case predicate holds:
/// independent mortality (for pure endowments and annuities) or a
/// pseudo-stopping death time (any claim). Errors when no predicate
/// applies.
pub fn special_case_formulas<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<HedgeReport<T>> {
    if let Some(p_gt) = independent_survival_probabilities(space, &bundle.tau) {
        if p_gt[claim.term].is_positive() {
            let death_free = claim
                .death_benefit
                .values()
                .iter()
                .all(|slice| slice.iter().all(|v| v.is_zero()));
            if death_free && claim.annuity.is_none() {
                return independent_endowment_formula(space, claim, asset, bundle, &p_gt);
            }
            if claim.annuity.is_some() {
                return independent_annuity_formula(space, claim, asset, bundle, &p_gt);
            }
        }
    }
    if is_pseudo_stopping(bundle) {
        return pseudo_stopping_formula(space, claim, asset, bundle);
    }
    Err(Error::Precondition(
        "predicate not satisfied: mortality is neither independent with surviving mass nor pseudo-stopping".into(),
    ))
}

/// Hedge under a pseudo-stopping death time: the market strategy scaled
/// by `1/G_−` while alive, with the residual made of the re-scaled market
/// residual and the pure-death component stopped at the term.
fn pseudo_stopping_formula<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
) -> Result<HedgeReport<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let legs = market_legs(space, claim, asset, bundle)?;

    let mut xi_values = vec![vec![T::zero(); k]];
    let mut l_values = vec![vec![T::zero(); k]];
    for s in 1..=n {
        let mut xi_slice = Vec::with_capacity(k);
        let mut l_slice = Vec::with_capacity(k);
        for o in 0..k {
            let alive = bundle.tau.at(o).ge(s);
            let mut xi = T::zero();
            let mut l_inc = T::zero();
            if alive {
                let g_prev = bundle.g.value(s - 1, o).clone();
                if s <= claim.term {
                    xi = legs.xi_f.value(s, o).clone() / g_prev.clone();
                }
                l_inc = l_inc + legs.l_f.delta(s, o) / g_prev;
            }
            let before_r = match bundle.r[o] {
                EventTime::At(r) => s < r,
                EventTime::Beyond => true,
            };
            if before_r && s <= claim.term {
                let g_now = bundle.g.value(s, o).clone();
                let coeff = claim.death_benefit.value(s, o).clone() * g_now.clone()
                    - legs.mk.value(s, o).clone()
                    + legs.kdof.value(s, o).clone()
                    - legs.mg.value(s, o).clone();
                l_inc = l_inc + coeff * bundle.ng.delta(s, o) / g_now;
            }
            xi_slice.push(xi);
            l_slice.push(l_values[s - 1][o].clone() + l_inc);
        }
        xi_values.push(xi_slice);
        l_values.push(l_slice);
    }
    let xi = Process::predictable(xi_values, &bundle.g_filtration)?;
    let l = Process::adapted(l_values, &bundle.g_filtration)?;
    let h = martingale_from_terminal(space, &claim.payoff(&bundle.tau), &bundle.g_filtration);
    let stopped = asset.stopped(&bundle.tau);
    finish_report(
        space,
        claim,
        vec![xi],
        std::slice::from_ref(&stopped),
        l,
        &h,
        bundle,
        &bundle.g_filtration,
        Vec::new(),
        vec!["pseudo-stopping closed form".into()],
    )
}

/// Pure endowment under independent mortality: scale the market hedge of
/// the benefit by deterministic survival ratios; the residual adds the
/// benefit-value-weighted pure-death component.
fn independent_endowment_formula<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
    p_gt: &[T],
) -> Result<HedgeReport<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let p_term = p_gt[claim.term].clone();
    let u_g = martingale_from_terminal(space, &claim.survival_benefit, space.filtration());
    let (xi_g, l_g) = gkw_single(space, &u_g, asset)?;

    let mut xi_values = vec![vec![T::zero(); k]];
    let mut l_values = vec![vec![T::zero(); k]];
    for s in 1..=n {
        let p_ge = p_gt[s - 1].clone();
        let mut xi_slice = Vec::with_capacity(k);
        let mut l_slice = Vec::with_capacity(k);
        for o in 0..k {
            let alive = bundle.tau.at(o).ge(s);
            let mut xi = T::zero();
            let mut l_inc = T::zero();
            if alive {
                if s <= claim.term {
                    xi = p_term.clone() * xi_g.value(s, o).clone() / p_ge.clone();
                }
                l_inc = l_inc + p_term.clone() * l_g.delta(s, o) / p_ge.clone();
            }
            if s <= claim.term {
                l_inc = l_inc
                    - p_term.clone() * u_g.value(s, o).clone() * bundle.ng.delta(s, o)
                        / p_gt[s].clone();
            }
            xi_slice.push(xi);
            l_slice.push(l_values[s - 1][o].clone() + l_inc);
        }
        xi_values.push(xi_slice);
        l_values.push(l_slice);
    }
    let xi = Process::predictable(xi_values, &bundle.g_filtration)?;
    let l = Process::adapted(l_values, &bundle.g_filtration)?;
    let h = martingale_from_terminal(space, &claim.payoff(&bundle.tau), &bundle.g_filtration);
    let stopped = asset.stopped(&bundle.tau);
    finish_report(
        space,
        claim,
        vec![xi],
        std::slice::from_ref(&stopped),
        l,
        &h,
        bundle,
        &bundle.g_filtration,
        Vec::new(),
        vec!["independent-mortality pure-endowment closed form".into()],
    )
}

/// Endowment insurance under independent mortality: combine the market
/// hedges of the terminal accumulator value and of the death leg, scaled
/// by deterministic survival ratios.
fn independent_annuity_formula<T: Scalar>(
    space: &FilteredSpace<T>,
    claim: &Claim<T>,
    asset: &Process<T>,
    bundle: &EnlargementBundle<T>,
    p_gt: &[T],
) -> Result<HedgeReport<T>> {
    let n = space.horizon();
    let k = space.n_outcomes();
    let p_term = p_gt[claim.term].clone();
    let u_ct = martingale_from_terminal(space, &claim.survival_benefit, space.filtration());
    let (xi_ct, l_ct) = gkw_single(space, &u_ct, asset)?;
    let kdof = benefit_against_compensator(&claim.death_benefit, bundle)?;
    let death_mart = death_claim_martingale(space, &claim.death_benefit, bundle)?;
    let (xi_d, l_d) = gkw_single(space, &death_mart, asset)?;

    let mut xi_values = vec![vec![T::zero(); k]];
    let mut l_values = vec![vec![T::zero(); k]];
    for s in 1..=n {
        let p_ge = p_gt[s - 1].clone();
        let mut xi_slice = Vec::with_capacity(k);
        let mut l_slice = Vec::with_capacity(k);
        for o in 0..k {
            let alive = bundle.tau.at(o).ge(s);
            let mut xi = T::zero();
            let mut l_inc = T::zero();
            if alive {
                if s <= claim.term {
                    xi = (p_term.clone() * xi_ct.value(s, o).clone()
                        + xi_d.value(s, o).clone())
                        / p_ge.clone();
                }
                l_inc = l_inc
                    + (p_term.clone() * l_ct.delta(s, o) + l_d.delta(s, o)) / p_ge.clone();
            }
            if s <= claim.term && p_gt[s].is_positive() {
                let coeff = claim.death_benefit.value(s, o).clone() * p_gt[s].clone()
                    - death_mart.value(s, o).clone()
                    + kdof.value(s, o).clone()
                    - p_term.clone() * u_ct.value(s, o).clone();
                l_inc = l_inc + coeff * bundle.ng.delta(s, o) / p_gt[s].clone();
            }
            xi_slice.push(xi);
            l_slice.push(l_values[s - 1][o].clone() + l_inc);
        }
        xi_values.push(xi_slice);
        l_values.push(l_slice);
    }
    let xi = Process::predictable(xi_values, &bundle.g_filtration)?;
    let l = Process::adapted(l_values, &bundle.g_filtration)?;
    let h = martingale_from_terminal(space, &claim.payoff(&bundle.tau), &bundle.g_filtration);
    let stopped = asset.stopped(&bundle.tau);
    finish_report(
        space,
        claim,
        vec![xi],
        std::slice::from_ref(&stopped),
        l,
        &h,
        bundle,
        &bundle.g_filtration,
        Vec::new(),
        vec!["independent-mortality annuity closed form".into()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enlargement::azema_bundle;
    use crate::enlargement::tests::{
        anticipative_asset_model, hazard_two_driver_model, independent_coin_model,
        observable_death_model,
    };
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn up_indicator(model: &crate::build::Model<Rational>) -> Vec<Rational> {
        (0..model.space.n_outcomes())
            .map(|o| {
                if model.asset.value(1, o) > model.asset.value(0, o) {
                    r(1, 1)
                } else {
                    r(0, 1)
                }
            })
            .collect()
    }

    #[test]
    fn phi_m_vanishes_under_constant_survival_drift() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let pm = phi_m(&model.space, &model.asset, &bundle).unwrap();
        for t in 0..=1 {
            assert!(pm.u.at(t).iter().all(|v| v.is_zero()));
            assert!(pm.phi.at(t).iter().all(|v| v.is_zero()));
            assert!(pm.residual.at(t).iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn phi_m_keeps_exact_identities_with_moving_drift() {
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let pm = phi_m(&model.space, &model.asset, &bundle).unwrap();
        // The interaction process genuinely moves here.
        assert!(pm.u.values().iter().flatten().any(|v| !v.is_zero()));
    }

    #[test]
    fn phi_m_rejects_invalid_model() {
        let model = anticipative_asset_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        assert!(matches!(
            phi_m(&model.space, &model.asset, &bundle),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn market_hedge_replicates_traded_payoff() {
        let model = hazard_two_driver_model();
        let terminal = model.asset.at(2).to_vec();
        let (xi, l) = hedge_F(&model.space, &terminal, &model.asset).unwrap();
        for t in 1..=2 {
            assert!(xi.at(t).iter().all(|v| *v == r(1, 1)));
            assert!(l.at(t).iter().all(|v| v.is_zero()));
        }
        let constant = vec![r(5, 1); model.space.n_outcomes()];
        let (xi0, _) = hedge_F(&model.space, &constant, &model.asset).unwrap();
        assert!(xi0.values().iter().flatten().all(|v| v.is_zero()));
    }

    #[test]
    fn market_hedge_one_step_regression() {
        let model = independent_coin_model();
        let (xi, _) = hedge_F(&model.space, &up_indicator(&model), &model.asset).unwrap();
        assert_eq!(xi.at(1), vec![r(1, 2); 4].as_slice());
    }

    #[test]
    fn transfer_hedge_pins_coin_endowment() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim = Claim::pure_endowment(&model.space, 1, up_indicator(&model)).unwrap();
        let report = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert_eq!(report.initial_capital, r(1, 4));
        assert_eq!(report.strategy[0].at(1), vec![r(1, 4); 4].as_slice());
        assert_eq!(
            report.residual.at(1),
            &[r(-1, 2), r(1, 2), r(0, 1), r(0, 1)]
        );
        assert_eq!(*report.risk.value(0, 0), r(1, 8));
    }

    #[test]
    fn transfer_hedge_of_zero_claim_is_zero() {
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim =
            Claim::pure_endowment(&model.space, 2, vec![r(0, 1); model.space.n_outcomes()])
                .unwrap();
        let report = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert!(report.initial_capital.is_zero());
        assert!(report.strategy[0].values().iter().flatten().all(|v| v.is_zero()));
        assert!(report.residual.values().iter().flatten().all(|v| v.is_zero()));
    }

    #[test]
    fn direct_route_matches_transfer_route() {
        // Pure endowment on the coin model.
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim = Claim::pure_endowment(&model.space, 1, up_indicator(&model)).unwrap();
        let via_formula = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        let direct =
            hedge_G_direct(&model.space, &claim, std::slice::from_ref(&model.asset), &bundle)
                .unwrap();
        assert_eq!(
            via_formula.strategy[0].values(),
            direct.strategy[0].values()
        );
        assert_eq!(via_formula.residual.values(), direct.residual.values());
        assert_eq!(via_formula.risk.value(0, 0), direct.risk.value(0, 0));

        // Term insurance paying the asset value, on the two-driver model.
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim = Claim::term_insurance(&model.space, 2, model.asset.clone()).unwrap();
        let via_formula = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        let direct =
            hedge_G_direct(&model.space, &claim, std::slice::from_ref(&model.asset), &bundle)
                .unwrap();
        assert_eq!(
            via_formula.strategy[0].values(),
            direct.strategy[0].values()
        );
        assert_eq!(via_formula.residual.values(), direct.residual.values());
    }

    #[test]
    fn zero_strategy_risk_is_payoff_variance() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim = Claim::pure_endowment(&model.space, 1, up_indicator(&model)).unwrap();
        let zero_xi = Process::predictable(
            vec![vec![r(0, 1); 4], vec![r(0, 1); 4]],
            &bundle.g_filtration,
        )
        .unwrap();
        let stopped = model.asset.stopped(&bundle.tau);
        let (_, _, risk) = evaluate_strategy(
            &model.space,
            std::slice::from_ref(&zero_xi),
            &claim,
            std::slice::from_ref(&stopped),
            &bundle,
            &bundle.g_filtration,
        )
        .unwrap();
        // Var(payoff) = 1/4 - 1/16 = 3/16.
        assert_eq!(*risk.value(0, 0), r(3, 16));
    }

    #[test]
    fn endowment_split_on_coin_is_carried_by_benefit_leg() {
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let split =
            endowment_split(&model.space, &up_indicator(&model), 1, &model.asset, &bundle)
                .unwrap();
        // Deterministic survival probability: that leg contributes nothing.
        assert!(split.survival.strategy.values().iter().flatten().all(|v| v.is_zero()));
        assert!(split.covariance.martingale.values().iter().flatten().all(|v| v.is_zero()));
        assert_eq!(split.combined_strategy.at(1), vec![r(1, 4); 4].as_slice());
        assert_eq!(split.report.initial_capital, r(1, 4));
    }

    #[test]
    fn endowment_split_deterministic_benefit() {
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let g = vec![r(3, 1); model.space.n_outcomes()];
        let split = endowment_split(&model.space, &g, 2, &model.asset, &bundle).unwrap();
        assert!(split.benefit.strategy.values().iter().flatten().all(|v| v.is_zero()));
        assert!(split.covariance.martingale.values().iter().flatten().all(|v| v.is_zero()));
        // Combined strategy = benefit value × survival-probability leg.
        for s in 1..=2 {
            for o in 0..model.space.n_outcomes() {
                assert_eq!(
                    split.combined_strategy.value(s, o).clone(),
                    r(3, 1) * split.survival.strategy.value(s, o).clone()
                );
            }
        }
    }

    #[test]
    fn annuity_split_deterministic_accumulator() {
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let k = model.space.n_outcomes();
        let acc = Process::adapted(
            vec![
                vec![r(0, 1); k],
                vec![r(1, 2); k],
                vec![r(1, 1); k],
            ],
            model.space.filtration(),
        )
        .unwrap();
        let split = annuity_split(&model.space, &acc, 2, &model.asset, &bundle).unwrap();
        // Deterministic terminal value: its market hedge is empty.
        assert!(split.terminal_benefit.strategy.values().iter().flatten().all(|v| v.is_zero()));
        assert!(split.covariance.martingale.values().iter().flatten().all(|v| v.is_zero()));

        let decreasing = Process::adapted(
            vec![
                vec![r(0, 1); k],
                vec![r(1, 1); k],
                vec![r(1, 2); k],
            ],
            model.space.filtration(),
        )
        .unwrap();
        assert!(matches!(
            annuity_split(&model.space, &decreasing, 2, &model.asset, &bundle),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn special_cases_match_transfer_route() {
        // Independent mortality, pure endowment.
        let model = independent_coin_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim = Claim::pure_endowment(&model.space, 1, up_indicator(&model)).unwrap();
        let special = special_case_formulas(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert!(special
            .notes
            .iter()
            .any(|n| n.contains("independent-mortality")));
        let general = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert_eq!(special.strategy[0].values(), general.strategy[0].values());
        assert_eq!(special.residual.values(), general.residual.values());

        // Pseudo-stopping (observable death, not independent): insured
        // pays 1 at death within the term.
        let model = observable_death_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let one = Process::constant(r(1, 1), 1, model.space.n_outcomes());
        let claim = Claim::term_insurance(&model.space, 1, one).unwrap();
        assert!(independent_survival_probabilities(&model.space, &model.tau).is_none());
        let special = special_case_formulas(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert!(special.notes.iter().any(|n| n.contains("pseudo-stopping")));
        assert_eq!(special.strategy[0].at(1), vec![r(-1, 2); 2].as_slice());
        assert!(special.residual.values().iter().flatten().all(|v| v.is_zero()));
        let general = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert_eq!(special.strategy[0].values(), general.strategy[0].values());
        assert_eq!(special.residual.values(), general.residual.values());

        // Neither predicate holds on the anticipative model.
        let model = anticipative_asset_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        let claim =
            Claim::pure_endowment(&model.space, 2, vec![r(1, 1); model.space.n_outcomes()])
                .unwrap();
        assert!(matches!(
            special_case_formulas(&model.space, &claim, &model.asset, &bundle),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn term_cap_zeroes_strategy_after_the_term() {
        let model = hazard_two_driver_model();
        let bundle = azema_bundle(&model.space, &model.tau).unwrap();
        // Benefit known at time 1, term 1, on a two-step model.
        let g: Vec<Rational> = (0..model.space.n_outcomes())
            .map(|o| {
                if model.asset.value(1, o) > model.asset.value(0, o) {
                    r(2, 1)
                } else {
                    r(1, 2)
                }
            })
            .collect();
        let claim = Claim::pure_endowment(&model.space, 1, g).unwrap();
        let report = hedge_G(&model.space, &claim, &model.asset, &bundle).unwrap();
        assert!(report.strategy[0].at(2).iter().all(|v| v.is_zero()));
        let direct =
            hedge_G_direct(&model.space, &claim, std::slice::from_ref(&model.asset), &bundle)
                .unwrap();
        assert_eq!(report.strategy[0].values(), direct.strategy[0].values());
        assert_eq!(report.residual.values(), direct.residual.values());
    }
}
