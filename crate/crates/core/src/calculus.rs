//! Discrete-time stochastic calculus: integrals, brackets, dual
//! projections, compensators, martingale and orthogonality diagnostics,
//! and the orthogonal (GKW) decomposition against a set of integrators.
//!
//! Conventions: `(H·X)_t = Σ_{s=1..t} H_s (X_s − X_{s−1})` for predictable
//! `H`; `[X,Y]_t = Σ_{s=1..t} ΔX_s ΔY_s`; every produced process is 0 at
//! `t = 0` unless stated otherwise.

use crate::error::{Error, Result};
use crate::linalg::min_norm_psd_solve;
use crate::scalar::{ratio_or_zero, Scalar};
use crate::space::{FilteredSpace, Filtration, Process, ProjectionMode, Tag};

fn require_not_raw<T: Scalar>(x: &Process<T>, role: &str) -> Result<()> {
    if x.tag() == Tag::Raw {
        return Err(Error::Measurability(format!(
            "{role} must carry an adapted or predictable tag"
        )));
    }
    Ok(())
}

fn require_same_shape<T: Scalar>(x: &Process<T>, y: &Process<T>) -> Result<()> {
    if x.horizon() != y.horizon() || x.n_outcomes() != y.n_outcomes() {
        return Err(Error::Dimension(
            "processes live on different spaces".into(),
        ));
    }
    Ok(())
}

/// Stochastic integral of a predictable integrand against one integrator.
pub fn integrate<T: Scalar>(h: &Process<T>, x: &Process<T>) -> Result<Process<T>> {
    if h.tag() != Tag::Predictable {
        return Err(Error::Measurability(
            "integrand must carry the predictable tag".into(),
        ));
    }
    require_not_raw(x, "integrator")?;
    require_same_shape(h, x)?;
    let n_outcomes = x.n_outcomes();
    let mut values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=x.horizon() {
        let prev = &values[t - 1];
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| prev[o].clone() + h.value(t, o).clone() * x.delta(t, o))
            .collect();
        values.push(slice);
    }
    // Sum of products of predictable and adapted slices is adapted.
    Ok(Process::raw(values, x.horizon(), n_outcomes)?.into_adapted_unchecked())
}

/// Inner-product stochastic integral `Σ_i H_i·X_i` for a strategy over
/// several integrators.
pub fn integrate_many<T: Scalar>(hs: &[Process<T>], xs: &[Process<T>]) -> Result<Process<T>> {
    if hs.len() != xs.len() {
        return Err(Error::Dimension(format!(
            "{} integrands for {} integrators",
            hs.len(),
            xs.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::Dimension("empty integrator list".into()));
    }
    let mut acc = Process::zero(xs[0].horizon(), xs[0].n_outcomes());
    for (h, x) in hs.iter().zip(xs) {
        acc = acc.add(&integrate(h, x)?);
    }
    Ok(acc)
}

/// Quadratic covariation `[X,Y]`.
pub fn bracket<T: Scalar>(x: &Process<T>, y: &Process<T>) -> Result<Process<T>> {
    require_same_shape(x, y)?;
    let n_outcomes = x.n_outcomes();
    let mut values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=x.horizon() {
        let prev = &values[t - 1];
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| prev[o].clone() + x.delta(t, o) * y.delta(t, o))
            .collect();
        values.push(slice);
    }
    Ok(Process::raw(values, x.horizon(), n_outcomes)?.into_adapted_unchecked())
}

/// Dual projection of a finite-variation raw process: the adapted process
/// whose increments are the conditional expectations of the input's
/// increments — given the same time's atoms (optional mode) or the
/// previous step's (predictable mode, the compensator).
pub fn dual_projection<T: Scalar>(
    space: &FilteredSpace<T>,
    v: &Process<T>,
    mode: ProjectionMode,
    filtration: &Filtration,
) -> Result<Process<T>> {
    if v.at(0).iter().any(|c| !c.is_zero()) {
        return Err(Error::Precondition(
            "dual projection input must start at 0".into(),
        ));
    }
    let n_outcomes = v.n_outcomes();
    let mut values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=v.horizon() {
        let partition = match mode {
            ProjectionMode::Optional => filtration.at(t),
            ProjectionMode::Predictable => filtration.at(t - 1),
        };
        let increments: Vec<T> = (0..n_outcomes).map(|o| v.delta(t, o)).collect();
        let conditioned = space.condition(&increments, partition);
        let prev = &values[t - 1];
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| prev[o].clone() + conditioned[o].clone())
            .collect();
        values.push(slice);
    }
    let process = Process::raw(values, v.horizon(), n_outcomes)?;
    Ok(match mode {
        ProjectionMode::Optional => process.into_adapted_unchecked(),
        ProjectionMode::Predictable => process.into_predictable_unchecked(),
    })
}

/// Predictable compensator of the covariation: `⟨X,Y⟩`.
pub fn angle_bracket<T: Scalar>(
    space: &FilteredSpace<T>,
    x: &Process<T>,
    y: &Process<T>,
    filtration: &Filtration,
) -> Result<Process<T>> {
    dual_projection(
        space,
        &bracket(x, y)?,
        ProjectionMode::Predictable,
        filtration,
    )
}

/// The martingale of a terminal value: `t ↦ E[x | partition at t]`.
pub fn martingale_from_terminal<T: Scalar>(
    space: &FilteredSpace<T>,
    terminal: &[T],
    filtration: &Filtration,
) -> Process<T> {
    let values: Vec<Vec<T>> = (0..=filtration.horizon())
        .map(|t| space.condition(terminal, filtration.at(t)))
        .collect();
    Process::raw(values, filtration.horizon(), terminal.len())
        .expect("dimensions fixed by the filtration")
        .into_adapted_unchecked()
}

/// Outcome of a pass/fail process check with the worst violation located.
#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub ok: bool,
    pub worst_abs: f64,
    pub at_time: usize,
    pub at_atom: usize,
}

impl Diagnostic {
    fn clean() -> Diagnostic {
        Diagnostic {
            ok: true,
            worst_abs: 0.0,
            at_time: 0,
            at_atom: 0,
        }
    }
}

fn scale_of<T: Scalar>(x: &Process<T>) -> T {
    let mut scale = T::one();
    for t in 0..=x.horizon() {
        for v in x.at(t) {
            let a = v.abs();
            if a > scale {
                scale = a;
            }
        }
    }
    scale
}

/// Tests `E[ΔX_s | atom at s−1] = 0` for every step and atom — exactly in
/// rational mode, within `1e-10·max|X|` in float mode.
pub fn is_martingale<T: Scalar>(
    space: &FilteredSpace<T>,
    x: &Process<T>,
    filtration: &Filtration,
) -> Diagnostic {
    let scale = scale_of(x);
    let mut diag = Diagnostic::clean();
    for t in 1..=x.horizon() {
        let partition = filtration.at(t - 1);
        let increments: Vec<T> = (0..x.n_outcomes()).map(|o| x.delta(t, o)).collect();
        let conditioned = space.condition(&increments, partition);
        for (atom_idx, atom) in partition.atoms().iter().enumerate() {
            let dev = &conditioned[atom[0]];
            let fails = if T::EXACT {
                !dev.is_zero()
            } else {
                !dev.eq_within(&T::zero(), 1e-10, &scale)
            };
            if fails {
                diag.ok = false;
            }
            let mag = dev.to_f64().abs();
            if mag > diag.worst_abs {
                diag.worst_abs = mag;
                diag.at_time = t;
                diag.at_atom = atom_idx;
            }
        }
    }
    diag
}

/// Orthogonality test: `[M,N]` must itself be a martingale.
pub fn are_orthogonal<T: Scalar>(
    space: &FilteredSpace<T>,
    m: &Process<T>,
    n: &Process<T>,
    filtration: &Filtration,
) -> Result<Diagnostic> {
    Ok(is_martingale(space, &bracket(m, n)?, filtration))
}

/// Predictable density `d⟨A,B⟩/d⟨B⟩`: on each previous-step atom the ratio
/// `E[ΔA ΔB | atom] / E[(ΔB)² | atom]`, with 0/0 → 0.
pub fn density_ratio<T: Scalar>(
    space: &FilteredSpace<T>,
    a: &Process<T>,
    b: &Process<T>,
    filtration: &Filtration,
) -> Result<Process<T>> {
    require_same_shape(a, b)?;
    let n_outcomes = a.n_outcomes();
    let mut values = vec![vec![T::zero(); n_outcomes]];
    for t in 1..=a.horizon() {
        let partition = filtration.at(t - 1);
        let cross: Vec<T> = (0..n_outcomes)
            .map(|o| a.delta(t, o) * b.delta(t, o))
            .collect();
        let square: Vec<T> = (0..n_outcomes)
            .map(|o| {
                let d = b.delta(t, o);
                d.clone() * d
            })
            .collect();
        let num = space.condition(&cross, partition);
        let den = space.condition(&square, partition);
        let slice: Vec<T> = (0..n_outcomes)
            .map(|o| ratio_or_zero(num[o].clone(), &den[o]))
            .collect();
        values.push(slice);
    }
    Ok(Process::raw(values, a.horizon(), n_outcomes)?.into_predictable_unchecked())
}

/// The orthogonal decomposition `M = M_0 + Σ_i θ_i·X_i + L`.
#[derive(Clone, Debug)]
pub struct GkwParts<T: Scalar> {
    /// One predictable integrand per integrator.
    pub integrands: Vec<Process<T>>,
    /// Residual martingale starting at 0, orthogonal to every integrator.
    pub residual: Process<T>,
}

/// Computes the decomposition by solving, on every previous-step atom, the
/// normal equations `E[ΔX ΔXᵀ | atom] θ = E[ΔX ΔM | atom]`; a singular
/// conditional Gram matrix gets the minimum-norm solution.
pub fn gkw<T: Scalar>(
    space: &FilteredSpace<T>,
    m: &Process<T>,
    xs: &[Process<T>],
    filtration: &Filtration,
    check_martingales: bool,
) -> Result<GkwParts<T>> {
    if xs.is_empty() {
        return Err(Error::Dimension("empty integrator list".into()));
    }
    for x in xs {
        require_same_shape(m, x)?;
    }
    if check_martingales {
        if !is_martingale(space, m, filtration).ok {
            return Err(Error::NotMartingale(
                "decomposition target is not a martingale".into(),
            ));
        }
        for (i, x) in xs.iter().enumerate() {
            if !is_martingale(space, x, filtration).ok {
                return Err(Error::NotMartingale(format!(
                    "integrator {i} is not a martingale"
                )));
            }
        }
    }

    let horizon = m.horizon();
    let n_outcomes = m.n_outcomes();
    let d = xs.len();
    let mut theta_values: Vec<Vec<Vec<T>>> = vec![vec![vec![T::zero(); n_outcomes]]; d];

    for t in 1..=horizon {
        let partition = filtration.at(t - 1);
        let mut slices: Vec<Vec<T>> = vec![vec![T::zero(); n_outcomes]; d];
        for atom in partition.atoms() {
            let atom_weight = space.atom_weight(atom);
            let cond = |f: &dyn Fn(usize) -> T| -> T {
                let mut acc = T::zero();
                for &o in atom {
                    acc = acc + space.weight(o).clone() * f(o);
                }
                acc / atom_weight.clone()
            };
            let gram: Vec<Vec<T>> = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| cond(&|o| xs[i].delta(t, o) * xs[j].delta(t, o)))
                        .collect()
                })
                .collect();
            let rhs: Vec<T> = (0..d)
                .map(|i| cond(&|o| xs[i].delta(t, o) * m.delta(t, o)))
                .collect();
            let theta = min_norm_psd_solve(&gram, &rhs).ok_or_else(|| {
                Error::Defect("conditional normal equations unexpectedly inconsistent".into())
            })?;
            for i in 0..d {
                for &o in atom {
                    slices[i][o] = theta[i].clone();
                }
            }
        }
        for (i, slice) in slices.into_iter().enumerate() {
            theta_values[i].push(slice);
        }
    }

    let integrands: Vec<Process<T>> = theta_values
        .into_iter()
        .map(|values| {
            Process::raw(values, horizon, n_outcomes)
                .expect("dimensions by construction")
                .into_predictable_unchecked()
        })
        .collect();
    let hedged = integrate_many(&integrands, xs)?;
    let m0 = Process::constant(m.at(0)[0].clone(), horizon, n_outcomes);
    let residual = m.sub(&m0).sub(&hedged);
    Ok(GkwParts {
        integrands,
        residual,
    })
}

impl<T: Scalar> GkwParts<T> {
    /// Asserts the decomposition invariants: pathwise reconstruction,
    /// residual martingality, and orthogonality to every integrator.
    pub fn verify(
        &self,
        space: &FilteredSpace<T>,
        m: &Process<T>,
        xs: &[Process<T>],
        filtration: &Filtration,
    ) -> Result<()> {
        let hedged = integrate_many(&self.integrands, xs)?;
        let m0 = Process::constant(m.at(0)[0].clone(), m.horizon(), m.n_outcomes());
        let rebuilt = m0.add(&hedged).add(&self.residual);
        for t in 0..=m.horizon() {
            for o in 0..m.n_outcomes() {
                if rebuilt.value(t, o) != m.value(t, o) {
                    return Err(Error::Defect(format!(
                        "decomposition does not rebuild the target at t={t}"
                    )));
                }
            }
        }
        if !is_martingale(space, &self.residual, filtration).ok {
            return Err(Error::Defect("residual is not a martingale".into()));
        }
        for x in xs {
            let diag = are_orthogonal(space, &self.residual, x, filtration)?;
            if !diag.ok {
                return Err(Error::Defect(
                    "residual correlates with an integrator".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::tests::one_step_coin_market;
    use crate::build::{build_space, DeathLaw};
    use crate::scalar::Rational;
    use crate::space::tests::coin_space;

    fn r(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn unit_integrand_recovers_the_increment() {
        let (space, _, s) = coin_space();
        let one = Process::predictable(vec![vec![r(1, 1); 4]; 2], space.filtration()).unwrap();
        let integral = integrate(&one, &s).unwrap();
        assert_eq!(integral.at(1), &[r(1, 1), r(1, 1), r(-1, 1), r(-1, 1)]);
        let zero = Process::predictable(vec![vec![r(0, 1); 4]; 2], space.filtration()).unwrap();
        assert_eq!(integrate(&zero, &s).unwrap().at(1), vec![r(0, 1); 4].as_slice());
    }

    #[test]
    fn quarter_integrand_on_the_coin_asset() {
        let (space, _, s) = coin_space();
        let quarter =
            Process::predictable(vec![vec![r(1, 4); 4]; 2], space.filtration()).unwrap();
        let integral = integrate(&quarter, &s).unwrap();
        assert_eq!(integral.at(1), &[r(1, 4), r(1, 4), r(-1, 4), r(-1, 4)]);
    }

    #[test]
    fn raw_integrand_is_rejected() {
        let (_, _, s) = coin_space();
        let raw = Process::raw(vec![vec![r(1, 1); 4]; 2], 1, 4).unwrap();
        assert!(matches!(
            integrate(&raw, &s),
            Err(Error::Measurability(_))
        ));
    }

    #[test]
    fn bracket_of_coin_asset_with_itself_is_one() {
        let (space, _, s) = coin_space();
        let constant = Process::constant(r(7, 1), 1, 4);
        assert_eq!(bracket(&s, &constant).unwrap().at(1), vec![r(0, 1); 4].as_slice());
        assert_eq!(bracket(&s, &s).unwrap().at(1), vec![r(1, 1); 4].as_slice());
        let _ = space;
    }

    #[test]
    fn bracket_is_bilinear() {
        let (space, tau, s) = coin_space();
        let m = martingale_from_terminal(&space, &tau.ind_gt(1), space.filtration());
        let sum = s.add(&m);
        let lhs = bracket(&sum, &s).unwrap();
        let rhs = bracket(&s, &s).unwrap().add(&bracket(&m, &s).unwrap());
        assert_eq!(lhs.values(), rhs.values());
    }

    #[test]
    fn dual_projection_of_death_indicator() {
        let (space, tau, _) = coin_space();
        let d_values = vec![vec![r(0, 1); 4], tau.ind_le(1)];
        let d = Process::raw(d_values, 1, 4).unwrap();
        let dof = dual_projection(&space, &d, ProjectionMode::Optional, space.filtration())
            .unwrap();
        assert_eq!(dof.at(1), vec![r(1, 2); 4].as_slice());
        let dpf =
            dual_projection(&space, &d, ProjectionMode::Predictable, space.filtration())
                .unwrap();
        assert_eq!(dpf.at(1), vec![r(1, 2); 4].as_slice());
        // Already-adapted input in optional mode reproduces itself.
        let adapted = Process::raw(
            vec![vec![r(0, 1); 4], vec![r(3, 1); 4]],
            1,
            4,
        )
        .unwrap();
        let same =
            dual_projection(&space, &adapted, ProjectionMode::Optional, space.filtration())
                .unwrap();
        assert_eq!(same.at(1), adapted.at(1));
    }

    #[test]
    fn observable_death_has_observable_compensator_increment() {
        // Death exactly on the down move: the predictable increment at t=1
        // is the conditional death probability before the move, 1/2.
        let model = build_space(
            one_step_coin_market(),
            &DeathLaw::FStoppingRule {
                leaf_times: vec![crate::space::EventTime::Beyond, crate::space::EventTime::At(1)],
            },
        )
        .unwrap();
        let d = Process::raw(
            vec![vec![r(0, 1); 2], model.tau.ind_le(1)],
            1,
            2,
        )
        .unwrap();
        let dpf = dual_projection(
            &model.space,
            &d,
            ProjectionMode::Predictable,
            model.space.filtration(),
        )
        .unwrap();
        assert_eq!(dpf.at(1), &[r(1, 2), r(1, 2)]);
    }

    #[test]
    fn angle_bracket_of_coin_asset_is_one() {
        let (space, _, s) = coin_space();
        let ab = angle_bracket(&space, &s, &s, space.filtration()).unwrap();
        assert_eq!(ab.at(1), vec![r(1, 1); 4].as_slice());
        let constant = Process::constant(r(2, 1), 1, 4);
        assert_eq!(
            angle_bracket(&space, &s, &constant, space.filtration())
                .unwrap()
                .at(1),
            vec![r(0, 1); 4].as_slice()
        );
    }

    #[test]
    fn martingale_test_accepts_fair_and_flags_biased() {
        let (space, _, s) = coin_space();
        assert!(is_martingale(&space, &s, space.filtration()).ok);
        assert!(is_martingale(&space, &Process::constant(r(5, 1), 1, 4), space.filtration()).ok);

        // Biased coin: up with 3/5 — deviation 1/5 at t=1.
        let f0 = crate::space::Partition::trivial(2);
        let f1 = crate::space::Partition::discrete(2);
        let filtration = Filtration::new(vec![f0, f1]).unwrap();
        let space2 = FilteredSpace::new(
            1,
            vec![r(3, 5), r(2, 5)],
            filtration,
            vec!["u".into(), "d".into()],
        )
        .unwrap();
        let s2 = Process::adapted(
            vec![vec![r(1, 1), r(1, 1)], vec![r(2, 1), r(0, 1)]],
            space2.filtration(),
        )
        .unwrap();
        let diag = is_martingale(&space2, &s2, space2.filtration());
        assert!(!diag.ok);
        assert_eq!(diag.at_time, 1);
        assert!((diag.worst_abs - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_asset_decomposition_of_the_asset_itself() {
        let (space, _, s) = coin_space();
        let parts = gkw(&space, &s, std::slice::from_ref(&s), space.filtration(), true).unwrap();
        assert_eq!(parts.integrands[0].at(1), vec![r(1, 1); 4].as_slice());
        assert_eq!(parts.residual.at(1), vec![r(0, 1); 4].as_slice());
        parts
            .verify(&space, &s, std::slice::from_ref(&s), space.filtration())
            .unwrap();
    }

    #[test]
    fn decomposition_of_up_indicator_hedges_with_half() {
        let (space, _, s) = coin_space();
        let up = vec![r(1, 1), r(1, 1), r(0, 1), r(0, 1)];
        let m = martingale_from_terminal(&space, &up, space.filtration());
        let parts = gkw(&space, &m, std::slice::from_ref(&s), space.filtration(), true).unwrap();
        assert_eq!(parts.integrands[0].at(1), vec![r(1, 2); 4].as_slice());
        assert_eq!(parts.residual.at(1), vec![r(0, 1); 4].as_slice());
    }

    #[test]
    fn independent_increment_target_gets_zero_integrand() {
        let (space, tau, s) = coin_space();
        // 1{τ>1} is independent of the move on this space.
        let m = martingale_from_terminal(&space, &tau.ind_gt(1), space.filtration());
        let parts = gkw(&space, &m, std::slice::from_ref(&s), space.filtration(), true).unwrap();
        assert_eq!(parts.integrands[0].at(1), vec![r(0, 1); 4].as_slice());
        assert_eq!(parts.residual.values(), m.sub(&Process::constant(r(1, 2), 1, 4)).values());
        parts
            .verify(&space, &m, std::slice::from_ref(&s), space.filtration())
            .unwrap();
    }

    #[test]
    fn duplicated_integrator_splits_the_load_evenly() {
        let (space, _, s) = coin_space();
        let up = vec![r(1, 1), r(1, 1), r(0, 1), r(0, 1)];
        let m = martingale_from_terminal(&space, &up, space.filtration());
        let xs = vec![s.clone(), s.clone()];
        let parts = gkw(&space, &m, &xs, space.filtration(), true).unwrap();
        assert_eq!(parts.integrands[0].at(1), parts.integrands[1].at(1));
        assert_eq!(parts.integrands[0].at(1), vec![r(1, 4); 4].as_slice());
        parts.verify(&space, &m, &xs, space.filtration()).unwrap();
    }

    #[test]
    fn non_martingale_target_is_rejected_when_checked() {
        let (space, _, s) = coin_space();
        let drift = Process::adapted(
            vec![vec![r(0, 1); 4], vec![r(1, 1); 4]],
            space.filtration(),
        )
        .unwrap();
        assert!(matches!(
            gkw(&space, &drift, std::slice::from_ref(&s), space.filtration(), true),
            Err(Error::NotMartingale(_))
        ));
    }

    #[test]
    fn orthogonality_diagnostic() {
        let (space, tau, s) = coin_space();
        let m = martingale_from_terminal(&space, &tau.ind_gt(1), space.filtration());
        assert!(are_orthogonal(&space, &m, &s, space.filtration())
            .unwrap()
            .ok);
        assert!(!are_orthogonal(&space, &s, &s, space.filtration())
            .unwrap()
            .ok);
    }

    #[test]
    fn integration_by_parts_holds_pathwise() {
        let (space, tau, s) = coin_space();
        let m = martingale_from_terminal(&space, &tau.ind_gt(1), space.filtration());
        // XY − X_0 Y_0 = X_-·Y + Y_-·X + [X,Y], with the lagged paths as
        // predictable integrands.
        let product = s.mul(&m);
        let p0 = Process::constant(product.at(0)[0].clone(), 1, 4);
        let lhs = product.sub(&p0);
        let s_lag = s.lagged().with_tag(Tag::Predictable, space.filtration()).unwrap();
        let m_lag = m.lagged().with_tag(Tag::Predictable, space.filtration()).unwrap();
        let rhs = integrate(&s_lag, &m)
            .unwrap()
            .add(&integrate(&m_lag, &s).unwrap())
            .add(&bracket(&s, &m).unwrap());
        assert_eq!(lhs.values(), rhs.values());
    }

    #[test]
    fn density_ratio_matches_single_asset_decomposition() {
        let (space, _, s) = coin_space();
        let up = vec![r(1, 1), r(1, 1), r(0, 1), r(0, 1)];
        let m = martingale_from_terminal(&space, &up, space.filtration());
        let ratio = density_ratio(&space, &m, &s, space.filtration()).unwrap();
        let parts = gkw(&space, &m, std::slice::from_ref(&s), space.filtration(), true).unwrap();
        assert_eq!(ratio.at(1), parts.integrands[0].at(1));
    }
}
