//! States and coincidence statistics of the heralded disentanglement eraser.
//!
//! The source emits the three-photon state `(|x_A x_B⟩|1⟩_H + |y_A y_B⟩|0⟩_H)/√2`
//! with the herald encoding `|1⟩_H = |y⟩`, `|0⟩_H = |x⟩`. Under that encoding a
//! y-oriented herald analyzer (γ = 90°) transmits on the `|x_A x_B⟩` branch.
//!
//! Every probability here is a Born-rule evaluation on the full state. The
//! closed forms at the bottom of the module are kept only as test oracles.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use crate::error::{Error, Result};
use crate::state::{
    born_probability_unchecked, c, polarizer_bra, waveplate, BornRule, Covector, DensityMatrix,
    LinearOperator, PlateKind, PureState, C64,
};

/// Photon slots in three-photon states.
pub const PHOTON_A: usize = 0;
pub const PHOTON_B: usize = 1;
pub const PHOTON_H: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Plus,
    Minus,
}

/// `(|xx⟩ ± |yy⟩)/√2`
pub fn bell_state(parity: Parity) -> PureState {
    let sign = match parity {
        Parity::Plus => 1.0,
        Parity::Minus => -1.0,
    };
    let z = c(0.0, 0.0);
    PureState::new(
        2,
        vec![c(FRAC_1_SQRT_2, 0.0), z, z, c(sign * FRAC_1_SQRT_2, 0.0)],
    )
    .expect("two-photon amplitudes")
}

/// Source state on photons A, B, H: `(|x x y⟩ + |y y x⟩)/√2`.
pub fn ghz_state() -> PureState {
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0b001] = c(FRAC_1_SQRT_2, 0.0);
    amps[0b110] = c(FRAC_1_SQRT_2, 0.0);
    PureState::new(3, amps).expect("three-photon amplitudes")
}

/// `(|ξ+⟩, |ξ−⟩)` with `|ξ±⟩ = (|xx⟩ ± i|yy⟩)/√2`.
pub fn xi_states() -> (PureState, PureState) {
    let z = c(0.0, 0.0);
    let make = |s: f64| {
        PureState::new(
            2,
            vec![c(FRAC_1_SQRT_2, 0.0), z, z, c(0.0, s * FRAC_1_SQRT_2)],
        )
        .expect("two-photon amplitudes")
    };
    (make(1.0), make(-1.0))
}

/// The separable mixture `½(|xx⟩⟨xx| + |yy⟩⟨yy|)`.
pub fn classical_mixture() -> DensityMatrix {
    let xx = PureState::basis(2, 0b00).expect("basis");
    let yy = PureState::basis(2, 0b11).expect("basis");
    DensityMatrix::mixture(&[(0.5, &xx), (0.5, &yy)]).expect("valid mixture")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Handedness {
    Right,
    Left,
}

/// Circular single-photon state; `|R⟩ = (|x⟩ − i|y⟩)/√2`, `|L⟩ = (|x⟩ + i|y⟩)/√2`.
pub fn circular_state(h: Handedness) -> PureState {
    let s = match h {
        Handedness::Right => -1.0,
        Handedness::Left => 1.0,
    };
    PureState::single(c(1.0, 0.0), c(0.0, s)).expect("single-photon amplitudes")
}

/// Transmitted (`Plus`) or reflected (`Minus`) output of a polarizing element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeraldPort {
    Plus,
    Minus,
}

impl HeraldPort {
    pub const ALL: [HeraldPort; 2] = [HeraldPort::Plus, HeraldPort::Minus];

    fn offset(self) -> f64 {
        match self {
            HeraldPort::Plus => 0.0,
            HeraldPort::Minus => FRAC_PI_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HeraldPort::Plus => "plus",
            HeraldPort::Minus => "minus",
        }
    }
}

/// Analyzer outcome at A or B. Same geometry as a herald port.
pub type Outcome = HeraldPort;

/// How the herald photon H is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeraldStrategy {
    /// Detector placed before the herald polarizer; no polarization information.
    Direct,
    /// Polarizing splitter with its transmission axis at `gamma`.
    LinearPolarizer { gamma: f64 },
    /// Quarter-wave plate at `qwp_axis` followed by the polarizer at `gamma`.
    QuarterWavePlusPolarizer { qwp_axis: f64, gamma: f64 },
}

impl HeraldStrategy {
    /// Quarter-wave plate at 45° then an x-oriented polarizer: resolves the
    /// herald in the circular basis.
    pub fn circular() -> Self {
        HeraldStrategy::QuarterWavePlusPolarizer {
            qwp_axis: std::f64::consts::FRAC_PI_4,
            gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            HeraldStrategy::Direct => true,
            HeraldStrategy::LinearPolarizer { gamma } => gamma.is_finite(),
            HeraldStrategy::QuarterWavePlusPolarizer { qwp_axis, gamma } => {
                qwp_axis.is_finite() && gamma.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("non-finite herald angle".into()))
        }
    }

    /// Bra that `port` projects the herald photon onto, or `None` for
    /// [`HeraldStrategy::Direct`].
    pub fn port_bra(&self, port: HeraldPort) -> Option<Covector> {
        match *self {
            HeraldStrategy::Direct => None,
            HeraldStrategy::LinearPolarizer { gamma } => Some(polarizer_bra(gamma + port.offset())),
            HeraldStrategy::QuarterWavePlusPolarizer { qwp_axis, gamma } => Some(
                polarizer_bra(gamma + port.offset())
                    .after(&waveplate(PlateKind::Quarter, qwp_axis)),
            ),
        }
    }

    /// Single-photon state a click in `port` projects the herald onto.
    pub fn port_state(&self, port: HeraldPort) -> Option<PureState> {
        self.port_bra(port).map(|b| {
            let [x, y] = b.ket();
            PureState::single(x, y).expect("unit bra")
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            HeraldStrategy::Direct => "direct",
            HeraldStrategy::LinearPolarizer { .. } => "linear",
            HeraldStrategy::QuarterWavePlusPolarizer { .. } => "circular",
        }
    }
}

/// Analyzer settings for one run of the experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Quarter-wave plate axis in front of analyzer A, if inserted.
    pub qwp_a: Option<f64>,
    pub qwp_b: Option<f64>,
    pub herald: HeraldStrategy,
}

impl ExperimentConfig {
    pub fn new(alpha: f64, beta: f64, herald: HeraldStrategy) -> Self {
        Self {
            alpha,
            beta,
            qwp_a: None,
            qwp_b: None,
            herald,
        }
    }

    pub fn with_qwp_a(mut self, axis: f64) -> Self {
        self.qwp_a = Some(axis);
        self
    }

    pub fn with_qwp_b(mut self, axis: f64) -> Self {
        self.qwp_b = Some(axis);
        self
    }

    pub fn with_angles(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let angles = [Some(self.alpha), Some(self.beta), self.qwp_a, self.qwp_b];
        if angles.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite analyzer angle".into()));
        }
        self.herald.validate()
    }

    /// Effective bra of analyzer A for `outcome`, including its wave plate.
    pub fn bra_a(&self, outcome: Outcome) -> Covector {
        analyzer_bra(self.alpha, self.qwp_a, outcome)
    }

    pub fn bra_b(&self, outcome: Outcome) -> Covector {
        analyzer_bra(self.beta, self.qwp_b, outcome)
    }
}

fn analyzer_bra(angle: f64, qwp: Option<f64>, outcome: Outcome) -> Covector {
    let bra = polarizer_bra(angle + outcome.offset());
    match qwp {
        Some(axis) => bra.after(&waveplate(PlateKind::Quarter, axis)),
        None => bra,
    }
}

/// Projects H of a three-photon state onto `port` and returns the normalized
/// A,B state with the port probability.
pub fn herald_outcome(
    state: &PureState,
    strategy: &HeraldStrategy,
    port: HeraldPort,
) -> Result<(PureState, f64)> {
    if state.n_photons() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            found: state.dim(),
        });
    }
    strategy.validate()?;
    let bra = strategy.port_bra(port).ok_or_else(|| {
        Error::Contract("direct herald detection has no port-resolved conditional state".into())
    })?;
    // ⟨h|_H contracted against the last photon.
    let amps = state.amplitudes();
    let reduced: Vec<C64> = (0..4)
        .map(|ab| bra.0[0] * amps[ab << 1] + bra.0[1] * amps[(ab << 1) | 1])
        .collect();
    let probability: f64 = reduced.iter().map(|a| a.norm_sqr()).sum();
    if probability < 1e-14 {
        return Err(Error::ImpossibleOutcome { probability });
    }
    Ok((PureState::new(2, reduced)?, probability.min(1.0)))
}

/// Projector for analyzer outcomes `(a, b)` and, when the state carries a
/// herald, the herald port (`None` leaves H unmeasured).
pub fn outcome_projector(
    n_photons: usize,
    config: &ExperimentConfig,
    port: Option<HeraldPort>,
    a: Outcome,
    b: Outcome,
) -> Result<LinearOperator> {
    config.validate()?;
    let mut bras = vec![Some(config.bra_a(a)), Some(config.bra_b(b))];
    match (n_photons, port) {
        (2, None) => {}
        (2, Some(_)) => {
            return Err(Error::Contract(
                "herald port requested for a two-photon state".into(),
            ))
        }
        (3, None) => bras.push(None),
        (3, Some(p)) => {
            let bra = config
                .herald
                .port_bra(p)
                .ok_or_else(|| Error::Contract("direct herald detection has no ports".into()))?;
            bras.push(Some(bra));
        }
        (n, _) => {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: 1 << n,
            })
        }
    }
    LinearOperator::product_projector(&bras)
}

/// Born probability of the joint outcome `(port, a, b)`.
pub fn joint_probability<S: BornRule + ?Sized>(
    state: &S,
    config: &ExperimentConfig,
    port: Option<HeraldPort>,
    a: Outcome,
    b: Outcome,
) -> Result<f64> {
    let projector = outcome_projector(state.n_photons(), config, port, a, b)?;
    born_probability_unchecked(state, &projector)
}

/// Probability that both A and B transmit. For a three-photon state the
/// herald is left unmeasured (its detection without polarization analysis).
pub fn coincidence_probability<S: BornRule + ?Sized>(
    state: &S,
    config: &ExperimentConfig,
) -> Result<f64> {
    joint_probability(state, config, None, HeraldPort::Plus, HeraldPort::Plus)
}

/// `P(A+, B+ | port)` computed on the conditional A,B state left by the herald.
pub fn conditional_coincidence_probability(
    state: &PureState,
    config: &ExperimentConfig,
    port: HeraldPort,
) -> Result<f64> {
    let (conditional, _) = herald_outcome(state, &config.herald, port)?;
    coincidence_probability(&conditional, config)
}

/// A,B state when the herald is detected without polarization analysis.
pub fn unconditioned_ab_density(ghz: &PureState) -> Result<DensityMatrix> {
    if ghz.n_photons() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            found: ghz.dim(),
        });
    }
    ghz.to_density().partial_trace(&[PHOTON_A, PHOTON_B])
}

/// `½ cos²(α − β)`: transmission probability of `|Φ+⟩`.
pub fn bell_coincidence(alpha: f64, beta: f64) -> f64 {
    0.5 * (alpha - beta).cos().powi(2)
}

/// `½ (cos²α cos²β + sin²α sin²β)`: the which-branch mixture.
pub fn mixture_coincidence(alpha: f64, beta: f64) -> f64 {
    0.5 * (alpha.cos().powi(2) * beta.cos().powi(2) + alpha.sin().powi(2) * beta.sin().powi(2))
}

/// `½ (½ cos²(α − β) + ½ cos²(α + β))`: the same mixture split by parity.
pub fn parity_split_coincidence(alpha: f64, beta: f64) -> f64 {
    0.5 * (0.5 * (alpha - beta).cos().powi(2) + 0.5 * (alpha + beta).cos().powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn bell_states() {
        let p = bell_state(Parity::Plus);
        let m = bell_state(Parity::Minus);
        assert_abs_diff_eq!(p.amplitude(0).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.amplitude(3).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.amplitude(3).re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.inner(&m).unwrap().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ghz_amplitudes() {
        let g = ghz_state();
        assert_abs_diff_eq!(g.amplitude(0b001).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g.amplitude(0b110).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(g.amplitude(0b000), c(0.0, 0.0));
    }

    #[test]
    fn ghz_traces_to_classical_mixture() {
        let rho = unconditioned_ab_density(&ghz_state()).unwrap();
        let expected = classical_mixture();
        assert!(crate::state::max_abs_diff(rho.matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn xi_states_amplitudes() {
        let (p, m) = xi_states();
        assert_abs_diff_eq!(p.amplitude(3).im, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.amplitude(3).im, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.inner(&m).unwrap().norm(), 0.0, epsilon = 1e-15);
    }

    /// With `|R⟩ = (|x⟩ − i|y⟩)/√2` the source decomposes as
    /// `(−i/√2)(|ξ+⟩|L⟩ − |ξ−⟩|R⟩)`: ξ+ pairs with L.
    #[test]
    fn ghz_circular_decomposition() {
        let (xp, xm) = xi_states();
        let l = circular_state(Handedness::Left);
        let r = circular_state(Handedness::Right);
        let a = xp.tensor(&l).unwrap();
        let b = xm.tensor(&r).unwrap();
        let amps: Vec<C64> = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y) * FRAC_1_SQRT_2)
            .collect();
        let candidate = PureState::new(3, amps).unwrap();
        assert!(candidate.equals_up_to_phase(&ghz_state(), 1e-12));

        // The pairing with R is a different state entirely.
        let swapped: Vec<C64> = xp
            .tensor(&r)
            .unwrap()
            .amplitudes()
            .iter()
            .zip(xm.tensor(&l).unwrap().amplitudes())
            .map(|(x, y)| (x + y) * FRAC_1_SQRT_2)
            .collect();
        let swapped = PureState::new(3, swapped).unwrap();
        assert!(swapped.overlap(&ghz_state()).unwrap() < 1e-12);
    }

    #[test]
    fn herald_linear_45_gives_bell_pair() {
        let strategy = HeraldStrategy::LinearPolarizer { gamma: FRAC_PI_4 };
        let (s, p) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Plus).unwrap();
        assert!(s.equals_up_to_phase(&bell_state(Parity::Plus), 1e-12));
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        let (s, p) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Minus).unwrap();
        assert!(s.equals_up_to_phase(&bell_state(Parity::Minus), 1e-12));
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn herald_linear_90_selects_xx_branch() {
        let strategy = HeraldStrategy::LinearPolarizer { gamma: deg(90.0) };
        let (s, p) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Plus).unwrap();
        assert!(s.equals_up_to_phase(&PureState::basis(2, 0).unwrap(), 1e-12));
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn herald_linear_30() {
        let strategy = HeraldStrategy::LinearPolarizer { gamma: deg(30.0) };
        let (s, _) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Plus).unwrap();
        assert_abs_diff_eq!(s.amplitude(0).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitude(3).re, 0.8660254037844386, epsilon = 1e-12);
        let (s, _) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Minus).unwrap();
        // cos γ |xx⟩ − sin γ |yy⟩ up to a global sign
        let expected = PureState::new(
            2,
            vec![
                c(deg(30.0).cos(), 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(-deg(30.0).sin(), 0.0),
            ],
        )
        .unwrap();
        assert!(s.equals_up_to_phase(&expected, 1e-12));
    }

    #[test]
    fn herald_circular_gives_xi_states() {
        let strategy = HeraldStrategy::circular();
        let (xp, xm) = xi_states();
        let (plus, pp) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Plus).unwrap();
        let (minus, pm) = herald_outcome(&ghz_state(), &strategy, HeraldPort::Minus).unwrap();
        assert_abs_diff_eq!(pp, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pm, 0.5, epsilon = 1e-12);
        let is_xi =
            |s: &PureState| s.equals_up_to_phase(&xp, 1e-12) || s.equals_up_to_phase(&xm, 1e-12);
        assert!(is_xi(&plus) && is_xi(&minus));
        assert!(plus.overlap(&minus).unwrap() < 1e-12);
        // Under the plate convention in use, the transmitted port is L and
        // the reflected port is R.
        let l = circular_state(Handedness::Left);
        let r = circular_state(Handedness::Right);
        assert!(strategy
            .port_state(HeraldPort::Plus)
            .unwrap()
            .equals_up_to_phase(&l, 1e-12));
        assert!(strategy
            .port_state(HeraldPort::Minus)
            .unwrap()
            .equals_up_to_phase(&r, 1e-12));
    }

    #[test]
    fn direct_strategy_has_no_conditional_state() {
        assert!(matches!(
            herald_outcome(&ghz_state(), &HeraldStrategy::Direct, HeraldPort::Plus),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn impossible_herald_outcome() {
        let s = PureState::basis(3, 0b000).unwrap();
        let strategy = HeraldStrategy::LinearPolarizer { gamma: deg(90.0) };
        assert!(matches!(
            herald_outcome(&s, &strategy, HeraldPort::Plus),
            Err(Error::ImpossibleOutcome { .. })
        ));
    }

    #[test]
    fn coincidence_examples() {
        let phi = bell_state(Parity::Plus);
        let cfg = |a: f64, b: f64| ExperimentConfig::new(deg(a), deg(b), HeraldStrategy::Direct);
        assert_abs_diff_eq!(
            coincidence_probability(&phi, &cfg(20.0, 20.0)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            coincidence_probability(&phi, &cfg(0.0, 90.0)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            coincidence_probability(&phi, &cfg(0.0, 30.0)).unwrap(),
            0.375,
            epsilon = 1e-12
        );
        let mix = classical_mixture();
        assert_abs_diff_eq!(
            coincidence_probability(&mix, &cfg(0.0, 30.0)).unwrap(),
            0.375,
            epsilon = 1e-12
        );
    }

    #[test]
    fn unconditioned_coincidence_examples() {
        let rho = unconditioned_ab_density(&ghz_state()).unwrap();
        let cfg = |a: f64, b: f64| ExperimentConfig::new(deg(a), deg(b), HeraldStrategy::Direct);
        assert_abs_diff_eq!(
            coincidence_probability(&rho, &cfg(45.0, 45.0)).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            coincidence_probability(&rho, &cfg(0.0, 0.0)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        // Same numbers straight from the three-photon state with H unmeasured.
        assert_abs_diff_eq!(
            coincidence_probability(&ghz_state(), &cfg(45.0, 45.0)).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(mixture_coincidence(0.0, 0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            mixture_coincidence(FRAC_PI_4, FRAC_PI_4),
            0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            parity_split_coincidence(FRAC_PI_4, FRAC_PI_4),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dimension_and_port_errors() {
        let cfg = ExperimentConfig::new(0.0, 0.0, HeraldStrategy::LinearPolarizer { gamma: 0.0 });
        let phi = bell_state(Parity::Plus);
        assert!(joint_probability(
            &phi,
            &cfg,
            Some(HeraldPort::Plus),
            HeraldPort::Plus,
            HeraldPort::Plus
        )
        .is_err());
        let direct = ExperimentConfig::new(0.0, 0.0, HeraldStrategy::Direct);
        assert!(joint_probability(
            &ghz_state(),
            &direct,
            Some(HeraldPort::Plus),
            HeraldPort::Plus,
            HeraldPort::Plus
        )
        .is_err());
        assert!(coincidence_probability(&PureState::x(), &direct).is_err());
        let nan = ExperimentConfig::new(f64::NAN, 0.0, HeraldStrategy::Direct);
        assert!(coincidence_probability(&phi, &nan).is_err());
    }
}
