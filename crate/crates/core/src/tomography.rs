//! Two-photon polarization tomography by linear inversion.
//!
//! Each photon is measured in one of three bases (x/y, ±45°, R/L), giving 9
//! basis pairs and 36 joint projector outcomes. The reconstruction is
//!
//! ```text
//!     ρ = ¼ Σ_{i,j ∈ {0,1,2,3}} ⟨S_i ⊗ S_j⟩ S_i ⊗ S_j
//! ```
//!
//! with `S_0 = I` and `S_k = P₊ − P₋` for basis `k`. The single-photon
//! expectations `⟨S_i ⊗ I⟩` are averaged over the three partner bases.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::state::{c, polarizer_bra, BornRule, Covector, DensityMatrix, LinearOperator, C64};

/// Default clipping tolerance for near-physical reconstructions.
pub const EXACT_CLIP_TOLERANCE: f64 = 1e-6;
const CONSISTENCY_TOL: f64 = 1e-6;

/// Single-photon measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    /// x (+) / y (−)
    Linear,
    /// +45° (+) / −45° (−)
    Diagonal,
    /// R (+) / L (−)
    Circular,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Linear, Basis::Diagonal, Basis::Circular];

    /// Bras of the `+` and `−` outcomes.
    pub fn bras(self) -> [Covector; 2] {
        match self {
            Basis::Linear => [
                polarizer_bra(0.0),
                polarizer_bra(std::f64::consts::FRAC_PI_2),
            ],
            Basis::Diagonal => [polarizer_bra(FRAC_PI_4), polarizer_bra(-FRAC_PI_4)],
            // ⟨R| = (⟨x| + i⟨y|)/√2 projects onto |R⟩ = (|x⟩ − i|y⟩)/√2.
            Basis::Circular => [
                Covector([c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]),
                Covector([c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)]),
            ],
        }
    }

    fn stokes(self) -> Matrix2<C64> {
        let [p, m] = self.bras();
        p.projector() - m.projector()
    }

    pub fn letter(self) -> char {
        match self {
            Basis::Linear => 'z',
            Basis::Diagonal => 'x',
            Basis::Circular => 'c',
        }
    }

    pub fn from_letter(ch: char) -> Option<Basis> {
        match ch {
            'z' => Some(Basis::Linear),
            'x' => Some(Basis::Diagonal),
            'c' => Some(Basis::Circular),
            _ => None,
        }
    }
}

/// A measurement setting: one basis per photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisPair {
    pub a: Basis,
    pub b: Basis,
}

impl BasisPair {
    pub fn new(a: Basis, b: Basis) -> Self {
        Self { a, b }
    }
}

impl fmt::Display for BasisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.a.letter(), self.b.letter())
    }
}

/// One of the six single-photon projectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Projector6 {
    X,
    Y,
    D,
    A,
    R,
    L,
}

impl Projector6 {
    pub const ALL: [Projector6; 6] = [
        Projector6::X,
        Projector6::Y,
        Projector6::D,
        Projector6::A,
        Projector6::R,
        Projector6::L,
    ];

    /// Basis and outcome index (0 = `+`, 1 = `−`).
    pub fn basis_outcome(self) -> (Basis, usize) {
        match self {
            Projector6::X => (Basis::Linear, 0),
            Projector6::Y => (Basis::Linear, 1),
            Projector6::D => (Basis::Diagonal, 0),
            Projector6::A => (Basis::Diagonal, 1),
            Projector6::R => (Basis::Circular, 0),
            Projector6::L => (Basis::Circular, 1),
        }
    }
}

/// Ordered list of basis pairs to measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TomographySettings {
    pairs: Vec<BasisPair>,
}

impl TomographySettings {
    /// All nine basis pairs, A basis varying slowest.
    pub fn full() -> Self {
        let pairs = Basis::ALL
            .iter()
            .flat_map(|&a| Basis::ALL.iter().map(move |&b| BasisPair::new(a, b)))
            .collect();
        Self { pairs }
    }

    /// Rejects sets that do not contain all nine pairs.
    pub fn new(pairs: Vec<BasisPair>) -> Result<Self> {
        let settings = Self { pairs };
        settings.check_complete()?;
        Ok(settings)
    }

    pub fn pairs(&self) -> &[BasisPair] {
        &self.pairs
    }

    fn check_complete(&self) -> Result<()> {
        for want in Self::full().pairs {
            if !self.pairs.contains(&want) {
                return Err(Error::IncompleteSettings(want.to_string()));
            }
        }
        Ok(())
    }
}

/// Outcome probabilities per basis pair, cells ordered `++, +−, −+, −−`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TomographyTable {
    rows: BTreeMap<BasisPair, [f64; 4]>,
}

impl TomographyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair: BasisPair, cells: [f64; 4]) {
        self.rows.insert(pair, cells);
    }

    pub fn row(&self, pair: BasisPair) -> Option<&[f64; 4]> {
        self.rows.get(&pair)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&BasisPair, &[f64; 4])> {
        self.rows.iter()
    }

    /// Probability of the joint projector outcome `(a, b)`.
    pub fn probability(&self, a: Projector6, b: Projector6) -> Option<f64> {
        let (ba, oa) = a.basis_outcome();
        let (bb, ob) = b.basis_outcome();
        self.row(BasisPair::new(ba, bb)).map(|r| r[2 * oa + ob])
    }
}

/// Exact Born probabilities for every setting in `settings`.
pub fn simulate_tomography_probabilities<S: BornRule + ?Sized>(
    state: &S,
    settings: &TomographySettings,
) -> Result<TomographyTable> {
    if state.n_photons() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: 1 << state.n_photons(),
        });
    }
    settings.check_complete()?;
    let mut table = TomographyTable::new();
    for &pair in settings.pairs() {
        let bras_a = pair.a.bras();
        let bras_b = pair.b.bras();
        let mut cells = [0.0; 4];
        for (oa, bra_a) in bras_a.iter().enumerate() {
            for (ob, bra_b) in bras_b.iter().enumerate() {
                let proj = LinearOperator::product_projector(&[Some(*bra_a), Some(*bra_b)])?;
                cells[2 * oa + ob] = state.expectation(&proj)?.re.clamp(0.0, 1.0);
            }
        }
        table.insert(pair, cells);
    }
    Ok(table)
}

/// Linear inversion with the default clipping tolerance.
pub fn reconstruct_density(table: &TomographyTable) -> Result<DensityMatrix> {
    reconstruct_density_with(table, EXACT_CLIP_TOLERANCE)
}

/// Linear inversion; a minimum eigenvalue in `(−clip_tolerance, 0)` is
/// clipped to zero (followed by renormalization), anything more negative is
/// an error.
pub fn reconstruct_density_with(
    table: &TomographyTable,
    clip_tolerance: f64,
) -> Result<DensityMatrix> {
    let full = TomographySettings::full();
    for &pair in full.pairs() {
        let Some(row) = table.row(pair) else {
            return Err(Error::IncompleteSettings(pair.to_string()));
        };
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > CONSISTENCY_TOL
            || row
                .iter()
                .any(|p| !(-CONSISTENCY_TOL..=1.0 + CONSISTENCY_TOL).contains(p))
        {
            return Err(Error::InconsistentTable(format!(
                "setting {pair} has probabilities {row:?} (sum {sum})"
            )));
        }
    }

    // Stokes expectations, index 0 = identity.
    let mut t = [[0.0f64; 4]; 4];
    t[0][0] = 1.0;
    for (i, &ba) in Basis::ALL.iter().enumerate() {
        for (j, &bb) in Basis::ALL.iter().enumerate() {
            let r = table.row(BasisPair::new(ba, bb)).expect("checked above");
            t[i + 1][j + 1] = r[0] - r[1] - r[2] + r[3];
            t[i + 1][0] += (r[0] + r[1] - r[2] - r[3]) / 3.0;
            t[0][j + 1] += (r[0] - r[1] + r[2] - r[3]) / 3.0;
        }
    }

    let ops: Vec<Matrix2<C64>> = std::iter::once(Matrix2::identity())
        .chain(Basis::ALL.iter().map(|b| b.stokes()))
        .collect();
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for (i, oa) in ops.iter().enumerate() {
        for (j, ob) in ops.iter().enumerate() {
            let term = LinearOperator::local(&[*oa, *ob])?;
            rho += term.matrix() * c(t[i][j] / 4.0, 0.0);
        }
    }
    // Exact Hermitian symmetrization removes round-off asymmetry.
    let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
    make_physical(rho, clip_tolerance)
}

fn make_physical(rho: DMatrix<C64>, clip_tolerance: f64) -> Result<DensityMatrix> {
    let eig = nalgebra::SymmetricEigen::new(rho.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return DensityMatrix::new(2, normalize_trace(rho));
    }
    if min <= -clip_tolerance {
        return Err(Error::Unphysical {
            min_eigenvalue: min,
            tolerance: clip_tolerance,
        });
    }
    let mut clipped = DMatrix::<C64>::zeros(4, 4);
    for (k, &p) in eig.eigenvalues.iter().enumerate() {
        if p > 0.0 {
            let v = eig.eigenvectors.column(k);
            clipped += (v * v.adjoint()) * c(p, 0.0);
        }
    }
    let clipped = (&clipped + clipped.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(2, normalize_trace(clipped))
}

fn normalize_trace(m: DMatrix<C64>) -> DMatrix<C64> {
    let tr = m.trace().re;
    m.unscale(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{concurrence, fidelity};
    use crate::protocol::{bell_state, classical_mixture, xi_states, Parity};
    use approx::assert_abs_diff_eq;

    #[test]
    fn stokes_operators_are_orthonormal() {
        let ops: Vec<_> = Basis::ALL.iter().map(|b| b.stokes()).collect();
        for (i, a) in ops.iter().enumerate() {
            for (j, b) in ops.iter().enumerate() {
                let tr = (a * b).trace();
                let expected = if i == j { 2.0 } else { 0.0 };
                assert_abs_diff_eq!(tr.re, expected, epsilon = 1e-15);
                assert_abs_diff_eq!(tr.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn bell_state_probabilities() {
        let table = simulate_tomography_probabilities(
            &bell_state(Parity::Plus),
            &TomographySettings::full(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            table.probability(Projector6::X, Projector6::X).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            table.probability(Projector6::X, Projector6::Y).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            table.probability(Projector6::D, Projector6::D).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn all_36_outcomes_present() {
        let table =
            simulate_tomography_probabilities(&classical_mixture(), &TomographySettings::full())
                .unwrap();
        let mut count = 0;
        for a in Projector6::ALL {
            for b in Projector6::ALL {
                assert!(table.probability(a, b).is_some());
                count += 1;
            }
        }
        assert_eq!(count, 36);
    }

    #[test]
    fn round_trips() {
        let phi = bell_state(Parity::Plus).to_density();
        let table = simulate_tomography_probabilities(&phi, &TomographySettings::full()).unwrap();
        let rho = reconstruct_density(&table).unwrap();
        assert!(fidelity(&rho, &phi).unwrap() >= 1.0 - 1e-10);

        let table =
            simulate_tomography_probabilities(&classical_mixture(), &TomographySettings::full())
                .unwrap();
        let rho = reconstruct_density(&table).unwrap();
        assert!(concurrence(&rho).unwrap() <= 1e-8);

        let xi = xi_states().0.to_density();
        let table = simulate_tomography_probabilities(&xi, &TomographySettings::full()).unwrap();
        let rho = reconstruct_density(&table).unwrap();
        assert!(concurrence(&rho).unwrap() >= 1.0 - 1e-8);
        assert!(crate::state::max_abs_diff(rho.matrix(), xi.matrix()) < 1e-10);
    }

    #[test]
    fn incomplete_settings_rejected() {
        let mut pairs = TomographySettings::full().pairs().to_vec();
        pairs.retain(|p| *p != BasisPair::new(Basis::Circular, Basis::Linear));
        let err = TomographySettings::new(pairs).unwrap_err();
        assert!(matches!(err, Error::IncompleteSettings(ref s) if s == "cz"));

        let mut table =
            simulate_tomography_probabilities(&classical_mixture(), &TomographySettings::full())
                .unwrap();
        table
            .rows
            .remove(&BasisPair::new(Basis::Linear, Basis::Linear));
        assert!(matches!(
            reconstruct_density(&table),
            Err(Error::IncompleteSettings(_))
        ));
    }

    #[test]
    fn inconsistent_table_rejected() {
        let mut table =
            simulate_tomography_probabilities(&classical_mixture(), &TomographySettings::full())
                .unwrap();
        table.insert(
            BasisPair::new(Basis::Linear, Basis::Linear),
            [0.5, 0.0, 0.0, 0.6],
        );
        assert!(matches!(
            reconstruct_density(&table),
            Err(Error::InconsistentTable(_))
        ));
    }

    /// Raising ⟨S_c ⊗ S_c⟩ of |Φ+⟩ from −1 to −1 + 4δ pushes one Bell-basis
    /// eigenvalue to −δ.
    fn perturbed_bell_table(delta: f64) -> TomographyTable {
        let phi = bell_state(Parity::Plus);
        let mut table =
            simulate_tomography_probabilities(&phi, &TomographySettings::full()).unwrap();
        let pair = BasisPair::new(Basis::Circular, Basis::Circular);
        table.insert(pair, [delta, 0.5 - delta, 0.5 - delta, delta]);
        table
    }

    #[test]
    fn small_negativity_is_clipped() {
        let rho = reconstruct_density(&perturbed_bell_table(1e-7)).unwrap();
        assert!(rho.eigenvalues()[0] >= -1e-12);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        assert!(fidelity(&rho, &bell_state(Parity::Plus).to_density()).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn large_negativity_is_an_error() {
        let err = reconstruct_density(&perturbed_bell_table(0.01)).unwrap_err();
        match err {
            Error::Unphysical { min_eigenvalue, .. } => {
                assert_abs_diff_eq!(min_eigenvalue, -0.01, epsilon = 1e-12)
            }
            other => panic!("unexpected {other}"),
        }
        // A looser tolerance accepts it.
        assert!(reconstruct_density_with(&perturbed_bell_table(0.01), 0.02).is_ok());
    }

    #[test]
    fn settings_letters_round_trip() {
        for b in Basis::ALL {
            assert_eq!(Basis::from_letter(b.letter()), Some(b));
        }
        assert_eq!(Basis::from_letter('q'), None);
    }
}
