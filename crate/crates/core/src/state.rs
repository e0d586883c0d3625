//! Dense linear algebra for few-photon polarization states.
//!
//! Basis convention: photon 0 is the most significant bit of a basis index,
//! bit value 0 is `|x⟩` and bit value 1 is `|y⟩`. Three-photon states are
//! ordered A, B, H.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest photon count the dense engine accepts.
pub const MAX_PHOTONS: usize = 4;

const NORM_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const IMPOSSIBLE_PROBABILITY: f64 = 1e-14;

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn check_photons(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "photon count must be positive".into(),
        ));
    }
    if n > MAX_PHOTONS {
        return Err(Error::TooManyPhotons {
            n,
            max: MAX_PHOTONS,
        });
    }
    Ok(())
}

/// A single-photon bra `a⟨x| + b⟨y|`, stored as its two coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covector(pub [C64; 2]);

impl Covector {
    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    /// The ket this bra projects onto.
    pub fn ket(&self) -> [C64; 2] {
        [self.0[0].conj(), self.0[1].conj()]
    }

    /// Bra seen from before `plate`: the light passes the plate first, then
    /// meets this bra, so the combined row vector is `self · plate`.
    pub fn after(&self, plate: &Matrix2<C64>) -> Covector {
        let [a, b] = self.0;
        Covector([
            a * plate[(0, 0)] + b * plate[(1, 0)],
            a * plate[(0, 1)] + b * plate[(1, 1)],
        ])
    }

    /// Single-photon projector `|v⟩⟨v|`.
    pub fn projector(&self) -> Matrix2<C64> {
        let k = self.ket();
        Matrix2::new(
            k[0] * self.0[0],
            k[0] * self.0[1],
            k[1] * self.0[0],
            k[1] * self.0[1],
        )
    }
}

/// Linear analyzer transmitting polarization at `angle` from the x axis.
pub fn polarizer_bra(angle: f64) -> Covector {
    Covector([c(angle.cos(), 0.0), c(angle.sin(), 0.0)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlateKind {
    Half,
    Quarter,
}

impl PlateKind {
    pub fn retardance(self) -> f64 {
        match self {
            PlateKind::Half => std::f64::consts::PI,
            PlateKind::Quarter => std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Jones matrix of an ideal waveplate with its fast axis at `axis_angle`.
///
/// In the plate's own axes the retarder is `diag(1, e^{iδ})`; the lab-frame
/// matrix is `R(θ) · diag(1, e^{iδ}) · R(-θ)`.
pub fn waveplate(kind: PlateKind, axis_angle: f64) -> Matrix2<C64> {
    let (s, co) = axis_angle.sin_cos();
    let rot = Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
    let phase = C64::from_polar(1.0, kind.retardance());
    let retarder = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), phase);
    rot * retarder * rot.transpose()
}

/// Normalized pure state of `n_photons` polarization qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_photons: usize,
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes, renormalizing them.
    pub fn new(n_photons: usize, amplitudes: Vec<C64>) -> Result<Self> {
        Ket::new(n_photons, amplitudes)?.normalize()
    }

    pub fn basis(n_photons: usize, index: usize) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = c(1.0, 0.0);
        Ok(Self {
            n_photons,
            amplitudes,
        })
    }

    /// `|x⟩`
    pub fn x() -> Self {
        Self::basis(1, 0).expect("valid basis state")
    }

    /// `|y⟩`
    pub fn y() -> Self {
        Self::basis(1, 1).expect("valid basis state")
    }

    pub fn single(x: C64, y: C64) -> Result<Self> {
        Self::new(1, vec![x, y])
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let n = self.n_photons + other.n_photons;
        check_photons(n)?;
        Ok(PureState {
            n_photons: n,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|`, the global-phase-blind overlap.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    pub fn equals_up_to_phase(&self, other: &PureState, tol: f64) -> bool {
        self.overlap(other)
            .map(|o| (o - 1.0).abs() <= tol)
            .unwrap_or(false)
    }

    /// Applies a single-photon 2×2 matrix (normally a unitary) to one photon.
    pub fn apply_local(&self, photon: usize, m: &Matrix2<C64>) -> Result<PureState> {
        let op = LinearOperator::on_photon(m, photon, self.n_photons)?;
        op.apply(self)?.normalize()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// State vector that is not necessarily normalized, as produced by
/// [`LinearOperator::apply`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    n_photons: usize,
    amplitudes: DVector<C64>,
}

impl Ket {
    pub fn new(n_photons: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        Ok(Self {
            n_photons,
            amplitudes: DVector::from_vec(amplitudes),
        })
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn normalize(self) -> Result<PureState> {
        let norm = self.amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::Contract("cannot normalize the zero vector".into()));
        }
        Ok(PureState {
            n_photons: self.n_photons,
            amplitudes: self.amplitudes.unscale(norm),
        })
    }
}

impl From<PureState> for Ket {
    fn from(s: PureState) -> Self {
        Ket {
            n_photons: s.n_photons,
            amplitudes: s.amplitudes,
        }
    }
}

/// Operator on the full `2^n`-dimensional polarization space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    n_photons: usize,
    matrix: DMatrix<C64>,
}

impl LinearOperator {
    pub fn new(n_photons: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { n_photons, matrix })
    }

    pub fn identity(n_photons: usize) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        Ok(Self {
            n_photons,
            matrix: DMatrix::identity(dim, dim),
        })
    }

    pub fn zero(n_photons: usize) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        Ok(Self {
            n_photons,
            matrix: DMatrix::zeros(dim, dim),
        })
    }

    /// Tensor product of one 2×2 factor per photon, photon 0 first.
    pub fn local(factors: &[Matrix2<C64>]) -> Result<Self> {
        check_photons(factors.len())?;
        let mut matrix = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for f in factors {
            let f = DMatrix::from_iterator(2, 2, f.iter().copied());
            matrix = matrix.kronecker(&f);
        }
        Ok(Self {
            n_photons: factors.len(),
            matrix,
        })
    }

    /// `m` acting on `photon`, identity on every other photon.
    pub fn on_photon(m: &Matrix2<C64>, photon: usize, n_photons: usize) -> Result<Self> {
        check_photons(n_photons)?;
        if photon >= n_photons {
            return Err(Error::PhotonIndex {
                index: photon,
                n: n_photons,
            });
        }
        let factors: Vec<_> = (0..n_photons)
            .map(|k| if k == photon { *m } else { Matrix2::identity() })
            .collect();
        Self::local(&factors)
    }

    /// Product projector from an optional bra per photon (`None` = unmeasured).
    pub fn product_projector(bras: &[Option<Covector>]) -> Result<Self> {
        let factors: Vec<_> = bras
            .iter()
            .map(|b| b.map_or_else(Matrix2::identity, |b| b.projector()))
            .collect();
        Self::local(&factors)
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, s: &PureState) -> Result<Ket> {
        if s.n_photons != self.n_photons {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: s.dim(),
            });
        }
        Ok(Ket {
            n_photons: self.n_photons,
            amplitudes: &self.matrix * &s.amplitudes,
        })
    }

    pub fn compose(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.n_photons != other.n_photons {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: other.matrix.nrows(),
            });
        }
        Ok(LinearOperator {
            n_photons: self.n_photons,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) <= tol
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && max_abs_diff(&(&self.matrix * &self.matrix), &self.matrix) <= tol
    }
}

/// Photon-A/B projector for a single bra on `photon` of an `n_photons` state.
pub fn projector_on_photon(
    bra: Covector,
    photon: usize,
    n_photons: usize,
) -> Result<LinearOperator> {
    LinearOperator::on_photon(&bra.projector(), photon, n_photons)
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Density matrix of `n_photons` polarization qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_photons: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(n_photons: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_photons(n_photons)?;
        let dim = 1 << n_photons;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {trace} is not 1")));
        }
        let rho = Self { n_photons, matrix };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    pub fn from_pure(s: &PureState) -> Self {
        Self {
            n_photons: s.n_photons,
            matrix: &s.amplitudes * s.amplitudes.adjoint(),
        }
    }

    /// `|k⟩⟨k|` for a vector that is supposed to be normalized already.
    pub fn from_ket(k: &Ket) -> Result<Self> {
        let norm_sqr = k.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!(
                "state norm² is {norm_sqr}, expected 1"
            )));
        }
        Ok(Self {
            n_photons: k.n_photons,
            matrix: &k.amplitudes * k.amplitudes.adjoint(),
        })
    }

    /// Convex combination `Σ w_k |s_k⟩⟨s_k|`; weights must be nonnegative
    /// and sum to 1.
    pub fn mixture(components: &[(f64, &PureState)]) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidArgument("empty mixture".into()));
        };
        let n = first.n_photons;
        let dim = first.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut total = 0.0;
        for (w, s) in components {
            if s.n_photons != n {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("mixture weight {w}")));
            }
            total += w;
            matrix += (&s.amplitudes * s.amplitudes.adjoint()) * c(*w, 0.0);
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}"
            )));
        }
        Self::new(n, matrix)
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub(crate) fn eigen(&self) -> SymmetricEigen<C64, nalgebra::Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }

    /// Reduced state on the photons in `keep`, returned in ascending
    /// photon order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument(
                "partial trace needs at least one photon to keep".into(),
            ));
        }
        let n = self.n_photons;
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&bad) = kept.iter().find(|&&k| k >= n) {
            return Err(Error::PhotonIndex { index: bad, n });
        }
        let traced: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();
        let bit = |index: usize, photon: usize| (index >> (n - 1 - photon)) & 1;
        let reduce = |index: usize| {
            kept.iter()
                .fold(0usize, |acc, &photon| (acc << 1) | bit(index, photon))
        };
        let env = |index: usize| {
            traced
                .iter()
                .fold(0usize, |acc, &photon| (acc << 1) | bit(index, photon))
        };
        let m = kept.len();
        let dim = 1 << m;
        let mut out = DMatrix::zeros(dim, dim);
        let full = self.dim();
        for i in 0..full {
            for j in 0..full {
                if env(i) == env(j) {
                    out[(reduce(i), reduce(j))] += self.matrix[(i, j)];
                }
            }
        }
        Ok(DensityMatrix {
            n_photons: m,
            matrix: out,
        })
    }

    /// `U ρ U†` with `m` acting on a single photon.
    pub fn apply_local(&self, photon: usize, m: &Matrix2<C64>) -> Result<DensityMatrix> {
        let u = LinearOperator::on_photon(m, photon, self.n_photons)?;
        Ok(DensityMatrix {
            n_photons: self.n_photons,
            matrix: &u.matrix * &self.matrix * u.matrix.adjoint(),
        })
    }
}

/// States that can be measured with a projector.
pub trait BornRule {
    fn n_photons(&self) -> usize;

    /// `⟨A⟩` for an arbitrary operator of matching size.
    fn expectation(&self, op: &LinearOperator) -> Result<C64>;
}

impl BornRule for PureState {
    fn n_photons(&self) -> usize {
        self.n_photons
    }

    fn expectation(&self, op: &LinearOperator) -> Result<C64> {
        let v = op.apply(self)?;
        Ok(self.amplitudes.dotc(&v.amplitudes))
    }
}

impl BornRule for DensityMatrix {
    fn n_photons(&self) -> usize {
        self.n_photons
    }

    fn expectation(&self, op: &LinearOperator) -> Result<C64> {
        if op.n_photons != self.n_photons {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.matrix.nrows(),
            });
        }
        // Tr(ρA) without forming the product.
        let dim = self.dim();
        let mut acc = c(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += self.matrix[(i, j)] * op.matrix[(j, i)];
            }
        }
        Ok(acc)
    }
}

/// Probability of the outcome represented by `projector`, clamped to [0, 1].
pub fn born_probability<S: BornRule + ?Sized>(
    state: &S,
    projector: &LinearOperator,
) -> Result<f64> {
    if !projector.is_projector(PROJECTOR_TOL) {
        return Err(Error::Contract(
            "operator is not a Hermitian idempotent projector".into(),
        ));
    }
    born_probability_unchecked(state, projector)
}

pub(crate) fn born_probability_unchecked<S: BornRule + ?Sized>(
    state: &S,
    projector: &LinearOperator,
) -> Result<f64> {
    Ok(state.expectation(projector)?.re.clamp(0.0, 1.0))
}

/// Measures `projector` and returns the renormalized post-measurement state
/// together with the outcome probability.
pub fn project_and_renormalize(
    s: &PureState,
    projector: &LinearOperator,
) -> Result<(PureState, f64)> {
    let probability = born_probability(s, projector)?;
    if probability < IMPOSSIBLE_PROBABILITY {
        return Err(Error::ImpossibleOutcome { probability });
    }
    Ok((projector.apply(s)?.normalize()?, probability))
}
