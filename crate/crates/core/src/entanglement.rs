//! Concurrence, fidelity and CHSH correlators for two-photon states.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::protocol::{joint_probability, ExperimentConfig, HeraldPort, HeraldStrategy};
use crate::state::{c, BornRule, DensityMatrix, C64};

/// Eigenvalues below this are treated as numerical zeros when forming
/// square roots of density matrices.
const RANK_TOL: f64 = 1e-13;
const PSD_TOL: f64 = 1e-10;

fn require_two_photons(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: 1 << n,
        });
    }
    Ok(())
}

/// Eigenpairs of `rho` with the numerically-zero part dropped.
fn support(rho: &DensityMatrix) -> Result<Vec<(f64, nalgebra::DVector<C64>)>> {
    let eig = rho.eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::InvalidDensity(format!(
            "negative eigenvalue {min:e}"
        )));
    }
    Ok(eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > RANK_TOL)
        .map(|(k, &p)| (p, eig.eigenvectors.column(k).into_owned()))
        .collect())
}

/// Wootters concurrence of a two-photon state.
///
/// The spin-flip eigenvalues λ_k are obtained as singular values of
/// `τ = Vᵀ (σ_y ⊗ σ_y) V`, where the columns of `V` are the eigenvectors of ρ
/// scaled by the square roots of their eigenvalues. This avoids taking square
/// roots of the tiny eigenvalues of `ρ ρ̃`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_photons(rho.n_photons())?;
    let support = support(rho)?;
    let k = support.len();
    let mut v = DMatrix::<C64>::zeros(4, k);
    for (col, (p, vec)) in support.iter().enumerate() {
        v.set_column(col, &(vec * c(p.sqrt(), 0.0)));
    }
    // σ_y ⊗ σ_y in the x/y basis.
    let mut flip = DMatrix::<C64>::zeros(4, 4);
    flip[(0, 3)] = c(-1.0, 0.0);
    flip[(1, 2)] = c(1.0, 0.0);
    flip[(2, 1)] = c(1.0, 0.0);
    flip[(3, 0)] = c(-1.0, 0.0);
    let tau = v.transpose() * flip * &v;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let Some((&top, rest)) = lambdas.split_first() else {
        return Ok(0.0);
    };
    Ok((top - rest.iter().sum::<f64>()).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
///
/// Evaluated as the squared trace norm of `√σ √ρ`, restricted to the two
/// supports: with `ρ = Σ p_i |u_i⟩⟨u_i|` and `σ = Σ q_j |w_j⟩⟨w_j|` the trace
/// norm is the sum of singular values of `M_ji = √q_j ⟨w_j|u_i⟩ √p_i`. This
/// is symmetric by construction and never takes square roots of round-off.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let rho_support = support(rho)?;
    let sigma_support = support(sigma)?;
    let m = DMatrix::<C64>::from_fn(sigma_support.len(), rho_support.len(), |j, i| {
        let (q, w) = &sigma_support[j];
        let (p, u) = &rho_support[i];
        w.dotc(u) * c((p * q).sqrt(), 0.0)
    });
    let trace_norm: f64 = m.singular_values().iter().sum();
    Ok((trace_norm * trace_norm).clamp(0.0, 1.0))
}

/// `E = P++ + P−− − P+− − P−+` with the analyzers (and any wave plates) of
/// `config`. Four Born evaluations; the herald field of `config` is ignored.
pub fn correlation<S: BornRule + ?Sized>(state: &S, config: &ExperimentConfig) -> Result<f64> {
    require_two_photons(state.n_photons())?;
    let mut e = 0.0;
    for a in HeraldPort::ALL {
        for b in HeraldPort::ALL {
            let p = joint_probability(state, config, None, a, b)?;
            e += if a == b { p } else { -p };
        }
    }
    Ok(e)
}

/// Correlator with bare linear analyzers at `alpha`, `beta`.
pub fn correlation_e<S: BornRule + ?Sized>(state: &S, alpha: f64, beta: f64) -> Result<f64> {
    correlation(
        state,
        &ExperimentConfig::new(alpha, beta, HeraldStrategy::Direct),
    )
}

/// Two analyzer angles per side, in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshSettings {
    pub fn from_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        Self {
            a: a.to_radians(),
            a_prime: a_prime.to_radians(),
            b: b.to_radians(),
            b_prime: b_prime.to_radians(),
        }
    }

    /// (0°, 45°, 22.5°, 67.5°): maximal violation for `|Φ+⟩`.
    pub fn standard() -> Self {
        Self::from_degrees(0.0, 45.0, 22.5, 67.5)
    }

    /// The four analyzer pairs in the order `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if [self.a, self.a_prime, self.b, self.b_prime]
            .iter()
            .all(|x| x.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument("non-finite CHSH angle".into()))
        }
    }
}

/// Combines four correlators given in [`ChshSettings::pairs`] order.
pub fn chsh_combination(e: [f64; 4]) -> f64 {
    (e[0] - e[1] + e[2] + e[3]).abs()
}

/// `S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|` with bare linear analyzers.
pub fn chsh_value<S: BornRule + ?Sized>(state: &S, settings: &ChshSettings) -> Result<f64> {
    chsh_value_with(
        state,
        settings,
        &ExperimentConfig::new(0.0, 0.0, HeraldStrategy::Direct),
    )
}

/// As [`chsh_value`], keeping the wave plates of `template` in front of the
/// analyzers.
pub fn chsh_value_with<S: BornRule + ?Sized>(
    state: &S,
    settings: &ChshSettings,
    template: &ExperimentConfig,
) -> Result<f64> {
    settings.validate()?;
    let mut e = [0.0; 4];
    for (slot, (a, b)) in e.iter_mut().zip(settings.pairs()) {
        *slot = correlation(state, &template.with_angles(a, b))?;
    }
    Ok(chsh_combination(e))
}

/// Result of a settings search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshOptimum {
    pub value: f64,
    pub settings: ChshSettings,
}

/// Coarse grid step and local refinement step, in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshGrid {
    pub coarse_deg: f64,
    pub fine_deg: f64,
}

impl Default for ChshGrid {
    fn default() -> Self {
        Self {
            coarse_deg: 1.0,
            fine_deg: 0.01,
        }
    }
}

/// Single-photon observable `P₊ − P₋` for one analyzer arm.
fn arm_observable(angle: f64, qwp: Option<f64>) -> Matrix2<C64> {
    let cfg = ExperimentConfig {
        alpha: angle,
        beta: 0.0,
        qwp_a: qwp,
        qwp_b: None,
        herald: HeraldStrategy::Direct,
    };
    cfg.bra_a(HeraldPort::Plus).projector() - cfg.bra_a(HeraldPort::Minus).projector()
}

/// `Tr(ρ (O_A ⊗ O_B))`, the same quantity as [`correlation`] written as
/// one expectation value.
fn observable_correlation(rho: &DMatrix<C64>, oa: &Matrix2<C64>, ob: &Matrix2<C64>) -> f64 {
    let mut acc = c(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            let op = oa[(j >> 1, i >> 1)] * ob[(j & 1, i & 1)];
            acc += rho[(i, j)] * op;
        }
    }
    acc.re
}

/// Maximizes `S` over all analyzer settings: exhaustive coarse grid over
/// [0°, 180°) per angle, then coordinate-wise refinement at the fine step
/// within one coarse step of the best point.
pub fn maximize_chsh(
    rho: &DensityMatrix,
    template: &ExperimentConfig,
    grid: ChshGrid,
) -> Result<ChshOptimum> {
    require_two_photons(rho.n_photons())?;
    if !(grid.coarse_deg > 0.0 && grid.fine_deg > 0.0) {
        return Err(Error::InvalidArgument("grid steps must be positive".into()));
    }
    let m = rho.matrix();
    let steps = (180.0 / grid.coarse_deg).round() as usize;
    let angle = |k: usize| (k as f64 * grid.coarse_deg).to_radians();
    let obs_a: Vec<_> = (0..steps)
        .map(|k| arm_observable(angle(k), template.qwp_a))
        .collect();
    let obs_b: Vec<_> = (0..steps)
        .map(|k| arm_observable(angle(k), template.qwp_b))
        .collect();
    let table: Vec<Vec<f64>> = obs_a
        .iter()
        .map(|oa| {
            obs_b
                .iter()
                .map(|ob| observable_correlation(m, oa, ob))
                .collect()
        })
        .collect();

    // For fixed (a, a′) the b and b′ terms separate:
    // S = |f(b) + g(b′)| with f = E(a,·) + E(a′,·), g = E(a′,·) − E(a,·).
    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    for i in 0..steps {
        for k in 0..steps {
            let (ei, ek) = (&table[i], &table[k]);
            let (mut fmax, mut fmin, mut gmax, mut gmin) = (
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
            );
            for j in 0..steps {
                let f = ei[j] + ek[j];
                let g = ek[j] - ei[j];
                if f > fmax.0 {
                    fmax = (f, j);
                }
                if f < fmin.0 {
                    fmin = (f, j);
                }
                if g > gmax.0 {
                    gmax = (g, j);
                }
                if g < gmin.0 {
                    gmin = (g, j);
                }
            }
            let up = fmax.0 + gmax.0;
            let down = -(fmin.0 + gmin.0);
            if up > best.0 {
                best = (up, [i, k, fmax.1, gmax.1]);
            }
            if down > best.0 {
                best = (down, [i, k, fmin.1, gmin.1]);
            }
        }
    }

    let mut point = best.1.map(angle);
    let evaluate = |p: &[f64; 4]| {
        let oa = arm_observable(p[0], template.qwp_a);
        let oap = arm_observable(p[1], template.qwp_a);
        let ob = arm_observable(p[2], template.qwp_b);
        let obp = arm_observable(p[3], template.qwp_b);
        chsh_combination([
            observable_correlation(m, &oa, &ob),
            observable_correlation(m, &oa, &obp),
            observable_correlation(m, &oap, &ob),
            observable_correlation(m, &oap, &obp),
        ])
    };
    let mut value = evaluate(&point);
    let fine = grid.fine_deg.to_radians();
    let span = (grid.coarse_deg / grid.fine_deg).round() as i64;
    for _sweep in 0..50 {
        let mut improved = false;
        for coord in 0..4 {
            let centre = point[coord];
            for offset in -span..=span {
                let mut trial = point;
                trial[coord] = centre + offset as f64 * fine;
                let v = evaluate(&trial);
                if v > value + 1e-15 {
                    value = v;
                    point = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(ChshOptimum {
        value,
        settings: ChshSettings {
            a: point[0],
            a_prime: point[1],
            b: point[2],
            b_prime: point[3],
        },
    })
}
