//! Finite-count coincidence experiments sampled from exact Born probabilities.
//!
//! Randomness is counter based: emission `i` of a run draws from a ChaCha8
//! stream keyed by the run seed with stream number `i` (tomography settings
//! put the setting index in the high bits). Every emission consumes exactly
//! four uniforms: the joint outcome, then the A, B and H detector draws. The
//! counts therefore do not depend on how the emissions are split across
//! threads.
//!
//! Joint outcomes are drawn from cumulative probabilities in a fixed order,
//! herald port `+` first, then A `+`, then B `+`:
//! `(+,+,+), (+,+,−), (+,−,+), (+,−,−), (−,+,+), …`. With a direct herald the
//! port is not resolved and the four `(A, B)` cells are used in the same order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::entanglement::{chsh_combination, ChshSettings};
use crate::error::{Error, Result};
use crate::protocol::{ghz_state, joint_probability, ExperimentConfig, HeraldPort, HeraldStrategy};
use crate::state::{BornRule, Covector, LinearOperator};
use crate::tomography::{
    reconstruct_density_with, BasisPair, TomographySettings, TomographyTable, EXACT_CLIP_TOLERANCE,
};
use crate::DensityMatrix;

/// Detector efficiencies of the three arms, each in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Efficiencies {
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

impl Efficiencies {
    pub const IDEAL: Efficiencies = Efficiencies {
        a: 1.0,
        b: 1.0,
        h: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("A", self.a), ("B", self.b), ("H", self.h)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "efficiency of detector {name} must lie in (0, 1], got {eta}"
                )));
            }
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.a * self.b * self.h
    }
}

impl Default for Efficiencies {
    fn default() -> Self {
        Self::IDEAL
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSpec {
    pub config: ExperimentConfig,
    pub n_triples: u64,
    pub efficiencies: Efficiencies,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(config: ExperimentConfig, n_triples: u64, seed: u64) -> Self {
        Self {
            config,
            n_triples,
            efficiencies: Efficiencies::IDEAL,
            seed,
        }
    }

    pub fn with_efficiencies(mut self, efficiencies: Efficiencies) -> Self {
        self.efficiencies = efficiencies;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.efficiencies.validate()?;
        if self.n_triples == 0 {
            return Err(Error::InvalidArgument(
                "n_triples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which herald channel a detected triple was recorded in. `None` stands for
/// direct detection without a polarization-resolving herald.
pub type Channel = Option<HeraldPort>;

fn channel_index(channel: Channel) -> usize {
    match channel {
        None => 0,
        Some(HeraldPort::Plus) => 1,
        Some(HeraldPort::Minus) => 2,
    }
}

fn outcome_index(o: HeraldPort) -> usize {
    match o {
        HeraldPort::Plus => 0,
        HeraldPort::Minus => 1,
    }
}

/// Detected triple coincidences by herald channel and analyzer outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CountsTable {
    cells: [[[u64; 2]; 2]; 3],
    emitted: u64,
    detected: u64,
}

impl CountsTable {
    pub fn count(&self, channel: Channel, a: HeraldPort, b: HeraldPort) -> u64 {
        self.cells[channel_index(channel)][outcome_index(a)][outcome_index(b)]
    }

    /// Counts for one channel in the order `++, +−, −+, −−`.
    pub fn channel_cells(&self, channel: Channel) -> [u64; 4] {
        let c = &self.cells[channel_index(channel)];
        [c[0][0], c[0][1], c[1][0], c[1][1]]
    }

    pub fn channel_total(&self, channel: Channel) -> u64 {
        self.channel_cells(channel).iter().sum()
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn detected(&self) -> u64 {
        self.detected
    }

    /// Adds another table. Associative and commutative.
    pub fn merge(mut self, other: &CountsTable) -> CountsTable {
        for (x, y) in self
            .cells
            .iter_mut()
            .flatten()
            .flatten()
            .zip(other.cells.iter().flatten().flatten())
        {
            *x += y;
        }
        self.emitted += other.emitted;
        self.detected += other.detected;
        self
    }

    #[cfg(test)]
    fn record(&mut self, channel: Channel, a: HeraldPort, b: HeraldPort) {
        self.cells[channel_index(channel)][outcome_index(a)][outcome_index(b)] += 1;
        self.detected += 1;
    }
}

/// The ordered categories drawn per emission.
fn categories(resolved: bool) -> Vec<(Channel, HeraldPort, HeraldPort)> {
    let ports: Vec<Channel> = if resolved {
        HeraldPort::ALL.iter().map(|&p| Some(p)).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::with_capacity(8);
    for port in ports {
        for a in HeraldPort::ALL {
            for b in HeraldPort::ALL {
                out.push((port, a, b));
            }
        }
    }
    out
}

fn cumulative(probs: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0 && (total - 1.0).abs() < 1e-9) {
        return Err(Error::Contract(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    let mut acc = 0.0;
    Ok(probs
        .iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect())
}

/// Per-emission draw shared by all samplers. Returns the category index when
/// all three detectors fire.
#[inline]
fn draw(rng: &mut ChaCha8Rng, cdf: &[f64], eff: &Efficiencies) -> Option<usize> {
    let u: f64 = rng.random();
    let ua: f64 = rng.random();
    let ub: f64 = rng.random();
    let uh: f64 = rng.random();
    let k = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
    (ua < eff.a && ub < eff.b && uh < eff.h).then_some(k)
}

/// Emissions per rayon task; large enough to amortize task overhead.
const CHUNK: u64 = 1 << 14;

fn sample_categories(
    cdf: &[f64],
    n: u64,
    eff: &Efficiencies,
    seed: u64,
    stream_base: u64,
) -> Vec<u64> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut counts = vec![0u64; cdf.len()];
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n);
            for i in start..end {
                let mut rng = base.clone();
                rng.set_stream(stream_base | i);
                if let Some(k) = draw(&mut rng, cdf, eff) {
                    counts[k] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; cdf.len()],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(&y) {
                    *a += b;
                }
                x
            },
        )
}

/// Samples a run on the three-photon source state (photons A, B, H).
pub fn sample_source<S: BornRule + ?Sized + Sync>(
    source: &S,
    spec: &RunSpec,
) -> Result<CountsTable> {
    spec.validate()?;
    if source.n_photons() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            found: 1 << source.n_photons(),
        });
    }
    let resolved = !matches!(spec.config.herald, HeraldStrategy::Direct);
    let cats = categories(resolved);
    let probs = cats
        .iter()
        .map(|&(port, a, b)| joint_probability(source, &spec.config, port, a, b))
        .collect::<Result<Vec<_>>>()?;
    let cdf = cumulative(&probs)?;
    let counts = sample_categories(&cdf, spec.n_triples, &spec.efficiencies, spec.seed, 0);
    let mut table = CountsTable {
        emitted: spec.n_triples,
        ..CountsTable::default()
    };
    for (&(port, a, b), &k) in cats.iter().zip(&counts) {
        table.cells[channel_index(port)][outcome_index(a)][outcome_index(b)] += k;
        table.detected += k;
    }
    Ok(table)
}

/// Samples a run on the GHZ source.
pub fn sample_run(spec: &RunSpec) -> Result<CountsTable> {
    sample_source(&ghz_state(), spec)
}

/// Point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `N(port,+,+) / N(port,·,·)` with binomial standard error.
pub fn estimate_coincidence_prob(table: &CountsTable, channel: Channel) -> Result<Estimate> {
    let n = table.channel_total(channel);
    if n == 0 {
        return Err(Error::EmptyCounts(format!(
            "no detected triples in channel {}",
            channel_label(channel)
        )));
    }
    let p = table.count(channel, HeraldPort::Plus, HeraldPort::Plus) as f64 / n as f64;
    Ok(Estimate {
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
    })
}

fn channel_label(channel: Channel) -> &'static str {
    channel.map_or("direct", HeraldPort::label)
}

/// Empirical correlator `(N++ − N+− − N−+ + N−−)/N`, variance `(1 − E²)/N`.
pub fn estimate_correlation(table: &CountsTable, channel: Channel) -> Result<Estimate> {
    let cells = table.channel_cells(channel);
    let n: u64 = cells.iter().sum();
    if n == 0 {
        return Err(Error::EmptyCounts(format!(
            "no detected triples in channel {}",
            channel_label(channel)
        )));
    }
    let nf = n as f64;
    let e = (cells[0] as f64 - cells[1] as f64 - cells[2] as f64 + cells[3] as f64) / nf;
    Ok(Estimate {
        value: e,
        stderr: ((1.0 - e * e).max(0.0) / nf).sqrt(),
    })
}

/// CHSH estimate from four tables in [`ChshSettings::pairs`] order. Settings
/// are sampled independently so the correlator variances add.
pub fn estimate_chsh(tables: &[CountsTable; 4], channel: Channel) -> Result<Estimate> {
    let mut e = [0.0; 4];
    let mut var = 0.0;
    for (slot, table) in e.iter_mut().zip(tables) {
        let est = estimate_correlation(table, channel)?;
        *slot = est.value;
        var += est.stderr * est.stderr;
    }
    Ok(Estimate {
        value: chsh_combination(e),
        stderr: var.sqrt(),
    })
}

/// Runs the four CHSH settings on the GHZ source. Setting `k` uses seed
/// `seed + k`; wave plates and herald come from `template`.
pub fn sample_chsh_tables(
    template: &ExperimentConfig,
    settings: &ChshSettings,
    n_per_setting: u64,
    efficiencies: Efficiencies,
    seed: u64,
) -> Result<[CountsTable; 4]> {
    settings.validate()?;
    let mut tables = [CountsTable::default(); 4];
    for (k, (slot, (a, b))) in tables.iter_mut().zip(settings.pairs()).enumerate() {
        let spec = RunSpec::new(
            template.with_angles(a, b),
            n_per_setting,
            seed.wrapping_add(k as u64),
        )
        .with_efficiencies(efficiencies);
        *slot = sample_run(&spec)?;
    }
    Ok(tables)
}

/// Where tomography photons come from.
#[derive(Clone, Copy, Debug)]
pub enum TomographySource<'a> {
    /// A two-photon A,B state; the H detector still thins the counts.
    Pair(&'a DensityMatrix),
    /// A three-photon state with the herald analyzed by `herald`; only
    /// triples registered in `port` are kept.
    Heralded {
        state: &'a crate::PureState,
        herald: HeraldStrategy,
        port: HeraldPort,
    },
}

/// Counts per tomography basis pair, cells ordered `++, +−, −+, −−`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TomographyCounts {
    rows: BTreeMap<BasisPair, [u64; 4]>,
    emitted_per_setting: u64,
}

/// Negative eigenvalues of a count-based reconstruction scale like `1/√N`;
/// up to this many standard errors are clipped.
pub const COUNT_CLIP_SIGMAS: f64 = 10.0;

impl TomographyCounts {
    pub fn row(&self, pair: BasisPair) -> Option<&[u64; 4]> {
        self.rows.get(&pair)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&BasisPair, &[u64; 4])> {
        self.rows.iter()
    }

    pub fn emitted_per_setting(&self) -> u64 {
        self.emitted_per_setting
    }

    /// Relative frequencies per setting.
    pub fn frequencies(&self) -> Result<TomographyTable> {
        let mut table = TomographyTable::new();
        for (&pair, row) in &self.rows {
            let n: u64 = row.iter().sum();
            if n == 0 {
                return Err(Error::EmptyCounts(format!("no counts for setting {pair}")));
            }
            table.insert(pair, row.map(|k| k as f64 / n as f64));
        }
        Ok(table)
    }

    /// Smallest per-setting total.
    pub fn min_setting_total(&self) -> u64 {
        self.rows
            .values()
            .map(|r| r.iter().sum())
            .min()
            .unwrap_or(0)
    }

    /// Clipping tolerance `max(1e-6, COUNT_CLIP_SIGMAS / √N_min)`.
    pub fn clip_tolerance(&self) -> f64 {
        let n = self.min_setting_total().max(1) as f64;
        EXACT_CLIP_TOLERANCE.max(COUNT_CLIP_SIGMAS / n.sqrt())
    }

    /// Linear-inversion reconstruction with the count-scaled tolerance.
    pub fn reconstruct(&self) -> Result<DensityMatrix> {
        reconstruct_density_with(&self.frequencies()?, self.clip_tolerance())
    }
}

/// Samples `n_per_setting` emissions for every basis pair in `settings`.
/// Setting `k` uses streams `(k << 40) | i`.
pub fn sample_tomography(
    source: TomographySource<'_>,
    settings: &TomographySettings,
    n_per_setting: u64,
    seed: u64,
    efficiencies: Efficiencies,
) -> Result<TomographyCounts> {
    efficiencies.validate()?;
    if n_per_setting == 0 || n_per_setting >= 1 << 40 {
        return Err(Error::InvalidArgument(format!(
            "emissions per setting must lie in [1, 2^40), got {n_per_setting}"
        )));
    }
    // Re-validates completeness.
    let settings = TomographySettings::new(settings.pairs().to_vec())?;
    let herald_bra: Option<Covector> = match source {
        TomographySource::Pair(rho) => {
            if rho.n_photons() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    found: rho.dim(),
                });
            }
            None
        }
        TomographySource::Heralded {
            state,
            herald,
            port,
        } => {
            if state.n_photons() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 8,
                    found: state.dim(),
                });
            }
            herald.validate()?;
            Some(herald.port_bra(port).ok_or_else(|| {
                Error::Contract("tomography needs a port-resolving herald".into())
            })?)
        }
    };

    let mut counts = TomographyCounts {
        emitted_per_setting: n_per_setting,
        ..TomographyCounts::default()
    };
    for (k, &pair) in settings.pairs().iter().enumerate() {
        let bras_a = pair.a.bras();
        let bras_b = pair.b.bras();
        // Cells `++, +−, −+, −−`; for a heralded source the remaining
        // probability (the other port) is a fifth, discarded category.
        let mut probs = Vec::with_capacity(5);
        for bra_a in bras_a {
            for bra_b in bras_b {
                let p = match source {
                    TomographySource::Pair(rho) => {
                        let proj = LinearOperator::product_projector(&[Some(bra_a), Some(bra_b)])?;
                        rho.expectation(&proj)?.re
                    }
                    TomographySource::Heralded { state, .. } => {
                        let proj = LinearOperator::product_projector(&[
                            Some(bra_a),
                            Some(bra_b),
                            herald_bra,
                        ])?;
                        state.expectation(&proj)?.re
                    }
                };
                probs.push(p.clamp(0.0, 1.0));
            }
        }
        if herald_bra.is_some() {
            let kept: f64 = probs.iter().sum();
            probs.push((1.0 - kept).max(0.0));
        }
        let cdf = cumulative(&probs)?;
        let drawn = sample_categories(&cdf, n_per_setting, &efficiencies, seed, (k as u64) << 40);
        counts
            .rows
            .insert(pair, [drawn[0], drawn[1], drawn[2], drawn[3]]);
    }
    Ok(counts)
}
