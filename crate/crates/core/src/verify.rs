//! Seeded randomized verification of the bounds and identities.
//!
//! Each trial draws its inputs from its own ChaCha8 stream, keyed by the
//! root seed and the trial's global index, so a run is reproducible and
//! independent of how trials are scheduled across threads. Every trial
//! reduces to a single scaled margin; negative margins beyond
//! [`VERIFY_TOLERANCE`] are violations.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bhatta::{bhattacharyya_coefficient, check_sqrt2_bound, one_d_identity_residual};
use crate::bounds::{
    check_delta0_bound, check_delta2_bound, check_l1_control, check_slice_total, check_small_sandwich,
    check_tiny_sandwich, check_universal_slice_bounds, delta2_auxiliary_identity, BoundEntry, RegimePolicy,
};
use crate::enumerate::{bhattacharyya_by_enumeration, full_slice_report, EnumConfig, DEFAULT_ENUM_LIMIT};
use crate::error::{Error, Result};
use crate::params::{lambda_n, tiny_bound, ParamPair, ParamVec};
use crate::pbin::{pmf_coordinate_derivative, pmf_extremal_bound, pmf_is_nonincreasing, pmf_of, PoissonBinomial};

/// A trial is a violation when its scaled margin is below `-VERIFY_TOLERANCE`.
pub const VERIFY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TheoremId {
    TinySandwich,
    SmallSandwich,
    Delta0,
    Delta2,
    L1Delta1,
    UniversalSlices,
    SumSlices,
    PbinExtremum,
    PbinMonotone,
    Sqrt2,
    BCTensor,
    SliceIdentity,
    AuxIdentity,
    OneDIdentity,
}

impl TheoremId {
    pub const ALL: [TheoremId; 14] = [
        TheoremId::TinySandwich,
        TheoremId::SmallSandwich,
        TheoremId::Delta0,
        TheoremId::Delta2,
        TheoremId::L1Delta1,
        TheoremId::UniversalSlices,
        TheoremId::SumSlices,
        TheoremId::PbinExtremum,
        TheoremId::PbinMonotone,
        TheoremId::Sqrt2,
        TheoremId::BCTensor,
        TheoremId::SliceIdentity,
        TheoremId::AuxIdentity,
        TheoremId::OneDIdentity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::TinySandwich => "TinySandwich",
            TheoremId::SmallSandwich => "SmallSandwich",
            TheoremId::Delta0 => "Delta0",
            TheoremId::Delta2 => "Delta2",
            TheoremId::L1Delta1 => "L1Delta1",
            TheoremId::UniversalSlices => "UniversalSlices",
            TheoremId::SumSlices => "SumSlices",
            TheoremId::PbinExtremum => "PbinExtremum",
            TheoremId::PbinMonotone => "PbinMonotone",
            TheoremId::Sqrt2 => "Sqrt2",
            TheoremId::BCTensor => "BCTensor",
            TheoremId::SliceIdentity => "SliceIdentity",
            TheoremId::AuxIdentity => "AuxIdentity",
            TheoremId::OneDIdentity => "OneDIdentity",
        }
    }

    /// Sampling box matching the theorem's hypotheses; `None` for the
    /// theorems whose inputs are not a parameter pair.
    pub fn default_sampling(self) -> Option<SamplingRegime> {
        use TheoremId::*;
        match self {
            TinySandwich => Some(SamplingRegime::Tiny),
            SmallSandwich | Delta0 | Delta2 | L1Delta1 | UniversalSlices | SumSlices | AuxIdentity => {
                Some(SamplingRegime::Small)
            }
            Sqrt2 => Some(SamplingRegime::QuasiSymmetric),
            BCTensor | SliceIdentity => Some(SamplingRegime::General),
            PbinExtremum | PbinMonotone | OneDIdentity => None,
        }
    }

    /// Smallest admissible `n` (or `N` for the Poisson–binomial theorems).
    pub fn min_n(self) -> usize {
        use TheoremId::*;
        match self {
            SmallSandwich | Delta0 | Delta2 | L1Delta1 | UniversalSlices | SumSlices | AuxIdentity => 2,
            _ => 1,
        }
    }

    fn needs_enumeration(self) -> bool {
        use TheoremId::*;
        !matches!(self, PbinExtremum | PbinMonotone | OneDIdentity | AuxIdentity)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem id '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SamplingRegime {
    /// `[0, 1/n²]^n`.
    Tiny,
    /// `[0, 1/(2n)]^n`, `n ≥ 2`.
    Small,
    /// `[0, 1]^n`.
    General,
    /// `p_i ∈ [½, 1]`, `q_i ∈ [0, ½]`, each coordinate jointly reflected
    /// about ½ with probability ½.
    QuasiSymmetric,
}

impl SamplingRegime {
    pub fn name(self) -> &'static str {
        match self {
            SamplingRegime::Tiny => "tiny",
            SamplingRegime::Small => "small",
            SamplingRegime::General => "general",
            SamplingRegime::QuasiSymmetric => "quasi",
        }
    }

    pub fn min_n(self) -> usize {
        match self {
            SamplingRegime::Small => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for SamplingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tiny" => Ok(SamplingRegime::Tiny),
            "small" => Ok(SamplingRegime::Small),
            "general" => Ok(SamplingRegime::General),
            "quasi" | "quasi-symmetric" | "quasisymmetric" => Ok(SamplingRegime::QuasiSymmetric),
            _ => Err(Error::InvalidArgument(format!("unknown regime '{s}'"))),
        }
    }
}

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn draw(rng: &mut ChaCha8Rng, hi: f64, boundary_biased: bool) -> f64 {
    // roughly a quarter of the entries land exactly on the edge
    if boundary_biased && rng.gen_bool(0.25) {
        hi
    } else {
        rng.gen_range(0.0..=hi)
    }
}

/// Draws a pair from the given box. With `boundary_biased`, a random subset
/// of entries is placed exactly on the box's upper edge (for the
/// quasi-symmetric box, exactly at ½ or at the extremes 0 and 1).
pub fn sample_pair(n: usize, regime: SamplingRegime, boundary_biased: bool, rng: &mut ChaCha8Rng) -> Result<ParamPair> {
    if n < regime.min_n() {
        return Err(Error::NTooSmall { n, min: regime.min_n() });
    }
    let (p, q): (Vec<f64>, Vec<f64>) = match regime {
        SamplingRegime::Tiny | SamplingRegime::Small | SamplingRegime::General => {
            let hi = match regime {
                SamplingRegime::Tiny => tiny_bound(n),
                SamplingRegime::Small => lambda_n(n),
                _ => 1.0,
            };
            let p = (0..n).map(|_| draw(rng, hi, boundary_biased)).collect();
            let q = (0..n).map(|_| draw(rng, hi, boundary_biased)).collect();
            (p, q)
        }
        SamplingRegime::QuasiSymmetric => (0..n)
            .map(|_| {
                let mut hi = 0.5 + draw(rng, 0.5, boundary_biased);
                let mut lo = 0.5 - draw(rng, 0.5, boundary_biased);
                if boundary_biased && rng.gen_bool(0.1) {
                    hi = 0.5;
                }
                if boundary_biased && rng.gen_bool(0.1) {
                    lo = 0.5;
                }
                if rng.gen_bool(0.5) {
                    (1.0 - hi, 1.0 - lo)
                } else {
                    (hi, lo)
                }
            })
            .unzip(),
    };
    ParamPair::new(ParamVec::new(p)?, ParamVec::new(q)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub theorem: TheoremId,
    pub n_min: usize,
    pub n_max: usize,
    /// Trials per value of `n`.
    pub trials: usize,
    pub seed: u64,
    pub boundary_biased: bool,
    /// Overrides the theorem's own sampling box; the run is then flagged
    /// out-of-regime when the override differs.
    pub sampling: Option<SamplingRegime>,
    pub enum_limit: usize,
    pub workers: Option<usize>,
}

impl VerifyConfig {
    pub fn new(theorem: TheoremId, n_min: usize, n_max: usize, trials: usize, seed: u64) -> Self {
        Self {
            theorem,
            n_min,
            n_max,
            trials,
            seed,
            boundary_biased: false,
            sampling: None,
            enum_limit: DEFAULT_ENUM_LIMIT,
            workers: None,
        }
    }

    pub fn boundary_biased(mut self, on: bool) -> Self {
        self.boundary_biased = on;
        self
    }

    pub fn sampling(mut self, regime: SamplingRegime) -> Self {
        self.sampling = Some(regime);
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    pub fn enum_limit(mut self, limit: usize) -> Self {
        self.enum_limit = limit;
        self
    }
}

/// The input of the worst trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Witness {
    Pair(ParamPair),
    Probabilities { r: Vec<f64>, lambda: f64 },
    Scalars { p: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRun {
    pub theorem_id: TheoremId,
    pub n_min: usize,
    pub n_max: usize,
    /// Trials per `n`.
    pub trials: usize,
    pub total_trials: usize,
    pub seed: u64,
    pub boundary_biased: bool,
    pub sampling: Option<SamplingRegime>,
    pub out_of_regime: bool,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst_trial: Option<usize>,
    /// Input of the worst trial, kept only when it is a violation.
    pub worst_case: Option<Witness>,
}

impl VerifyRun {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Trial {
    margin: f64,
    witness: Witness,
}

fn min_scaled<'a>(entries: impl IntoIterator<Item = &'a BoundEntry>) -> f64 {
    entries
        .into_iter()
        .map(BoundEntry::scaled_margin)
        .fold(f64::INFINITY, f64::min)
}

fn run_trial(cfg: &VerifyConfig, n: usize, index: u64) -> Result<Trial> {
    let mut rng = trial_rng(cfg.seed, index);
    let policy = if cfg.sampling.is_some() {
        RegimePolicy::Force
    } else {
        RegimePolicy::Enforce
    };
    let oracle_cfg = EnumConfig::sequential().with_limit(cfg.enum_limit);
    let t = cfg.theorem;

    match t {
        TheoremId::PbinExtremum => return pbin_extremum_trial(n, cfg.boundary_biased, &mut rng),
        TheoremId::PbinMonotone => return pbin_monotone_trial(n, cfg.boundary_biased, &mut rng),
        TheoremId::OneDIdentity => {
            let p = draw(&mut rng, 1.0, cfg.boundary_biased);
            let q = draw(&mut rng, 1.0, cfg.boundary_biased);
            let r = one_d_identity_residual(p, q);
            let worst = r.residual.max(r.frac_residual.unwrap_or(0.0));
            return Ok(Trial {
                margin: -worst,
                witness: Witness::Scalars { p, q },
            });
        }
        _ => {}
    }

    let regime = cfg
        .sampling
        .or_else(|| t.default_sampling())
        .expect("pair theorems have a sampling box");
    let pair = sample_pair(n, regime, cfg.boundary_biased, &mut rng)?;

    let margin = match t {
        TheoremId::AuxIdentity => {
            let mut worst: f64 = 0.0;
            for b in 1..n {
                for a in 0..b {
                    worst = worst.max(delta2_auxiliary_identity(&pair, a, b)?.max());
                }
            }
            -worst
        }
        TheoremId::BCTensor => {
            let prod = bhattacharyya_coefficient(&pair);
            let sum = bhattacharyya_by_enumeration(&pair, &oracle_cfg)?;
            -(prod - sum).abs() / sum.abs().max(f64::MIN_POSITIVE)
        }
        _ => {
            let rep = full_slice_report(&pair, &oracle_cfg)?;
            let (tv, d) = (rep.tv_exact, &rep.delta);
            match t {
                TheoremId::SliceIdentity => -rep.identity_residual / (2.0 * tv).max(1.0),
                TheoremId::TinySandwich => min_scaled(&check_tiny_sandwich(&pair, tv, policy)?),
                TheoremId::SmallSandwich => min_scaled(&check_small_sandwich(&pair, d[1], tv, policy)?),
                TheoremId::Delta0 => check_delta0_bound(&pair, d[0], d[1], policy)?.scaled_margin(),
                TheoremId::Delta2 => check_delta2_bound(&pair, d[2], d[1], policy)?.scaled_margin(),
                TheoremId::L1Delta1 => check_l1_control(&pair, d[1], policy)?.scaled_margin(),
                TheoremId::UniversalSlices => {
                    let entries = check_universal_slice_bounds(&pair, &rep, policy)?;
                    min_scaled(&entries[..entries.len() - 1])
                }
                TheoremId::SumSlices => {
                    let entries = check_universal_slice_bounds(&pair, &rep, policy)?;
                    let total = check_slice_total(&pair, &rep, policy)?;
                    entries.last().unwrap().scaled_margin().min(total.scaled_margin())
                }
                TheoremId::Sqrt2 => check_sqrt2_bound(&pair, tv, policy)?.scaled_margin(),
                _ => unreachable!("handled above"),
            }
        }
    };
    Ok(Trial {
        margin,
        witness: Witness::Pair(pair),
    })
}

fn pbin_extremum_trial(n: usize, boundary_biased: bool, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let cap = 1.0 / (n as f64 + 1.0);
    let lambda = draw(rng, cap, boundary_biased);
    let r: Vec<f64> = (0..n).map(|_| draw(rng, lambda, boundary_biased)).collect();
    let f = pmf_of(&r);
    let mut margin = f64::INFINITY;
    for (m, &fm) in f.iter().enumerate().skip(1) {
        let bound = pmf_extremal_bound(n, lambda, m)?;
        margin = margin.min((bound - fm) / bound.max(1.0));
    }
    Ok(Trial {
        margin,
        witness: Witness::Probabilities { r, lambda },
    })
}

/// Nonincreasing pmf, nonnegative coordinate derivatives for `m ≥ 1`, and
/// a paired evaluation raising one coordinate, all under `λ = 1/(N+1)`.
fn pbin_monotone_trial(n: usize, boundary_biased: bool, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let lambda = 1.0 / (n as f64 + 1.0);
    let r: Vec<f64> = (0..n).map(|_| draw(rng, lambda, boundary_biased)).collect();
    let pb = PoissonBinomial::from_slice(&r)?;
    let f = pb.pmf();

    let mono = pmf_is_nonincreasing(&pb)?;
    let mut margin = (1..f.len()).map(|m| f[m - 1] - f[m]).fold(f64::INFINITY, f64::min);
    if !mono.nonincreasing {
        margin = margin.min(-1.0);
    }
    for j in 0..n {
        for m in 1..=n {
            margin = margin.min(pmf_coordinate_derivative(&pb, j, m)?);
        }
    }
    let j = rng.gen_range(0..n);
    let mut raised = r.clone();
    raised[j] = rng.gen_range(r[j]..=lambda);
    let g = pmf_of(&raised);
    for m in 1..=n {
        margin = margin.min(g[m] - f[m]);
    }
    Ok(Trial {
        margin,
        witness: Witness::Probabilities { r, lambda },
    })
}

/// Runs `trials` seeded trials for every `n` in `n_min..=n_max`.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyRun> {
    let t = cfg.theorem;
    if cfg.sampling.is_some() && t.default_sampling().is_none() {
        return Err(Error::InvalidArgument(format!("{t} does not sample parameter pairs")));
    }
    if cfg.n_min > cfg.n_max {
        return Err(Error::InvalidArgument(format!(
            "empty n range {}..={}",
            cfg.n_min, cfg.n_max
        )));
    }
    let min = t.min_n().max(cfg.sampling.map_or(1, SamplingRegime::min_n));
    if cfg.n_min < min {
        return Err(Error::NTooSmall { n: cfg.n_min, min });
    }
    if t.needs_enumeration() && cfg.n_max > cfg.enum_limit {
        return Err(Error::DimensionTooLarge {
            n: cfg.n_max,
            limit: cfg.enum_limit,
        });
    }

    let jobs: Vec<(usize, u64)> = (cfg.n_min..=cfg.n_max)
        .flat_map(|n| (0..cfg.trials).map(move |t| (n, t)))
        .enumerate()
        .map(|(g, (n, _))| (n, g as u64))
        .collect();
    let exec = || -> Result<Vec<Trial>> { jobs.par_iter().map(|&(n, g)| run_trial(cfg, n, g)).collect() };
    let outcomes = match cfg.workers {
        Some(1) => jobs
            .iter()
            .map(|&(n, g)| run_trial(cfg, n, g))
            .collect::<Result<Vec<_>>>()?,
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(exec)?,
        None => exec()?,
    };

    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_trial = None;
    for (i, trial) in outcomes.iter().enumerate() {
        let m = if trial.margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            trial.margin
        };
        if m < -VERIFY_TOLERANCE {
            violations += 1;
        }
        if m < worst_margin {
            worst_margin = m;
            worst_trial = Some(i);
        }
    }
    let worst_case = worst_trial
        .filter(|_| worst_margin < -VERIFY_TOLERANCE)
        .map(|i| outcomes[i].witness.clone());

    Ok(VerifyRun {
        theorem_id: t,
        n_min: cfg.n_min,
        n_max: cfg.n_max,
        trials: cfg.trials,
        total_trials: jobs.len(),
        seed: cfg.seed,
        boundary_biased: cfg.boundary_biased,
        sampling: cfg.sampling,
        out_of_regime: cfg.sampling.is_some_and(|s| Some(s) != t.default_sampling()),
        violations,
        worst_margin,
        worst_trial,
        worst_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.name().parse::<TheoremId>().unwrap(), t);
            assert_eq!(t.name().to_lowercase().parse::<TheoremId>().unwrap(), t);
        }
        assert!("Nope".parse::<TheoremId>().is_err());
    }

    #[test]
    fn sampling_respects_boxes() {
        let mut rng = trial_rng(11, 0);
        let pair = sample_pair(4, SamplingRegime::Tiny, false, &mut rng).unwrap();
        assert!(pair.max_entry() <= 0.0625);
        let pair = sample_pair(2, SamplingRegime::Small, true, &mut rng).unwrap();
        assert!(pair.max_entry() <= 0.25);
        assert!(matches!(
            sample_pair(1, SamplingRegime::Small, false, &mut rng),
            Err(Error::NTooSmall { n: 1, min: 2 })
        ));
        for _ in 0..100 {
            let pair = sample_pair(6, SamplingRegime::QuasiSymmetric, true, &mut rng).unwrap();
            assert!(crate::bhatta::quasi_symmetry(&pair).is_quasi_symmetric);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_pair(7, SamplingRegime::General, false, &mut trial_rng(5, 3)).unwrap();
        let b = sample_pair(7, SamplingRegime::General, false, &mut trial_rng(5, 3)).unwrap();
        let c = sample_pair(7, SamplingRegime::General, false, &mut trial_rng(5, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn boundary_bias_hits_the_edge() {
        let mut rng = trial_rng(1, 1);
        let hits = (0..50)
            .map(|_| sample_pair(5, SamplingRegime::Small, true, &mut rng).unwrap())
            .filter(|p| p.p().values().iter().chain(p.q().values()).any(|&v| v == 0.1))
            .count();
        assert!(hits > 0);
    }

    #[test]
    fn slice_identity_run() {
        let run = run_verification(&VerifyConfig::new(TheoremId::SliceIdentity, 2, 12, 100, 42)).unwrap();
        assert_eq!(run.total_trials, 1100);
        assert_eq!(run.violations, 0);
        assert!(run.worst_case.is_none());
    }

    #[test]
    fn runs_are_reproducible_across_worker_counts() {
        for t in [TheoremId::SmallSandwich, TheoremId::PbinMonotone, TheoremId::Sqrt2] {
            let base = VerifyConfig::new(t, 2, 7, 40, 9);
            let a = run_verification(&base.clone().workers(1)).unwrap();
            let b = run_verification(&base.clone().workers(3)).unwrap();
            let c = run_verification(&base).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn forced_tiny_sampling_finds_sqrt2_violations() {
        // small entries make TV close to the l1 distance, far above sqrt(2)·l2
        let cfg = VerifyConfig::new(TheoremId::Sqrt2, 6, 8, 100, 1).sampling(SamplingRegime::Tiny);
        let run = run_verification(&cfg).unwrap();
        assert!(run.out_of_regime);
        assert!(run.violations > 0);
        let Some(Witness::Pair(pair)) = run.worst_case else {
            panic!("expected a pair witness")
        };
        assert!(!crate::bhatta::quasi_symmetry(&pair).is_quasi_symmetric);
    }

    #[test]
    fn range_validation() {
        let cfg = VerifyConfig::new(TheoremId::Delta0, 1, 4, 10, 0);
        assert!(matches!(run_verification(&cfg), Err(Error::NTooSmall { n: 1, min: 2 })));
        let cfg = VerifyConfig::new(TheoremId::SliceIdentity, 2, 30, 1, 0);
        assert!(matches!(run_verification(&cfg), Err(Error::DimensionTooLarge { .. })));
        let cfg = VerifyConfig::new(TheoremId::OneDIdentity, 1, 1, 1, 0).sampling(SamplingRegime::Tiny);
        assert!(run_verification(&cfg).is_err());
        let cfg = VerifyConfig::new(TheoremId::SliceIdentity, 5, 4, 1, 0);
        assert!(run_verification(&cfg).is_err());
    }

    #[test]
    fn every_theorem_passes_small_runs() {
        for t in TheoremId::ALL {
            for biased in [false, true] {
                let cfg = VerifyConfig::new(t, t.min_n(), 8, 60, 2024).boundary_biased(biased);
                let run = run_verification(&cfg).unwrap();
                assert_eq!(run.violations, 0, "{t} biased={biased}: {run:?}");
            }
        }
    }
}
