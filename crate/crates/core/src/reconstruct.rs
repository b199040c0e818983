//! Expectation-maximization maximum-likelihood estimation of the
//! photon-number distribution from click/no-click records.

use crate::detector::MeasurementRecord;
use crate::error::{Error, Result};
use crate::povm::{dot, PovmElement};
use crate::state::{overlap, PhotonDistribution};

/// Probabilities are clamped to [PROB_FLOOR, 1 - PROB_FLOOR] inside the
/// update to keep the multiplicative weights finite on truncated search
/// spaces; clamp events are counted and reported.
pub(crate) const PROB_FLOOR: f64 = 1e-15;

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Uniform over the whole search space.
    MaximalEntropy,
    /// Caller-supplied start; must match the search dimension and be strictly
    /// positive everywhere (a zero entry can never become nonzero under the
    /// multiplicative update).
    Custom(PhotonDistribution),
}

/// Iteration budget, search-space size, start, trace cadence, and optional
/// early stop.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    max_iterations: u64,
    search_dim: usize,
    init: InitialState,
    record_trace_every: u64,
    stop_tol: Option<f64>,
}

impl ReconstructionConfig {
    /// `search_dim` counts basis states, so a search space of 0..=M photons
    /// has dimension M + 1.
    pub fn new(max_iterations: u64, search_dim: usize) -> Result<Self> {
        if max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if search_dim < 2 {
            return Err(Error::InvalidParameter {
                name: "search_dim",
                value: search_dim as f64,
                expected: ">= 2",
            });
        }
        Ok(Self {
            max_iterations,
            search_dim,
            init: InitialState::MaximalEntropy,
            record_trace_every: 1,
            stop_tol: None,
        })
    }

    pub fn with_init(mut self, init: InitialState) -> Self {
        self.init = init;
        self
    }

    pub fn with_trace_every(mut self, every: u64) -> Result<Self> {
        if every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_trace_every",
                value: 0.0,
                expected: ">= 1",
            });
        }
        self.record_trace_every = every;
        Ok(self)
    }

    /// Stop once the log-likelihood gain per iteration drops below `tol`.
    /// Off by default: fixed iteration counts keep runs comparable.
    pub fn with_stop_tol(mut self, tol: f64) -> Result<Self> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "stop_tol",
                value: tol,
                expected: "> 0",
            });
        }
        self.stop_tol = Some(tol);
        Ok(self)
    }

    pub fn max_iterations(&self) -> u64 {
        self.max_iterations
    }

    pub fn search_dim(&self) -> usize {
        self.search_dim
    }

    pub fn init(&self) -> &InitialState {
        &self.init
    }

    pub fn record_trace_every(&self) -> u64 {
        self.record_trace_every
    }

    pub fn stop_tol(&self) -> Option<f64> {
        self.stop_tol
    }
}

/// Outcome of a reconstruction run: the estimate, traces sampled on the
/// configured cadence (always including iteration 0 and the last iteration),
/// the statistical error bound of the data, and diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub estimate: PhotonDistribution,
    pub loglik_trace: Vec<(u64, f64)>,
    pub fidelity_trace: Option<Vec<(u64, f64)>>,
    pub error_bound: f64,
    pub clamp_events: u64,
    pub iterations_run: u64,
}

fn check_aligned(povms: &[PovmElement], records: &[MeasurementRecord], dim: usize) -> Result<()> {
    if povms.len() != records.len() {
        return Err(Error::LengthMismatch {
            context: "povm elements vs measurement records",
            left: povms.len(),
            right: records.len(),
        });
    }
    if povms.is_empty() {
        return Err(Error::InvalidParameter {
            name: "records",
            value: 0.0,
            expected: "at least one measurement record",
        });
    }
    for povm in povms {
        if povm.dim() < dim {
            return Err(Error::LengthMismatch {
                context: "povm kernel vs search space",
                left: povm.dim(),
                right: dim,
            });
        }
    }
    Ok(())
}

/// Binomial log-likelihood of the records given the state, up to the
/// rho-independent combinatorial constant, so values are comparable only
/// within one data set.
///
/// A no-click probability of exactly 0 with observed no-clicks (or exactly 1
/// with observed clicks) yields negative infinity.
pub fn log_likelihood(
    rho: &PhotonDistribution,
    povms: &[PovmElement],
    records: &[MeasurementRecord],
) -> Result<f64> {
    check_aligned(povms, records, rho.dim())?;
    Ok(log_likelihood_slice(rho.probs(), povms, records))
}

pub(crate) fn log_likelihood_slice(
    probs: &[f64],
    povms: &[PovmElement],
    records: &[MeasurementRecord],
) -> f64 {
    let mut ll = 0.0;
    for (povm, rec) in povms.iter().zip(records) {
        let p = dot(povm.kernel(), probs);
        let s = rec.no_clicks() as f64;
        let n = rec.trials() as f64;
        if s > 0.0 {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += s * p.clamp(PROB_FLOOR, 1.0).ln();
        }
        if s < n {
            if p >= 1.0 {
                return f64::NEG_INFINITY;
            }
            ll += (n - s) * (1.0 - p).clamp(PROB_FLOOR, 1.0).ln();
        }
    }
    ll
}

/// One multiplicative update. Every entry is reweighted by
/// R_n = sum_j w_j [ f_j r_{j,n} / p_j + (1 - f_j)(1 - r_{j,n}) / (1 - p_j) ]
/// and the result renormalized, where f_j is the observed no-click frequency,
/// p_j the modeled one, and w_j = N_j / sum N the record's share of all
/// trials, which keeps the update aligned with the count-weighted likelihood
/// when records carry unequal trial counts.
pub fn em_step(
    rho: &PhotonDistribution,
    povms: &[PovmElement],
    records: &[MeasurementRecord],
) -> Result<PhotonDistribution> {
    check_aligned(povms, records, rho.dim())?;
    let mut out = Vec::new();
    let mut clamps = 0;
    em_step_into(rho.probs(), povms, records, &mut out, &mut clamps)?;
    PhotonDistribution::from_probs(out)
}

// R_n = c0 + sum_j c_j r_{j,n} with c0 = sum_j b_j, c_j = a_j - b_j,
// a_j = w_j f_j / p_j, b_j = w_j (1 - f_j) / (1 - p_j): one pass over j per
// entry instead of two.
pub(crate) fn em_step_into(
    probs: &[f64],
    povms: &[PovmElement],
    records: &[MeasurementRecord],
    out: &mut Vec<f64>,
    clamp_events: &mut u64,
) -> Result<()> {
    let total: f64 = records.iter().map(|r| r.trials() as f64).sum();
    let mut c0 = 0.0;
    let mut coeff = Vec::with_capacity(records.len());
    for (povm, rec) in povms.iter().zip(records) {
        let p = dot(povm.kernel(), probs);
        let pc = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        if pc != p {
            *clamp_events += 1;
        }
        let w = rec.trials() as f64 / total;
        let f = rec.frequency();
        let a = w * f / pc;
        let b = w * (1.0 - f) / (1.0 - pc);
        c0 += b;
        coeff.push(a - b);
    }
    out.clear();
    out.extend(probs.iter().enumerate().map(|(n, rho_n)| {
        let mut r = c0;
        for (povm, c) in povms.iter().zip(&coeff) {
            r += c * povm.kernel()[n];
        }
        rho_n * r
    }));
    let norm: f64 = out.iter().sum();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::Numerical(format!(
            "update lost normalization (sum = {norm})"
        )));
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    Ok(())
}

/// Iterate the update from the configured start, tracing log-likelihood (and
/// fidelity against `truth` when given) on the configured cadence.
pub fn reconstruct(
    povms: &[PovmElement],
    records: &[MeasurementRecord],
    config: &ReconstructionConfig,
    truth: Option<&PhotonDistribution>,
) -> Result<ReconstructionReport> {
    check_aligned(povms, records, config.search_dim)?;
    let mut probs = match &config.init {
        InitialState::MaximalEntropy => {
            vec![1.0 / config.search_dim as f64; config.search_dim]
        }
        InitialState::Custom(d) => {
            if d.dim() != config.search_dim {
                return Err(Error::LengthMismatch {
                    context: "custom initial state vs search space",
                    left: d.dim(),
                    right: config.search_dim,
                });
            }
            if d.probs().iter().any(|p| *p <= 0.0) {
                return Err(Error::InvalidDistribution {
                    reason: "custom initial state must be strictly positive".into(),
                });
            }
            d.probs().to_vec()
        }
    };

    let mut loglik_trace = Vec::new();
    let mut fidelity_trace = truth.map(|_| Vec::new());
    let mut record_point = |iter: u64, probs: &[f64], ll: f64| {
        loglik_trace.push((iter, ll));
        if let (Some(trace), Some(t)) = (fidelity_trace.as_mut(), truth) {
            trace.push((iter, overlap(probs, t.probs())));
        }
    };

    let mut ll = log_likelihood_slice(&probs, povms, records);
    record_point(0, &probs, ll);

    let track_every = config.stop_tol.is_some();
    let mut clamp_events = 0;
    let mut next = Vec::with_capacity(probs.len());
    let mut iterations_run = 0;
    let mut last_recorded = 0;
    for t in 1..=config.max_iterations {
        em_step_into(&probs, povms, records, &mut next, &mut clamp_events)?;
        std::mem::swap(&mut probs, &mut next);
        iterations_run = t;
        let at_cadence = t % config.record_trace_every == 0;
        let mut stop = false;
        if track_every || at_cadence || t == config.max_iterations {
            let new_ll = log_likelihood_slice(&probs, povms, records);
            if let Some(tol) = config.stop_tol {
                stop = (new_ll - ll).abs() < tol;
            }
            ll = new_ll;
            if at_cadence || stop || t == config.max_iterations {
                record_point(t, &probs, ll);
                last_recorded = t;
            }
        }
        if stop {
            break;
        }
    }
    debug_assert_eq!(last_recorded, iterations_run);

    Ok(ReconstructionReport {
        estimate: PhotonDistribution::from_probs(probs)?,
        loglik_trace,
        fidelity_trace,
        error_bound: error_bound(records)?,
        clamp_events,
        iterations_run,
    })
}

/// Statistical uncertainty of the reconstruction, from the data alone:
/// the largest per-setting binomial standard error
/// max_j sqrt( (S_j / N_j^2) (1 - S_j / N_j) ).
pub fn error_bound(records: &[MeasurementRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidParameter {
            name: "records",
            value: 0.0,
            expected: "at least one measurement record",
        });
    }
    Ok(records
        .iter()
        .map(|r| {
            let f = r.frequency();
            (f * (1.0 - f) / r.trials() as f64).sqrt()
        })
        .fold(0.0, f64::max))
}

/// The same bound evaluated from exact model probabilities instead of
/// sampled counts: max_j sqrt( p_j (1 - p_j) / N_j ).
pub fn predicted_error_bound(
    rho: &PhotonDistribution,
    povms: &[PovmElement],
    trials: &[u64],
) -> Result<f64> {
    if povms.len() != trials.len() {
        return Err(Error::LengthMismatch {
            context: "povm elements vs trial counts",
            left: povms.len(),
            right: trials.len(),
        });
    }
    if povms.is_empty() {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: 0.0,
            expected: "at least one setting",
        });
    }
    let mut worst = 0.0f64;
    for (povm, &n) in povms.iter().zip(trials) {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: 0.0,
                expected: ">= 1 per setting",
            });
        }
        let p = povm.no_click_probability(rho).clamp(0.0, 1.0);
        worst = worst.max((p * (1.0 - p) / n as f64).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn element(kernel: Vec<f64>) -> PovmElement {
        PovmElement::new(kernel, "test").unwrap()
    }

    fn record(trials: u64, no_clicks: u64) -> MeasurementRecord {
        MeasurementRecord::new("test", trials, no_clicks).unwrap()
    }

    #[test]
    fn certain_no_click_data_has_zero_log_likelihood() {
        let rho = PhotonDistribution::fock(0, 2).unwrap();
        let povms = [element(vec![1.0, 1.0])];
        let records = [record(100, 100)];
        assert_eq!(log_likelihood(&rho, &povms, &records).unwrap(), 0.0);
    }

    #[test]
    fn log_likelihood_matches_hand_arithmetic() {
        let rho = PhotonDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let povms = [element(vec![1.0, 0.0])];
        let records = [record(2, 1)];
        assert_relative_eq!(
            log_likelihood(&rho, &povms, &records).unwrap(),
            2.0 * 0.5f64.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn impossible_observations_give_negative_infinity() {
        let povms = [element(vec![1.0, 0.0])];
        let one_photon = PhotonDistribution::fock(1, 2).unwrap();
        let ll = log_likelihood(&one_photon, &povms, &[record(10, 3)]).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);

        let blind = [element(vec![1.0, 1.0])];
        let ll = log_likelihood(&one_photon, &blind, &[record(10, 3)]).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn frequency_matching_probabilities_maximize_log_likelihood() {
        // p = 0.5 exactly, f = 2/4 = 0.5: no other state scores higher.
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(4, 2)];
        let best = PhotonDistribution::from_probs(vec![0.25, 0.25, 0.5]).unwrap();
        let best_ll = log_likelihood(&best, &povms, &records).unwrap();
        for other in [
            PhotonDistribution::from_probs(vec![0.6, 0.3, 0.1]).unwrap(),
            PhotonDistribution::fock(2, 3).unwrap(),
            PhotonDistribution::uniform(3).unwrap(),
        ] {
            assert!(log_likelihood(&other, &povms, &records).unwrap() <= best_ll + 1e-12);
        }
    }

    #[test]
    fn exactly_reproduced_frequencies_are_a_fixed_point() {
        let povms = [
            element(vec![1.0, 0.5, 0.25]),
            element(vec![1.0, 0.25, 0.0625]),
        ];
        // p1 = 0.5, p2 = 0.34375 = 11/32 exactly.
        let rho = PhotonDistribution::from_probs(vec![0.25, 0.25, 0.5]).unwrap();
        let records = [record(4, 2), record(32, 11)];
        let next = em_step(&rho, &povms, &records).unwrap();
        for (a, b) in next.probs().iter().zip(rho.probs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_entries_stay_zero() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let rho = PhotonDistribution::from_probs(vec![0.5, 0.0, 0.5]).unwrap();
        let records = [record(10, 4)];
        let next = em_step(&rho, &povms, &records).unwrap();
        assert_eq!(next.probs()[1], 0.0);
    }

    #[test]
    fn vacuum_kernel_iteration_recovers_the_no_click_split() {
        // Kernel [1, 0]: model no-click probability equals the vacuum weight,
        // so the likelihood maximum puts exactly f on the vacuum.
        let povms = [element(vec![1.0, 0.0])];
        let records = [record(400, 100)];
        let mut rho = PhotonDistribution::uniform(2).unwrap();
        for _ in 0..500 {
            rho = em_step(&rho, &povms, &records).unwrap();
        }
        assert_relative_eq!(rho.probs()[0], 0.25, epsilon = 1e-6);
        assert_relative_eq!(rho.probs()[1], 0.75, epsilon = 1e-6);
    }

    #[test]
    fn update_never_decreases_log_likelihood() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let dim = rng.random_range(2..6);
            let k = rng.random_range(1..5);
            let povms: Vec<PovmElement> = (0..k)
                .map(|_| {
                    element(
                        (0..dim)
                            .map(|_| rng.random_range(0.0..=1.0))
                            .collect::<Vec<f64>>(),
                    )
                })
                .collect();
            let records: Vec<MeasurementRecord> = (0..k)
                .map(|_| {
                    let n = rng.random_range(1..1000u64);
                    let s = rng.random_range(0..=n);
                    record(n, s)
                })
                .collect();
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let mut rho =
                PhotonDistribution::from_probs(raw.iter().map(|v| v / sum).collect()).unwrap();
            let mut ll = log_likelihood(&rho, &povms, &records).unwrap();
            for _ in 0..20 {
                rho = em_step(&rho, &povms, &records).unwrap();
                let next_ll = log_likelihood(&rho, &povms, &records).unwrap();
                assert!(next_ll >= ll - 1e-12, "{next_ll} < {ll}");
                ll = next_ll;
            }
        }
    }

    #[test]
    fn config_rejects_degenerate_settings() {
        assert!(ReconstructionConfig::new(0, 13).is_err());
        assert!(ReconstructionConfig::new(10, 1).is_err());
        let c = ReconstructionConfig::new(10, 13).unwrap();
        assert!(c.clone().with_trace_every(0).is_err());
        assert!(c.with_stop_tol(0.0).is_err());
    }

    #[test]
    fn custom_start_must_match_dimension_and_be_positive() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(10, 5)];
        let config = ReconstructionConfig::new(5, 3)
            .unwrap()
            .with_init(InitialState::Custom(
                PhotonDistribution::uniform(2).unwrap(),
            ));
        assert!(reconstruct(&povms, &records, &config, None).is_err());

        let config = ReconstructionConfig::new(5, 3)
            .unwrap()
            .with_init(InitialState::Custom(
                PhotonDistribution::from_probs(vec![0.5, 0.5, 0.0]).unwrap(),
            ));
        assert!(reconstruct(&povms, &records, &config, None).is_err());
    }

    #[test]
    fn traces_cover_start_cadence_and_end() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(1000, 400)];
        let truth = PhotonDistribution::uniform(3).unwrap();
        let config = ReconstructionConfig::new(10, 3)
            .unwrap()
            .with_trace_every(4)
            .unwrap();
        let report = reconstruct(&povms, &records, &config, Some(&truth)).unwrap();
        let iters: Vec<u64> = report.loglik_trace.iter().map(|(i, _)| *i).collect();
        assert_eq!(iters, vec![0, 4, 8, 10]);
        let fid = report.fidelity_trace.unwrap();
        assert_eq!(fid.len(), 4);
        for (_, f) in &fid {
            assert!((0.0..=1.0).contains(f));
        }
        for w in report.loglik_trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert_eq!(report.iterations_run, 10);
    }

    #[test]
    fn omitting_truth_only_drops_the_fidelity_trace() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(1000, 400)];
        let config = ReconstructionConfig::new(20, 3).unwrap();
        let truth = PhotonDistribution::fock(1, 3).unwrap();
        let with = reconstruct(&povms, &records, &config, Some(&truth)).unwrap();
        let without = reconstruct(&povms, &records, &config, None).unwrap();
        assert!(without.fidelity_trace.is_none());
        assert_eq!(with.estimate.probs(), without.estimate.probs());
        assert_eq!(with.loglik_trace, without.loglik_trace);
    }

    #[test]
    fn early_stop_halts_before_the_iteration_budget() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(1000, 400)];
        let config = ReconstructionConfig::new(10_000, 3)
            .unwrap()
            .with_stop_tol(1e-10)
            .unwrap();
        let report = reconstruct(&povms, &records, &config, None).unwrap();
        assert!(report.iterations_run < 10_000);
        assert_eq!(report.loglik_trace.last().unwrap().0, report.iterations_run);
    }

    #[test]
    fn single_iteration_equals_one_update() {
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let records = [record(100, 37)];
        let config = ReconstructionConfig::new(1, 3).unwrap();
        let report = reconstruct(&povms, &records, &config, None).unwrap();
        let by_hand = em_step(&PhotonDistribution::uniform(3).unwrap(), &povms, &records).unwrap();
        for (a, b) in report.estimate.probs().iter().zip(by_hand.probs()) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn error_bound_is_the_worst_binomial_deviation() {
        let records = [record(10_000, 5_000)];
        assert_relative_eq!(error_bound(&records).unwrap(), 0.005, max_relative = 1e-12);
        let records = [record(10_000, 5_000), record(10_000, 1_000)];
        assert_relative_eq!(error_bound(&records).unwrap(), 0.005, max_relative = 1e-12);
        let records = [record(100, 0), record(100, 100)];
        assert_eq!(error_bound(&records).unwrap(), 0.0);
        assert!(error_bound(&[]).is_err());
    }

    #[test]
    fn predicted_bound_matches_hand_values_and_scaling() {
        let rho = PhotonDistribution::from_probs(vec![0.25, 0.25, 0.5]).unwrap();
        let povms = [element(vec![1.0, 0.5, 0.25])];
        let b = predicted_error_bound(&rho, &povms, &[10_000]).unwrap();
        assert_relative_eq!(b, 0.005, max_relative = 1e-12);
        let b100 = predicted_error_bound(&rho, &povms, &[1_000_000]).unwrap();
        assert_relative_eq!(b / b100, 10.0, max_relative = 1e-12);

        let vacuum = PhotonDistribution::fock(0, 2).unwrap();
        let certain = [element(vec![1.0, 1.0])];
        assert_eq!(
            predicted_error_bound(&vacuum, &certain, &[10]).unwrap(),
            0.0
        );
        assert!(predicted_error_bound(&vacuum, &certain, &[0]).is_err());
        assert!(predicted_error_bound(&vacuum, &certain, &[1, 2]).is_err());
    }
}
