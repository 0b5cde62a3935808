//! Rank-frequency distributions and power-law fits.
//!
//! A vocabulary sorted by decreasing frequency gives a rank-frequency
//! series; on a log-log plot a power law is a straight line, so the
//! exponent is estimated by ordinary least squares of ln(frequency) on
//! ln(rank) over a linear regime. Each distinct rank contributes one
//! point and logs are natural; the slope does not depend on the base.

use crate::corpus::Vocabulary;
use crate::{Error, Result};

/// Term frequency by rank. Ranks are strictly increasing, frequencies
/// non-increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankFrequency {
    points: Vec<(u64, u64)>,
}

impl RankFrequency {
    pub fn new(points: Vec<(u64, u64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("rank-frequency series".into()));
        }
        for pair in points.windows(2) {
            let ((rank_a, freq_a), (rank_b, freq_b)) = (pair[0], pair[1]);
            if rank_b <= rank_a {
                return Err(Error::Parse(format!(
                    "ranks must increase: {rank_a} then {rank_b}"
                )));
            }
            if freq_b > freq_a {
                return Err(Error::Parse(format!(
                    "frequency rises from {freq_a} to {freq_b} at rank {rank_b}"
                )));
            }
        }
        if points[0].0 == 0 {
            return Err(Error::Bounds { what: "rank", value: 0, min: 1, max: usize::MAX });
        }
        Ok(RankFrequency { points })
    }

    pub fn points(&self) -> &[(u64, u64)] {
        &self.points
    }

    pub fn max_rank(&self) -> u64 {
        self.points.last().map(|&(r, _)| r).unwrap_or(0)
    }
}

/// One point per vocabulary entry, in rank order.
pub fn rank_frequency(vocab: &Vocabulary) -> Result<RankFrequency> {
    RankFrequency::new(
        vocab
            .entries
            .iter()
            .map(|e| (e.rank as u64, e.frequency))
            .collect(),
    )
}

/// `(ln rank, ln frequency)` pairs for plotting; zero frequencies have no
/// logarithm and are omitted.
pub fn loglog_points(rf: &RankFrequency) -> Vec<(f64, f64)> {
    rf.points
        .iter()
        .filter(|&&(_, f)| f > 0)
        .map(|&(r, f)| ((r as f64).ln(), (f as f64).ln()))
        .collect()
}

/// A fitted line on the log-log plot. `alpha` is the distribution exponent
/// reported as the negated regression slope; the relation between the
/// rank-frequency slope and the survival-function exponent is left as
/// quoted, not reconciled.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub fit_range: (u64, u64),
    pub r_squared: f64,
    pub alpha: f64,
}

/// The default linear regime: ranks whose frequency exceeds 1, cut just
/// before the longest run of tied frequencies begins. Long tie plateaus are
/// the tail fan-out where the log-log plot flattens into steps; with no tie
/// run at all, only the frequency filter applies. Among equally long runs
/// the last one (lowest frequency) is the cut point.
fn auto_regime(rf: &RankFrequency) -> Vec<(u64, u64)> {
    let points = rf.points();
    let mut cut = u64::MAX;
    let mut best_len = 1;
    let mut run_start = 0;
    for i in 1..=points.len() {
        if i < points.len() && points[i].1 == points[run_start].1 {
            continue;
        }
        let run_len = i - run_start;
        if run_len >= 2 && run_len >= best_len {
            best_len = run_len;
            cut = if run_start == 0 { 0 } else { points[run_start - 1].0 };
        }
        run_start = i;
    }
    points
        .iter()
        .filter(|&&(rank, freq)| freq > 1 && rank <= cut)
        .copied()
        .collect()
}

/// Least-squares fit of ln(frequency) on ln(rank).
///
/// With an explicit `regime` the fit covers the points whose rank falls in
/// that inclusive range (zero-frequency points are excluded); without one
/// the automatic regime described on [`auto_regime`] applies. At least 3
/// usable points are required.
pub fn fit_loglog(rf: &RankFrequency, regime: Option<(u64, u64)>) -> Result<PowerLawFit> {
    let (points, fit_range) = match regime {
        Some((lo, hi)) => {
            if lo < 1 || lo > hi {
                return Err(Error::Bounds {
                    what: "regime lower bound",
                    value: lo as usize,
                    min: 1,
                    max: hi as usize,
                });
            }
            if hi > rf.max_rank() {
                return Err(Error::Bounds {
                    what: "regime upper bound",
                    value: hi as usize,
                    min: lo as usize,
                    max: rf.max_rank() as usize,
                });
            }
            let points: Vec<(u64, u64)> = rf
                .points()
                .iter()
                .filter(|&&(rank, freq)| rank >= lo && rank <= hi && freq > 0)
                .copied()
                .collect();
            (points, (lo, hi))
        }
        None => {
            let points = auto_regime(rf);
            let range = match (points.first(), points.last()) {
                (Some(&(lo, _)), Some(&(hi, _))) => (lo, hi),
                _ => (0, 0),
            };
            (points, range)
        }
    };
    if points.len() < 3 {
        return Err(Error::EmptyInput(format!(
            "power-law fit needs at least 3 usable points, found {}",
            points.len()
        )));
    }

    let n = points.len() as f64;
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(r, f)| ((r as f64).ln(), (f as f64).ln()))
        .collect();
    let x_mean = xy.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let y_mean = xy.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|&(x, _)| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xy.iter().map(|&(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = xy.iter().map(|&(_, y)| (y - y_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xy
        .iter()
        .map(|&(x, y)| {
            let resid = y - (intercept + slope * x);
            resid * resid
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        // A perfectly flat series is fitted exactly by the constant.
        1.0
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        fit_range,
        r_squared,
        alpha: -slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, TokenStream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(freqs: &[u64]) -> RankFrequency {
        RankFrequency::new(
            freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| (i as u64 + 1, f))
                .collect(),
        )
        .unwrap()
    }

    /// round(c * rank^-beta) for ranks 1..=n.
    fn synthetic_law(c: f64, beta: f64, n: u64) -> RankFrequency {
        series(
            &(1..=n)
                .map(|r| (c * (r as f64).powf(-beta)).round() as u64)
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn vocabulary_maps_to_rank_points() {
        let streams = [TokenStream {
            record_id: "r".into(),
            tokens: ["a", "a", "a", "b", "b"].iter().map(|t| t.to_string()).collect(),
        }];
        let vocab = build_vocabulary(&streams).unwrap();
        let rf = rank_frequency(&vocab).unwrap();
        assert_eq!(rf.points(), &[(1, 3), (2, 2)]);
    }

    #[test]
    fn constant_frequencies_are_a_constant_sequence() {
        let rf = series(&[4, 4, 4]);
        assert!(rf.points().iter().all(|&(_, f)| f == 4));
    }

    #[test]
    fn rising_frequency_is_rejected() {
        assert!(RankFrequency::new(vec![(1, 2), (2, 3)]).is_err());
        assert!(RankFrequency::new(vec![(2, 3), (2, 2)]).is_err());
        assert!(RankFrequency::new(vec![]).is_err());
    }

    #[test]
    fn zipfian_draws_yield_non_increasing_series() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tokens = Vec::new();
        for _ in 0..5000 {
            // Inverse-rank weights over 50 terms via rejection-free CDF walk.
            let z: f64 = (1..=50).map(|r| 1.0 / r as f64).sum();
            let mut pick = rng.random_range(0.0..z);
            for r in 1..=50 {
                let w = 1.0 / r as f64;
                if pick < w {
                    tokens.push(format!("t{r:02}"));
                    break;
                }
                pick -= w;
            }
        }
        let streams = [TokenStream { record_id: "z".into(), tokens }];
        let vocab = build_vocabulary(&streams).unwrap();
        let rf = rank_frequency(&vocab).unwrap();
        for pair in rf.points().windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn exact_inverse_square_law_recovers_slope() {
        let rf = synthetic_law(1e6, 2.0, 100);
        // No tie runs in ranks 1..100 and every frequency exceeds 1, so the
        // automatic regime is the whole series.
        let fit = fit_loglog(&rf, None).unwrap();
        assert_eq!(fit.fit_range, (1, 100));
        assert_abs_diff_eq!(fit.slope, -2.0, epsilon = 0.01);
        assert_abs_diff_eq!(fit.alpha, 2.0, epsilon = 0.01);
        assert!(fit.r_squared > 0.9999);
    }

    #[test]
    fn collinear_points_fit_perfectly() {
        let rf = RankFrequency::new(vec![(1, 64), (2, 16), (4, 4)]).unwrap();
        let fit = fit_loglog(&rf, Some((1, 4))).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 64f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn auto_regime_cuts_before_longest_tie_run() {
        let rf = series(&[50, 30, 20, 12, 8, 5, 3, 2, 2, 2, 1, 1]);
        // Longest run is frequency 2 at ranks 8..10; cut at rank 7.
        let fit = fit_loglog(&rf, None).unwrap();
        assert_eq!(fit.fit_range, (1, 7));
    }

    #[test]
    fn auto_regime_prefers_last_of_equal_runs() {
        let rf = series(&[9, 5, 5, 3, 2, 2, 1]);
        // Two runs of length 2; the later one (frequency 2, ranks 5..6)
        // sets the cut at rank 4.
        let fit = fit_loglog(&rf, None).unwrap();
        assert_eq!(fit.fit_range, (1, 4));
    }

    #[test]
    fn auto_regime_without_ties_keeps_all_above_one() {
        let rf = series(&[9, 7, 5, 3, 1]);
        let fit = fit_loglog(&rf, None).unwrap();
        assert_eq!(fit.fit_range, (1, 4));
    }

    #[test]
    fn auto_regime_plateau_at_head_leaves_too_few_points() {
        let rf = series(&[5, 5, 5, 5, 3, 2, 1]);
        // The longest run starts at rank 1, so the cut empties the regime.
        assert!(fit_loglog(&rf, None).is_err());
    }

    #[test]
    fn explicit_range_is_validated() {
        let rf = series(&[9, 7, 5, 3, 2]);
        assert!(matches!(
            fit_loglog(&rf, Some((0, 3))).unwrap_err(),
            Error::Bounds { .. }
        ));
        assert!(matches!(
            fit_loglog(&rf, Some((4, 2))).unwrap_err(),
            Error::Bounds { .. }
        ));
        assert!(matches!(
            fit_loglog(&rf, Some((1, 6))).unwrap_err(),
            Error::Bounds { .. }
        ));
        // Too few points inside a valid range.
        assert!(fit_loglog(&rf, Some((1, 2))).is_err());
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let rf = synthetic_law(5e4, 1.7, 60);
        let fit = fit_loglog(&rf, Some((1, 60))).unwrap();
        // Raw normal equations, a different route to the same estimate.
        let pts: Vec<(f64, f64)> = rf
            .points()
            .iter()
            .map(|&(r, f)| ((r as f64).ln(), (f as f64).ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = sy / n - slope * sx / n;
        assert_abs_diff_eq!(fit.slope, slope, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.intercept, intercept, epsilon = 1e-10);
    }

    #[test]
    fn loglog_points_skip_zero_frequencies() {
        let rf = RankFrequency::new(vec![(1, 5), (2, 2), (3, 0)]).unwrap();
        let pts = loglog_points(&rf);
        assert_eq!(pts.len(), 2);
        assert_abs_diff_eq!(pts[1].0, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[1].1, 2f64.ln(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn scaling_frequencies_shifts_intercept_only(
            scale in 2u64..50,
            beta in 0.5f64..2.5,
        ) {
            let base = synthetic_law(1e5, beta, 40);
            let scaled = RankFrequency::new(
                base.points().iter().map(|&(r, f)| (r, f * scale)).collect(),
            ).unwrap();
            let fit_a = fit_loglog(&base, Some((1, 40))).unwrap();
            let fit_b = fit_loglog(&scaled, Some((1, 40))).unwrap();
            prop_assert!((fit_a.slope - fit_b.slope).abs() < 1e-12);
            prop_assert!(
                ((fit_b.intercept - fit_a.intercept) - (scale as f64).ln()).abs() < 1e-10
            );
        }

        #[test]
        fn explicit_regime_ignores_tail_truncation(
            hi in 10u64..30,
            extra in 1u64..20,
        ) {
            let full = synthetic_law(1e5, 1.5, 30 + extra);
            let truncated = RankFrequency::new(
                full.points().iter().take(30).copied().collect(),
            ).unwrap();
            let fit_full = fit_loglog(&full, Some((3, hi))).unwrap();
            let fit_trunc = fit_loglog(&truncated, Some((3, hi))).unwrap();
            prop_assert_eq!(fit_full.slope.to_bits(), fit_trunc.slope.to_bits());
            prop_assert_eq!(fit_full.intercept.to_bits(), fit_trunc.intercept.to_bits());
        }

        #[test]
        fn r_squared_stays_in_unit_interval(freqs in proptest::collection::vec(1u64..500, 3..40)) {
            let mut sorted = freqs;
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let rf = series(&sorted);
            let max = rf.max_rank();
            if let Ok(fit) = fit_loglog(&rf, Some((1, max))) {
                prop_assert!((0.0..=1.0).contains(&fit.r_squared));
                prop_assert!(fit.alpha == -fit.slope);
            }
        }
    }
}
