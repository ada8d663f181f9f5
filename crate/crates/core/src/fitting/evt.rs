use crate::distributions::{normal_quantile, Gmm};
use crate::error::{invalid, Result};
use crate::stats::{contiguous_blocks, mean, nearest_rank};

/// Standard deviation used when the block maxima carry no spread.
pub const EVT_STD_FLOOR: f64 = 1e-3;

/// Tail-matched mixture and whether the quantile system was degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvtFit {
    pub gmm: Gmm,
    pub degenerate: bool,
}

/// Fit a two-component mixture whose first component reproduces the median
/// and 90th percentile of block maxima, with `round(sqrt(N))` blocks.
pub fn fit_gmm_evt(losses: &[f64]) -> Result<EvtFit> {
    if losses.len() < 4 {
        return Err(invalid("tail matching needs at least four scenarios"));
    }
    let blocks = ((losses.len() as f64).sqrt().round() as usize).max(1);
    fit_gmm_evt_blocks(losses, blocks)
}

/// Tail matching with an explicit block count. Blocks are contiguous and
/// differ in size by at most one; the nominal block size `N / blocks` is
/// used unrounded in the maximum-of-normals quantiles.
pub fn fit_gmm_evt_blocks(losses: &[f64], blocks: usize) -> Result<EvtFit> {
    let n_total = losses.len();
    if blocks == 0 || blocks > n_total {
        return Err(invalid(format!("cannot form {blocks} blocks from {n_total} scenarios")));
    }
    if losses.iter().any(|x| !x.is_finite()) {
        return Err(invalid("losses must be finite"));
    }
    let mut maxima: Vec<f64> = contiguous_blocks(n_total, blocks)
        .into_iter()
        .map(|r| losses[r].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    maxima.sort_by(f64::total_cmp);
    let q50 = nearest_rank(&maxima, 0.5);
    let q90 = nearest_rank(&maxima, 0.9);

    // The maximum of n iid N(mu, sigma) has p-quantile mu + sigma * Phi^-1(p^(1/n)).
    let n = n_total as f64 / blocks as f64;
    let z50 = normal_quantile(0.5f64.powf(1.0 / n))?;
    let z90 = normal_quantile(0.9f64.powf(1.0 / n))?;
    let sigma = (q90 - q50) / (z90 - z50);
    let (mu_e, sigma_e, degenerate) = if sigma > 0.0 && sigma.is_finite() {
        (q50 - sigma * z50, sigma, false)
    } else {
        (q50, EVT_STD_FLOOR, true)
    };
    let mu_s = mean(losses);
    let gmm = Gmm::new(vec![0.5, 0.5], vec![mu_e, 2.0 * (mu_s - 0.5 * mu_e)], vec![sigma_e, 0.0])?;
    Ok(EvtFit { gmm, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data() {
        let fit = fit_gmm_evt(&[2.0; 16]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.gmm.means(), &[2.0, 2.0]);
        assert_eq!(fit.gmm.stds(), &[EVT_STD_FLOOR, 0.0]);
    }

    #[test]
    fn one_point_blocks_match_the_median() {
        let xs = [3.0, -1.0, 0.5, 7.0, 2.0, 4.5, -3.0, 1.0, 0.0, 6.0];
        let fit = fit_gmm_evt_blocks(&xs, xs.len()).unwrap();
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        assert_eq!(fit.gmm.means()[0], nearest_rank(&s, 0.5));
        assert!(!fit.degenerate);
    }

    #[test]
    fn mean_is_preserved() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.0).collect();
        let fit = fit_gmm_evt(&xs).unwrap();
        assert!((fit.gmm.mean() - mean(&xs)).abs() < 1e-12);
        assert_eq!(fit.gmm.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn recovers_a_normal_tail() {
        use crate::rng::rng;
        let q = Gmm::new(vec![1.0], vec![1.0], vec![2.0]).unwrap();
        let mut xs = vec![0.0; 40_000];
        q.fill(&mut rng(6), &mut xs);
        let fit = fit_gmm_evt(&xs).unwrap();
        // Only 200 block maxima inform the fit, so the check is coarse.
        assert!((fit.gmm.means()[0] - 1.0).abs() < 1.0, "{:?}", fit.gmm);
        assert!((fit.gmm.stds()[0] - 2.0).abs() < 0.6, "{:?}", fit.gmm);
    }

    #[test]
    fn rejects_tiny_samples() {
        assert!(fit_gmm_evt(&[1.0, 2.0, 3.0]).is_err());
        assert!(fit_gmm_evt_blocks(&[1.0, 2.0], 3).is_err());
    }
}
