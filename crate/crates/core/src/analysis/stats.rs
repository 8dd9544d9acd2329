use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub stars: String,
}

/// 1-based ranks, ties share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pairs(xs: &[f64], ys: &[f64]) -> Result<(), AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(AnalysisError::InvalidInput("need at least 3 pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("non-finite value".into()));
    }
    Ok(())
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    pearson(&average_ranks(xs), &average_ranks(ys)).ok_or(AnalysisError::UndefinedCorrelation)
}

/// Spearman's rank correlation with a two-sided t-approximation p-value.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Correlation, AnalysisError> {
    check_pairs(xs, ys)?;
    let rho = spearman_rho(xs, ys)?;
    let n = xs.len() as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        two_sided_t(t, n - 2.0)
    };
    Ok(Correlation { rho, p_value })
}

/// Spearman's rho with an exact two-sided permutation p-value.
///
/// Enumerates all n! orderings of `ys`, so only for n below 10.
pub fn spearman_exact(xs: &[f64], ys: &[f64]) -> Result<Correlation, AnalysisError> {
    check_pairs(xs, ys)?;
    if xs.len() >= 10 {
        return Err(AnalysisError::InvalidInput(
            "exact permutation test limited to n < 10".into(),
        ));
    }
    let rx = average_ranks(xs);
    let mut ry = average_ranks(ys);
    let rho = pearson(&rx, &ry).ok_or(AnalysisError::UndefinedCorrelation)?;
    let observed = rho.abs() - 1e-12;
    let (mut extreme, mut total) = (0u64, 0u64);
    permute(&mut ry, 0, &mut |perm| {
        total += 1;
        if pearson(&rx, perm).unwrap_or(0.0).abs() >= observed {
            extreme += 1;
        }
    });
    Ok(Correlation {
        rho,
        p_value: extreme as f64 / total as f64,
    })
}

fn permute(items: &mut [f64], k: usize, visit: &mut impl FnMut(&[f64])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Significance marker: `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        "ns"
    }
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, AnalysisError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::UndefinedTest(
            "each sample needs at least 2 values".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("non-finite value".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(AnalysisError::UndefinedTest(
            "both samples are constant".into(),
        ));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p_value = two_sided_t(t, df);
    Ok(TTest {
        t,
        df,
        p_value,
        stars: stars(p_value).to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn spearman_monotone_and_reversed() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().rho,
            1.0
        );
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap().rho,
            -1.0
        );
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(AnalysisError::UndefinedCorrelation)
        ));
    }

    #[test]
    fn exact_permutation_p() {
        // 16 of the 120 orderings reach |rho| >= 0.8.
        let c = spearman_exact(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert!((c.rho - 0.8).abs() < 1e-12);
        assert!((c.p_value - 16.0 / 120.0).abs() < 1e-6, "{}", c.p_value);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "ns");
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.0009), "***");
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p_value, r.stars.as_str()), (0.0, 1.0, "ns"));
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }
}
