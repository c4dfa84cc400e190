use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::CalibError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlBin {
    pub n: usize,
    pub observed: usize,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlTestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: Vec<HlBin>,
}

/// Hosmer–Lemeshow goodness-of-fit test over `g` quantile groups of `probs`.
///
/// Group boundaries are moved forward past runs of equal probabilities, so tied
/// rows always share a bin; bins that end up empty are dropped and the degrees
/// of freedom follow the number of bins actually formed.
pub fn hosmer_lemeshow(labels: &[u8], probs: &[f64], g: usize) -> Result<HlTestResult, CalibError> {
    if labels.len() != probs.len() {
        return Err(CalibError::LengthMismatch(labels.len(), probs.len()));
    }
    let n = labels.len();
    if g < 2 || n < g {
        return Err(CalibError::BadParameter(format!("need 2 <= g <= n, got g={g}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    let mut cuts = vec![0];
    for k in 1..g {
        let mut c = ((k * n) as f64 / g as f64).round() as usize;
        while c > 0 && c < n && probs[order[c]] == probs[order[c - 1]] {
            c += 1;
        }
        if c > *cuts.last().unwrap() && c < n {
            cuts.push(c);
        }
    }
    cuts.push(n);
    let bins: Vec<HlBin> = cuts
        .windows(2)
        .map(|w| {
            let members = &order[w[0]..w[1]];
            HlBin {
                n: members.len(),
                observed: members.iter().filter(|&&i| labels[i] == 1).count(),
                expected: members.iter().map(|&i| probs[i]).sum(),
            }
        })
        .collect();
    if bins.len() < 3 {
        return Err(CalibError::TooFewBins(bins.len()));
    }

    let statistic = bins
        .iter()
        .map(|b| {
            let (o1, e1) = (b.observed as f64, b.expected);
            let (o0, e0) = (b.n as f64 - o1, b.n as f64 - e1);
            let term = |o: f64, e: f64| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 };
            term(o1, e1) + term(o0, e0)
        })
        .sum::<f64>();
    let df = bins.len() - 2;
    let p_value = ChiSquared::new(df as f64)
        .map_err(|e| CalibError::BadParameter(e.to_string()))?
        .sf(statistic)
        .clamp(0.0, 1.0);
    Ok(HlTestResult { statistic, df, p_value, bins })
}
