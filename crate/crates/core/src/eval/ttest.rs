//! Paired two-sided t-test over matched cross-validation scores.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Significance levels used to annotate score tables, strongest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Significance {
    P05,
    P10,
    P15,
    P20,
}

impl Significance {
    pub const ALL: [Significance; 4] = [Self::P05, Self::P10, Self::P15, Self::P20];

    pub fn alpha(self) -> f64 {
        match self {
            Self::P05 => 0.05,
            Self::P10 => 0.10,
            Self::P15 => 0.15,
            Self::P20 => 0.20,
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Self::P05 => "***",
            Self::P10 => "**",
            Self::P15 => "*",
            Self::P20 => "^",
        }
    }

    /// Two-sided critical |t| at 14 degrees of freedom.
    pub fn critical_df14(self) -> f64 {
        match self {
            Self::P05 => 2.144_786_687_916_927,
            Self::P10 => 1.761_310_135_774_856,
            Self::P15 => 1.523_095_060_925_786,
            Self::P20 => 1.345_030_374_454_649,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Finite t statistic.
    Tested,
    /// Every difference is zero.
    NoDifference,
    /// Every difference is the same nonzero value.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Zero for no difference, signed infinity when degenerate.
    pub t: f64,
    pub df: usize,
    pub n: usize,
    pub p_value: f64,
    pub verdict: Verdict,
    /// Strongest level cleared, if any.
    pub level: Option<Significance>,
}

/// Tests `a - b` against zero.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Length {
            what: "paired scores",
            gold: a.len(),
            pred: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if !d.iter().all(|v| v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    let all_equal = d.iter().all(|&v| v == d[0]);
    let (t, p_value, verdict) = if all_equal && d[0] == 0.0 {
        (0.0, 1.0, Verdict::NoDifference)
    } else if all_equal || sd == 0.0 {
        (f64::INFINITY.copysign(mean), 0.0, Verdict::Degenerate)
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| EvalError::Stats(e.to_string()))?;
        (t, 2.0 * dist.sf(t.abs()), Verdict::Tested)
    };
    let level = match verdict {
        Verdict::NoDifference => None,
        Verdict::Degenerate => Some(Significance::P05),
        Verdict::Tested if df == 14 => Significance::ALL.into_iter().find(|s| t.abs() > s.critical_df14()),
        Verdict::Tested => Significance::ALL.into_iter().find(|s| p_value < s.alpha()),
    };
    Ok(TTestResult {
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        n,
        p_value,
        verdict,
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_three_pairs() {
        let r = paired_ttest(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        assert_eq!((r.df, r.n, r.verdict), (2, 3, Verdict::Tested));
        assert!((r.sd_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_and_constant_shift() {
        let a = [3.0, 1.0, 4.0];
        assert_eq!(paired_ttest(&a, &a).unwrap().verdict, Verdict::NoDifference);
        let b: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
        let r = paired_ttest(&a, &b).unwrap();
        assert_eq!(r.verdict, Verdict::Degenerate);
        assert_eq!(r.t, f64::INFINITY);
    }

    #[test]
    fn critical_values_agree_with_distribution() {
        let dist = StudentsT::new(0.0, 1.0, 14.0).unwrap();
        for s in Significance::ALL {
            let q = dist.inverse_cdf(1.0 - s.alpha() / 2.0);
            assert!((q - s.critical_df14()).abs() < 1e-6, "{s:?}: {q}");
        }
    }

    #[test]
    fn errors() {
        assert!(paired_ttest(&[1.0], &[0.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[0.0]).is_err());
    }
}
