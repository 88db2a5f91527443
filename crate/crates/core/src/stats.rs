//! Precision, recall, F1 and McNemar's paired test.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::corpus::Label;
use crate::{Error, Result};

/// Binary confusion counts; class 1 is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn from_predictions(predicted: &[Label], truth: &[Label]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut c = Self::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self)
    }
}

/// Harmonic mean of precision and recall; every 0/0 resolves to 0.
pub fn f1(c: &ConfusionCounts) -> f64 {
    let (p, r) = (c.precision(), c.recall());
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Paired correctness counts of systems A and B over the same units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedOutcomes {
    /// Both correct.
    pub a: u64,
    /// Only A correct.
    pub b: u64,
    /// Only B correct.
    pub c: u64,
    /// Both wrong.
    pub d: u64,
}

impl PairedOutcomes {
    pub fn from_correctness(a_correct: &[bool], b_correct: &[bool]) -> Result<Self> {
        if a_correct.len() != b_correct.len() {
            return Err(Error::invalid("paired outcome vectors differ in length"));
        }
        let mut o = Self::default();
        for (&x, &y) in a_correct.iter().zip(b_correct) {
            match (x, y) {
                (true, true) => o.a += 1,
                (true, false) => o.b += 1,
                (false, true) => o.c += 1,
                (false, false) => o.d += 1,
            }
        }
        Ok(o)
    }

    pub fn discordant(&self) -> u64 {
        self.b + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMode {
    Exact,
    Chi2Corrected,
    /// Exact below 25 discordant pairs, corrected chi-square otherwise.
    #[default]
    Auto,
}

impl McNemarMode {
    /// The concrete test `self` selects for `paired`.
    pub fn resolve(self, paired: &PairedOutcomes) -> McNemarMode {
        match self {
            McNemarMode::Auto if paired.discordant() < 25 => McNemarMode::Exact,
            McNemarMode::Auto => McNemarMode::Chi2Corrected,
            other => other,
        }
    }
}

impl FromStr for McNemarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "chi2" | "chi2_corrected" => Ok(Self::Chi2Corrected),
            "auto" => Ok(Self::Auto),
            other => Err(Error::invalid(format!("unknown McNemar mode {other:?}"))),
        }
    }
}

impl fmt::Display for McNemarMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Chi2Corrected => "chi2_corrected",
            Self::Auto => "auto",
        })
    }
}

/// `2 * P(X >= max(b, c))` for `X ~ Binomial(b + c, 1/2)`, capped at 1.
fn exact_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    let k0 = b.max(c);
    if n <= 120 {
        // exact integer tail, one rounding at the end
        let mut coef: u128 = 1;
        let mut tail: u128 = 0;
        for k in 0..=n {
            if k >= k0 {
                tail += coef;
            }
            coef = coef * u128::from(n - k) / u128::from(k + 1);
        }
        let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
        return p.min(1.0);
    }
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    let tail: f64 = (k0..=n).map(|k| (ln_binomial(n, k) + ln_half).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Continuity-corrected statistic `(|b - c| - 1)^2 / (b + c)`.
pub fn mcnemar_statistic(paired: &PairedOutcomes) -> Result<f64> {
    let n = paired.discordant();
    if n == 0 {
        return Err(Error::UndefinedTest);
    }
    let diff = (paired.b as f64 - paired.c as f64).abs();
    Ok((diff - 1.0).max(0.0).powi(2) / n as f64)
}

/// Two-sided McNemar p-value.
pub fn mcnemar(paired: &PairedOutcomes, mode: McNemarMode) -> Result<f64> {
    if paired.discordant() == 0 {
        return Err(Error::UndefinedTest);
    }
    match mode.resolve(paired) {
        McNemarMode::Exact => Ok(exact_p(paired.b, paired.c)),
        _ => {
            let stat = mcnemar_statistic(paired)?;
            let dist = ChiSquared::new(1.0).expect("one degree of freedom");
            Ok(dist.sf(stat).clamp(0.0, 1.0))
        }
    }
}

/// `(f1_b - f1_a) / f1_a`; zero when both are equal, `None` when only A
/// scores zero.
pub fn relative_improvement(f1_a: f64, f1_b: f64) -> Option<f64> {
    if f1_a == f1_b {
        Some(0.0)
    } else if f1_a == 0.0 {
        None
    } else {
        Some((f1_b - f1_a) / f1_a)
    }
}

/// One utterance-level decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitLabel {
    pub id: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: ConfusionCounts,
}

impl SystemScore {
    pub fn new(confusion: ConfusionCounts) -> Self {
        Self {
            f1: confusion.f1(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            confusion,
        }
    }
}

/// System B compared against reference system A on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub reference: String,
    pub split: String,
    pub folds: usize,
    pub units: usize,
    pub score: SystemScore,
    pub reference_score: SystemScore,
    pub paired: PairedOutcomes,
    pub test: Option<McNemarMode>,
    /// `None` when no pair is discordant and the test is undefined.
    pub p_value: Option<f64>,
    pub improvement: Option<f64>,
}

fn aligned(a: &[UnitLabel], b: &[UnitLabel], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{what}: {} units against {}", a.len(), b.len())));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.id != y.id) {
        return Err(Error::invalid(format!("{what}: unit {:?} aligned with {:?}", x.id, y.id)));
    }
    Ok(())
}

/// F1 of both systems, paired outcomes, McNemar p (auto mode) and the
/// relative F1 improvement of B over A. Units must be in the same order.
pub fn compare_systems(preds_a: &[UnitLabel], preds_b: &[UnitLabel], truth: &[UnitLabel]) -> Result<EvalReport> {
    aligned(preds_a, truth, "system A")?;
    aligned(preds_b, truth, "system B")?;
    let labels: Vec<Label> = truth.iter().map(|u| u.label).collect();
    let la: Vec<Label> = preds_a.iter().map(|u| u.label).collect();
    let lb: Vec<Label> = preds_b.iter().map(|u| u.label).collect();
    let sa = SystemScore::new(ConfusionCounts::from_predictions(&la, &labels)?);
    let sb = SystemScore::new(ConfusionCounts::from_predictions(&lb, &labels)?);
    let correct = |p: &[Label]| p.iter().zip(&labels).map(|(x, y)| x == y).collect::<Vec<_>>();
    let paired = PairedOutcomes::from_correctness(&correct(&la), &correct(&lb))?;
    let (test, p_value) = match mcnemar(&paired, McNemarMode::Auto) {
        Ok(p) => (Some(McNemarMode::Auto.resolve(&paired)), Some(p)),
        Err(Error::UndefinedTest) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        system: "B".into(),
        reference: "A".into(),
        split: String::new(),
        folds: 0,
        units: truth.len(),
        improvement: relative_improvement(sa.f1, sb.f1),
        score: sb,
        reference_score: sa,
        paired,
        test,
        p_value,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    system: &'a str,
    split: &'a str,
    f1: f64,
    precision: f64,
    recall: f64,
    b: u64,
    c: u64,
    p_value: Option<f64>,
    folds: usize,
}

/// One CSV row per report; an undefined p-value is an empty cell.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            system: &r.system,
            split: &r.split,
            f1: r.score.f1,
            precision: r.score.precision,
            recall: r.score.recall,
            b: r.paired.b,
            c: r.paired.c,
            p_value: r.p_value,
            folds: r.folds,
        })
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}
