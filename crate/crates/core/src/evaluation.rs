//! Confusion-matrix metrics, model comparison and the phrase-relocation case
//! study.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label, SENTENCE_TERMINATORS};
use crate::error::{Error, Result};

/// Positive is the class of interest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total()).0
    }

    /// The same counts with the negative class treated as positive.
    pub fn flipped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(predictions: &[Label], gold: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument(
            "confusion matrix needs at least one document".into(),
        ));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (Label::Positive, Label::Positive) => cm.tp += 1,
            (Label::Positive, Label::Negative) => cm.fp += 1,
            (Label::Negative, Label::Positive) => cm.fn_ += 1,
            (Label::Negative, Label::Negative) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// `(num / den, undefined)`; a zero denominator yields 0 and sets the flag.
fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a metric hit a zero denominator and was reported as 0.
    pub undefined: bool,
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let (precision, p_undef) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, r_undef) = ratio(cm.tp, cm.tp + cm.fn_);
    let (f1, f_undef) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: cm.tp + cm.fn_,
        undefined: p_undef || r_undef || f_undef,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    /// Support-weighted means of the per-class values.
    pub weighted: Averages,
    pub accuracy: f64,
}

impl MetricsReport {
    pub fn undefined(&self) -> bool {
        self.positive.undefined || self.negative.undefined
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("metrics need at least one document".into()));
    }
    let positive = class_metrics(cm);
    let negative = class_metrics(&cm.flipped());
    let (wp, wn) = (
        positive.support as f64 / total as f64,
        negative.support as f64 / total as f64,
    );
    let weighted = Averages {
        precision: wp * positive.precision + wn * negative.precision,
        recall: wp * positive.recall + wn * negative.recall,
        f1: wp * positive.f1 + wn * negative.f1,
    };
    Ok(MetricsReport {
        confusion: *cm,
        positive,
        negative,
        weighted,
        accuracy: cm.accuracy(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of the positive class, or the SVM margin.
    pub score: f64,
}

/// Anything that can label a document.
pub trait DocumentClassifier {
    fn name(&self) -> &str;
    fn predict(&self, doc: &Document) -> Result<Prediction>;
}

fn is_terminator_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| SENTENCE_TERMINATORS.contains(&c))
}

/// Token ranges of the sentences in `tokens`; each sentence ends with its
/// terminator token, and trailing tokens without one form a final sentence.
pub fn sentence_spans(tokens: &[String]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if is_terminator_token(tok) {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        spans.push(start..tokens.len());
    }
    spans
}

/// Moves `span` (whole sentences only) to the end of the document.
pub fn relocate_to_end(tokens: &[String], span: Range<usize>) -> Result<Vec<String>> {
    if span.start >= span.end || span.end > tokens.len() {
        return Err(Error::InvalidArgument(format!(
            "carrier span {span:?} invalid for {} tokens",
            tokens.len()
        )));
    }
    let spans = sentence_spans(tokens);
    let aligned_start = spans.iter().any(|s| s.start == span.start);
    let aligned_end = spans.iter().any(|s| s.end == span.end);
    if !aligned_start || !aligned_end {
        return Err(Error::InvalidArgument(format!(
            "carrier span {span:?} does not cover whole sentences"
        )));
    }
    let mut out = Vec::with_capacity(tokens.len());
    out.extend_from_slice(&tokens[..span.start]);
    out.extend_from_slice(&tokens[span.end..]);
    out.extend_from_slice(&tokens[span.clone()]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: String,
    pub before: Prediction,
    pub after: Prediction,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRecord {
    pub id: String,
    pub gold: Label,
    pub carrier: Range<usize>,
    pub original: Vec<String>,
    pub modified: Vec<String>,
    pub outcomes: Vec<ModelOutcome>,
}

pub fn case_study(
    doc: &Document,
    carrier: Range<usize>,
    models: &[&dyn DocumentClassifier],
) -> Result<CaseStudyRecord> {
    let modified_tokens = relocate_to_end(&doc.tokens, carrier.clone())?;
    let modified = Document::new(doc.id.clone(), modified_tokens, doc.label);
    let mut outcomes = Vec::with_capacity(models.len());
    for m in models {
        let before = m.predict(doc)?;
        let after = m.predict(&modified)?;
        outcomes.push(ModelOutcome {
            model: m.name().to_string(),
            before,
            after,
            flipped: before.label != after.label,
        });
    }
    Ok(CaseStudyRecord {
        id: doc.id.clone(),
        gold: doc.label,
        carrier,
        original: doc.tokens.clone(),
        modified: modified.tokens,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub id: String,
    pub gold: Label,
    /// One label per model, in model order.
    pub predictions: Vec<Label>,
    /// Index of the only model that was right.
    pub correct_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<ModelReport>,
    /// Documents on which exactly one model is correct.
    pub disagreements: Vec<Disagreement>,
}

pub fn compare_models(docs: &[Document], models: &[&dyn DocumentClassifier]) -> Result<Comparison> {
    let preds: Vec<Vec<Label>> = models
        .iter()
        .map(|m| {
            docs.iter()
                .map(|d| m.predict(d).map(|p| p.label))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    compare_predictions(docs, models.iter().map(|m| m.name().to_string()).collect(), preds)
}

/// [`compare_models`] over already computed predictions (`predictions[m][d]`).
pub fn compare_predictions(docs: &[Document], names: Vec<String>, predictions: Vec<Vec<Label>>) -> Result<Comparison> {
    let gold: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let mut reports = Vec::with_capacity(names.len());
    for (name, preds) in names.into_iter().zip(&predictions) {
        reports.push(ModelReport {
            model: name,
            metrics: metrics(&confusion(preds, &gold)?)?,
        });
    }
    let mut disagreements = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        let row: Vec<Label> = predictions.iter().map(|p| p[d]).collect();
        let correct: Vec<usize> = (0..row.len()).filter(|&m| row[m] == doc.label).collect();
        if correct.len() == 1 && row.len() > 1 {
            disagreements.push(Disagreement {
                id: doc.id.clone(),
                gold: doc.label,
                predictions: row,
                correct_model: correct[0],
            });
        }
    }
    Ok(Comparison { reports, disagreements })
}

impl Comparison {
    /// One row per model with the weighted metrics and accuracy.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tprecision\trecall\tf1\taccuracy\ttp\tfp\tfn\ttn\n");
        for r in &self.reports {
            let m = &r.metrics;
            let c = &m.confusion;
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\n",
                r.model, m.weighted.precision, m.weighted.recall, m.weighted.f1, m.accuracy, c.tp, c.fp, c.fn_, c.tn
            ));
        }
        out
    }
}
