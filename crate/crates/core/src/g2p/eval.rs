use serde::Serialize;

use super::labels::LabelSequence;
use super::model::G2pModel;
use super::G2pError;
use crate::nn::Scalar;
use crate::par::Exec;

/// Phoneme and sentence accuracy with the exact counts behind them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G2pEvalReport {
    pub par: f64,
    pub sar: f64,
    pub n_sentences: usize,
    pub n_labels: usize,
    pub correct_labels: usize,
    pub perfect_sentences: usize,
}

impl std::fmt::Display for G2pEvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "PAR {:.4} ({}/{})  SAR {:.4} ({}/{})",
            self.par, self.correct_labels, self.n_labels, self.sar, self.perfect_sentences, self.n_sentences
        )
    }
}

/// Scores predicted label sequences against gold ones.
pub fn score_predictions(gold: &[LabelSequence], pred: &[Vec<String>]) -> Result<G2pEvalReport, G2pError> {
    if gold.is_empty() {
        return Err(G2pError::EmptyDataset);
    }
    let (mut n_labels, mut correct, mut perfect) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        if g.labels.len() != p.len() {
            return Err(G2pError::Mismatch {
                graphemes: g.labels.len(),
                labels: p.len(),
            });
        }
        let c = g.labels.iter().zip(p).filter(|(a, b)| a == b).count();
        n_labels += g.labels.len();
        correct += c;
        perfect += usize::from(c == g.labels.len());
    }
    if n_labels == 0 {
        return Err(G2pError::EmptyDataset);
    }
    Ok(G2pEvalReport {
        par: correct as f64 / n_labels as f64,
        sar: perfect as f64 / gold.len() as f64,
        n_sentences: gold.len(),
        n_labels,
        correct_labels: correct,
        perfect_sentences: perfect,
    })
}

/// PAR/SAR of the model's argmax labels. Sentences are labelled in
/// parallel; the model is read-only.
pub fn evaluate_par_sar<F: Scalar>(
    model: &G2pModel<F>,
    data: &[LabelSequence],
    exec: Exec,
) -> Result<G2pEvalReport, G2pError> {
    if data.is_empty() {
        return Err(G2pError::EmptyDataset);
    }
    let preds = exec
        .map(data, |s| {
            if s.is_empty() {
                Ok(Vec::new())
            } else {
                model.predict_labels(&s.graphemes)
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    score_predictions(data, &preds)
}
