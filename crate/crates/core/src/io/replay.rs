//! Adapter that replays a recorded trace directory through the loop.

use std::path::Path;

use crate::embedding::EmbeddingMatrix;
use crate::error::Result;
use crate::io::docs::TraceDoc;
use crate::io::emb::read_emb1_as;
use crate::stopping::{AdapterError, AnswerDistribution, AnswerSignal, ModelAdapter, TraceRecord};

#[derive(Debug, Clone)]
pub struct RecordedStep {
    pub text: EmbeddingMatrix<f64>,
    pub selected: Vec<usize>,
    pub entropy: f64,
    pub distribution: Option<AnswerDistribution<f64>>,
}

/// Serves recorded step embeddings and answer signals in order.
#[derive(Debug, Clone)]
pub struct ReplayAdapter {
    pub visual: EmbeddingMatrix<f64>,
    pub steps: Vec<RecordedStep>,
    pub final_answer: String,
}

impl ReplayAdapter {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let doc = TraceDoc::load_dir(dir)?;
        let visual = read_emb1_as(TraceDoc::resolve(dir, &doc.visual))?;
        let mut steps = Vec::with_capacity(doc.steps.len());
        for s in &doc.steps {
            let distribution = match &s.distribution {
                Some(p) => Some(AnswerDistribution::new(p.iter().map(|(k, &v)| (k.clone(), v)))?),
                None => None,
            };
            steps.push(RecordedStep {
                text: read_emb1_as(TraceDoc::resolve(dir, &s.text))?,
                selected: s.selected.clone(),
                entropy: s.entropy,
                distribution,
            });
        }
        Ok(Self {
            visual,
            steps,
            final_answer: doc.final_answer,
        })
    }

    fn current(&self, trace: &TraceRecord<f64>) -> Result<&RecordedStep, AdapterError> {
        let k = trace.len();
        k.checked_sub(1)
            .and_then(|i| self.steps.get(i))
            .ok_or_else(|| format!("no recorded step {k}").into())
    }
}

impl ModelAdapter<f64> for ReplayAdapter {
    fn next_step(&mut self, trace: &TraceRecord<f64>) -> Result<EmbeddingMatrix<f64>, AdapterError> {
        self.steps
            .get(trace.len())
            .map(|s| s.text.clone())
            .ok_or_else(|| format!("recorded trace exhausted after {} step(s)", self.steps.len()).into())
    }

    fn answer_signal(&mut self, trace: &TraceRecord<f64>) -> Result<AnswerSignal<f64>, AdapterError> {
        let step = self.current(trace)?;
        Ok(match &step.distribution {
            Some(d) => AnswerSignal::Distribution(d.clone()),
            None => AnswerSignal::Entropy(step.entropy),
        })
    }

    fn final_answer(&mut self, _trace: &TraceRecord<f64>) -> Result<String, AdapterError> {
        Ok(self.final_answer.clone())
    }
}
