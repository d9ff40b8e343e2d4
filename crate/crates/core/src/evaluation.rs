//! Unsupervised readout: neuron-to-digit assignment, per-stimulus verdicts,
//! and the accuracy / confidence / confidence-error summary.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, WtaError};

pub const DIGITS: usize = 10;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Digit assigned to every readout neuron; `None` marks a neuron that never
/// fired (DEAD) and is ignored during classification.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelAssignment {
    pub labels: Vec<Option<u8>>,
    pub responses: Vec<[u64; DIGITS]>,
}

/// Uniform choice among the maximal entries, using `rng` only on ties.
fn argmax_random<R: Rng + ?Sized>(values: &[u64], rng: &mut R) -> usize {
    let best = values.iter().copied().max().unwrap_or(0);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Assigns each neuron the digit it responded to most.
pub fn assign_labels<R: Rng + ?Sized>(responses: &[[u64; DIGITS]], rng: &mut R) -> LabelAssignment {
    let labels = responses
        .iter()
        .map(|r| {
            if r.iter().all(|&v| v == 0) {
                None
            } else {
                Some(argmax_random(r, rng) as u8)
            }
        })
        .collect();
    LabelAssignment {
        labels,
        responses: responses.to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusVerdict {
    /// Readout spikes per assigned digit.
    pub histogram: [u64; DIGITS],
    /// `None` when no assigned neuron fired (ABSTAIN).
    pub predicted: Option<u8>,
    pub confidence: f64,
    pub label: u8,
}

impl StimulusVerdict {
    pub fn abstained(&self) -> bool {
        self.predicted.is_none()
    }

    pub fn is_correct(&self) -> bool {
        self.predicted == Some(self.label)
    }

    pub fn total(&self) -> u64 {
        self.histogram.iter().sum()
    }

    /// Fraction of this stimulus' spikes mapped to `digit`.
    pub fn share(&self, digit: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.histogram[digit] as f64 / total as f64
        }
    }
}

/// Classifies one stimulus from the readout neurons' spike counts.
pub fn classify<R: Rng + ?Sized>(
    spike_counts: &[u32],
    labels: &LabelAssignment,
    true_label: u8,
    rng: &mut R,
) -> Result<StimulusVerdict> {
    if spike_counts.len() != labels.labels.len() {
        return Err(WtaError::config(format!(
            "{} spike counts for {} labelled neurons",
            spike_counts.len(),
            labels.labels.len()
        )));
    }
    let mut histogram = [0u64; DIGITS];
    for (&count, label) in spike_counts.iter().zip(&labels.labels) {
        if let Some(d) = label {
            histogram[*d as usize] += u64::from(count);
        }
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Ok(StimulusVerdict {
            histogram,
            predicted: None,
            confidence: 0.0,
            label: true_label,
        });
    }
    let predicted = argmax_random(&histogram, rng);
    Ok(StimulusVerdict {
        histogram,
        predicted: Some(predicted as u8),
        confidence: histogram[predicted] as f64 / total as f64,
        label: true_label,
    })
}

/// Calibration gap between mean spike shares and true-label shares within
/// each predicted class (total variation), weighted by class size.
/// `None` if every verdict abstained.
pub fn confidence_error(verdicts: &[StimulusVerdict]) -> Option<f64> {
    let mut n = [0usize; DIGITS];
    let mut share = [[0.0f64; DIGITS]; DIGITS];
    let mut truth = [[0usize; DIGITS]; DIGITS];
    for v in verdicts {
        let Some(c) = v.predicted else { continue };
        let c = c as usize;
        n[c] += 1;
        for (d, s) in share[c].iter_mut().enumerate() {
            *s += v.share(d);
        }
        truth[c][v.label as usize] += 1;
    }
    let counted: usize = n.iter().sum();
    if counted == 0 {
        return None;
    }
    let mut weighted = 0.0;
    for c in 0..DIGITS {
        if n[c] == 0 {
            continue;
        }
        let g = n[c] as f64;
        let tv: f64 = (0..DIGITS)
            .map(|d| (share[c][d] / g - truth[c][d] as f64 / g).abs())
            .sum::<f64>()
            / 2.0;
        weighted += g * tv;
    }
    Some(weighted / counted as f64)
}

/// Identifies the run a report belongs to.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMeta {
    pub seed: u64,
    pub design: String,
    pub top_down: String,
    pub network: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub meta: RunMeta,
    pub stimuli: usize,
    pub abstained: usize,
    /// Correct / all stimuli; ABSTAIN counts as incorrect.
    pub accuracy: f64,
    /// Mean over non-abstaining stimuli.
    pub confidence: f64,
    pub confidence_error: f64,
    /// `confusion[true][predicted]`, with column 10 for ABSTAIN.
    pub confusion: [[u64; DIGITS + 1]; DIGITS],
    /// Mean spike share per digit, by true class.
    pub spike_share: [[f64; DIGITS]; DIGITS],
}

pub fn summarize(verdicts: &[StimulusVerdict], meta: RunMeta) -> EvalReport {
    let mut confusion = [[0u64; DIGITS + 1]; DIGITS];
    let mut share = [[0.0f64; DIGITS]; DIGITS];
    let mut per_class = [0usize; DIGITS];
    let mut correct = 0usize;
    let mut abstained = 0usize;
    let mut conf_sum = 0.0;
    for v in verdicts {
        let t = v.label as usize;
        per_class[t] += 1;
        match v.predicted {
            Some(p) => {
                confusion[t][p as usize] += 1;
                conf_sum += v.confidence;
            }
            None => {
                confusion[t][DIGITS] += 1;
                abstained += 1;
            }
        }
        correct += usize::from(v.is_correct());
        for (d, s) in share[t].iter_mut().enumerate() {
            *s += v.share(d);
        }
    }
    for (row, &n) in share.iter_mut().zip(&per_class) {
        if n > 0 {
            row.iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    let answered = verdicts.len() - abstained;
    EvalReport {
        meta,
        stimuli: verdicts.len(),
        abstained,
        accuracy: if verdicts.is_empty() {
            0.0
        } else {
            correct as f64 / verdicts.len() as f64
        },
        confidence: if answered == 0 { 0.0 } else { conf_sum / answered as f64 },
        confidence_error: confidence_error(verdicts).unwrap_or(0.0),
        confusion,
        spike_share: share,
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    schema: u32,
    seed: u64,
    design: &'a str,
    top_down: &'a str,
    network: &'a str,
    stimuli: usize,
    abstained: usize,
    accuracy: f64,
    confidence: f64,
    confidence_error: f64,
    config_hash: &'a str,
}

/// One row per report: `schema, seed, design, top_down, network, stimuli,
/// abstained, accuracy, confidence, confidence_error, config_hash`.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(ReportRow {
            schema: REPORT_SCHEMA_VERSION,
            seed: r.meta.seed,
            design: &r.meta.design,
            top_down: &r.meta.top_down,
            network: &r.meta.network,
            stimuli: r.stimuli,
            abstained: r.abstained,
            accuracy: r.accuracy,
            confidence: r.confidence,
            confidence_error: r.confidence_error,
            config_hash: &r.meta.config_hash,
        })
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| WtaError::io("writing report", e))
}

/// Per-class table: `network, true_class, stimuli, pred_0..pred_9,
/// abstain, share_0..share_9`.
pub fn write_per_class_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["network".to_string(), "true_class".into(), "stimuli".into()];
    header.extend((0..DIGITS).map(|d| format!("pred_{d}")));
    header.push("abstain".into());
    header.extend((0..DIGITS).map(|d| format!("share_{d}")));
    w.write_record(&header).map_err(csv_error)?;
    for r in reports {
        for t in 0..DIGITS {
            let row = &r.confusion[t];
            let mut rec = vec![r.meta.network.clone(), t.to_string(), row.iter().sum::<u64>().to_string()];
            rec.extend(row.iter().map(u64::to_string));
            rec.extend(r.spike_share[t].iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| WtaError::io("writing per-class report", e))
}

pub(crate) fn csv_error(e: csv::Error) -> WtaError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => WtaError::io("writing CSV", io),
        other => WtaError::Runtime(format!("CSV serialization failed: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::named_rng;

    fn resp(pairs: &[(usize, u64)]) -> [u64; DIGITS] {
        let mut r = [0; DIGITS];
        for &(d, v) in pairs {
            r[d] = v;
        }
        r
    }

    fn verdict(hist: &[(usize, u64)], label: u8) -> StimulusVerdict {
        let labels = LabelAssignment {
            labels: (0..DIGITS as u8).map(Some).collect(),
            responses: vec![[0; DIGITS]; DIGITS],
        };
        let mut counts = vec![0u32; DIGITS];
        for &(d, v) in hist {
            counts[d] = v as u32;
        }
        classify(&counts, &labels, label, &mut named_rng(0, "t")).unwrap()
    }

    #[test]
    fn assignment_cases() {
        let mut rng = named_rng(1, "assign");
        let a = assign_labels(&[resp(&[(0, 50), (9, 10)]), resp(&[])], &mut rng);
        assert_eq!(a.labels, vec![Some(0), None]);
    }

    #[test]
    fn tie_break_is_seeded() {
        let tied = vec![resp(&[(2, 5), (7, 5)]); 64];
        let a = assign_labels(&tied, &mut named_rng(3, "assign"));
        let b = assign_labels(&tied, &mut named_rng(3, "assign"));
        assert_eq!(a, b);
        assert!(a.labels.iter().all(|l| matches!(l, Some(2) | Some(7))));
        assert!(a.labels.contains(&Some(2)) && a.labels.contains(&Some(7)));
    }

    #[test]
    fn classify_cases() {
        let v = verdict(&[(0, 8), (1, 2)], 0);
        assert_eq!(v.predicted, Some(0));
        assert!((v.confidence - 0.8).abs() < 1e-15);
        let v = verdict(&[(4, 1)], 3);
        assert_eq!((v.predicted, v.confidence), (Some(4), 1.0));
        let v = verdict(&[], 3);
        assert!(v.abstained() && !v.is_correct());
        assert_eq!(v.confidence, 0.0);
    }

    #[test]
    fn dead_neurons_are_ignored() {
        let labels = LabelAssignment {
            labels: vec![None, Some(3)],
            responses: vec![[0; DIGITS]; 2],
        };
        let v = classify(&[9, 0], &labels, 3, &mut named_rng(0, "t")).unwrap();
        assert!(v.abstained());
        assert!(classify(&[1], &labels, 3, &mut named_rng(0, "t")).is_err());
    }

    #[test]
    fn confidence_error_cases() {
        // Predicted-0 group: 20% truly nine, spikes 80/20 -> calibrated.
        let mut vs = Vec::new();
        for i in 0..10 {
            vs.push(verdict(&[(0, 8), (9, 2)], if i < 2 { 9 } else { 0 }));
        }
        assert!(confidence_error(&vs).unwrap().abs() < 1e-12);

        // Same truth, all spikes on zero: TV = 0.2.
        let vs: Vec<_> = (0..10).map(|i| verdict(&[(0, 5)], if i < 2 { 9 } else { 0 })).collect();
        assert!((confidence_error(&vs).unwrap() - 0.2).abs() < 1e-12);

        assert_eq!(confidence_error(&[verdict(&[], 1)]), None);
    }

    #[test]
    fn summary_cases() {
        let vs: Vec<_> = (0..10).map(|d| verdict(&[(d, 3)], d as u8)).collect();
        let r = summarize(&vs, RunMeta::default());
        assert_eq!((r.accuracy, r.confidence, r.confidence_error), (1.0, 1.0, 0.0));
        for t in 0..DIGITS {
            assert_eq!(r.confusion[t].iter().sum::<u64>(), 1);
        }

        let empty = summarize(&[], RunMeta::default());
        assert_eq!((empty.stimuli, empty.accuracy, empty.confidence), (0, 0.0, 0.0));
    }

    #[test]
    fn csv_schema() {
        let r = summarize(&[verdict(&[(1, 3)], 1)], RunMeta {
            seed: 4,
            design: "integration".into(),
            top_down: "none".into(),
            network: "top".into(),
            config_hash: "ab".into(),
        });
        let mut buf = Vec::new();
        write_reports_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "schema,seed,design,top_down,network,stimuli,abstained,accuracy,confidence,confidence_error,config_hash\n"
        ));
        assert!(text.contains("1,4,integration,none,top,1,0,1.0,1.0,0.0,ab"));
        let mut buf = Vec::new();
        write_per_class_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }
}
