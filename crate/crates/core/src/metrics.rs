//! Evaluation metrics and test-then-train progressive validation.

use std::collections::HashMap;
use std::io::Write;

use crate::data::Example;
use crate::error::{Error, Result};
use crate::oplt::OpltModel;
use crate::predict::Prediction;

/// |top-k ∩ truth| / k. The denominator stays k when fewer labels are predicted.
pub fn precision_at_k(predicted: &Prediction, truth: &[u32], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let hits = predicted
        .labels()
        .take(k)
        .filter(|l| truth.contains(l))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Inverse propensities `q_j = 1 + C (N_j + B)^(-A)` with
/// `C = (ln N − 1)(B + 1)^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub num_examples: usize,
    counts: HashMap<u32, usize>,
}

impl PropensityModel {
    pub fn new(a: f64, b: f64, num_examples: usize, counts: HashMap<u32, usize>) -> Self {
        let c = ((num_examples as f64).ln() - 1.0) * (b + 1.0).powf(a);
        Self {
            a,
            b,
            c,
            num_examples,
            counts,
        }
    }

    /// Label frequencies taken from a training set.
    pub fn from_examples(a: f64, b: f64, examples: &[Example]) -> Self {
        let mut counts = HashMap::new();
        for ex in examples {
            for &l in ex.labels() {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
        Self::new(a, b, examples.len(), counts)
    }

    pub fn label_count(&self, label: u32) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    /// Unknown labels count as never observed.
    pub fn inverse_propensity(&self, label: u32) -> f64 {
        let n = self.label_count(label) as f64;
        1.0 + self.c * (n + self.b).powf(-self.a)
    }
}

/// (1/k) Σ over the top-k predictions of `q_j · [j ∈ truth]`.
pub fn psp_at_k(
    predicted: &Prediction,
    truth: &[u32],
    k: usize,
    propensity: &PropensityModel,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let sum: f64 = predicted
        .labels()
        .take(k)
        .filter(|l| truth.contains(l))
        .map(|l| propensity.inverse_propensity(l))
        .sum();
    Ok(sum / k as f64)
}

/// log2(acc_algo) − log2(acc_const), in bits. `None` when either accuracy is
/// not positive.
pub fn entropy_reduction(acc_algo: f64, acc_const: f64) -> Option<f64> {
    if acc_algo > 0.0 && acc_const > 0.0 {
        Some(acc_algo.log2() - acc_const.log2())
    } else {
        None
    }
}

/// Running most-frequent-label predictor; ties go to the lower label id.
#[derive(Debug, Clone, Default)]
pub struct ConstantPredictor {
    counts: HashMap<u32, u64>,
    best: Option<(u64, u32)>,
}

impl ConstantPredictor {
    pub fn predict(&self) -> Option<u32> {
        self.best.map(|(_, l)| l)
    }

    pub fn observe(&mut self, label: u32) {
        let c = self.counts.entry(label).or_insert(0);
        *c += 1;
        let c = *c;
        self.best = match self.best {
            Some((bc, bl)) if bc > c || (bc == c && bl < label) => Some((bc, bl)),
            _ => Some((c, label)),
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub examples: usize,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub bits: Option<f64>,
}

/// Test-then-train over a multi-class stream. Each example is predicted
/// before the model trains on it; accuracy and entropy reduction against the
/// running constant predictor are reported at every checkpoint (and at the
/// end of the stream).
pub fn progressive_validate<'a, I>(
    model: &mut OpltModel,
    stream: I,
    checkpoints: &[usize],
) -> Result<Vec<CurvePoint>>
where
    I: IntoIterator<Item = &'a Example>,
{
    let mut hits = 0usize;
    let mut baseline_hits = 0usize;
    let mut baseline = ConstantPredictor::default();
    let mut points = Vec::new();
    let mut t = 0usize;
    let mut next_cp = checkpoints.iter().copied().peekable();
    for ex in stream {
        let label = match ex.labels() {
            [l] => *l,
            other => {
                return Err(Error::Config(format!(
                    "progressive validation needs exactly one label per example, example {} has {}",
                    t + 1,
                    other.len()
                )))
            }
        };
        if model.predict_class(&ex.features) == Some(label) {
            hits += 1;
        }
        if baseline.predict() == Some(label) {
            baseline_hits += 1;
        }
        model.train_example(ex)?;
        baseline.observe(label);
        t += 1;
        while next_cp.peek().is_some_and(|&c| c < t) {
            next_cp.next();
        }
        if next_cp.peek() == Some(&t) {
            next_cp.next();
            points.push(point(t, hits, baseline_hits));
        }
    }
    if t > 0 && points.last().map(|p| p.examples) != Some(t) {
        points.push(point(t, hits, baseline_hits));
    }
    Ok(points)
}

fn point(t: usize, hits: usize, baseline_hits: usize) -> CurvePoint {
    let accuracy = hits as f64 / t as f64;
    let baseline_accuracy = baseline_hits as f64 / t as f64;
    CurvePoint {
        examples: t,
        accuracy,
        baseline_accuracy,
        bits: entropy_reduction(accuracy, baseline_accuracy),
    }
}

/// `start, start + step, ...` up to `end` inclusive.
pub fn checkpoint_grid(start: usize, step: usize, end: usize) -> Vec<usize> {
    if step == 0 {
        return vec![start];
    }
    (start..=end).step_by(step).collect()
}

/// CSV with header `t,accuracy,bits`; a missing entropy value is left empty.
pub fn write_curve_csv<W: Write>(mut w: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(w, "t,accuracy,bits")?;
    for p in points {
        match p.bits {
            Some(b) => writeln!(w, "{},{:.6},{:.6}", p.examples, p.accuracy, b)?,
            None => writeln!(w, "{},{:.6},", p.examples, p.accuracy)?,
        }
    }
    Ok(())
}

/// Mean metric values over a test set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// (k, mean P@k)
    pub precision: Vec<(usize, f64)>,
    /// (k, mean PSP@k), when propensities were supplied
    pub psp: Vec<(usize, f64)>,
    pub examples: usize,
    pub mean_predict_ms: f64,
}

impl EvalReport {
    /// CSV with header `metric,k,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,k,value")?;
        for (k, v) in &self.precision {
            writeln!(w, "P,{k},{v:.6}")?;
        }
        for (k, v) in &self.psp {
            writeln!(w, "PSP,{k},{v:.6}")?;
        }
        Ok(())
    }
}

/// Mean P@k (and PSP@k) over `(prediction, truth)` pairs.
pub fn evaluate(
    pairs: &[(Prediction, Vec<u32>)],
    ks: &[usize],
    propensity: Option<&PropensityModel>,
) -> Result<EvalReport> {
    let n = pairs.len().max(1) as f64;
    let mut report = EvalReport {
        examples: pairs.len(),
        ..EvalReport::default()
    };
    for &k in ks {
        let mut sum = 0.0;
        for (p, truth) in pairs {
            sum += precision_at_k(p, truth, k)?;
        }
        report.precision.push((k, sum / n));
        if let Some(prop) = propensity {
            let mut sum = 0.0;
            for (p, truth) in pairs {
                sum += psp_at_k(p, truth, k, prop)?;
            }
            report.psp.push((k, sum / n));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseVector;
    use crate::learner::LearnerConfig;
    use crate::oplt::{AuxRetention, PolicyConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pred(labels: &[u32]) -> Prediction {
        Prediction {
            items: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, 1.0 - i as f64 * 0.1))
                .collect(),
        }
    }

    #[test]
    fn precision_examples() {
        assert!(
            (precision_at_k(&pred(&[1, 3, 5]), &[1, 2, 5], 3).unwrap() - 2.0 / 3.0).abs() < 1e-15
        );
        assert_eq!(precision_at_k(&pred(&[4]), &[4], 1).unwrap(), 1.0);
        assert_eq!(precision_at_k(&pred(&[4, 5]), &[], 5).unwrap(), 0.0);
        // padded with misses
        assert_eq!(precision_at_k(&pred(&[4]), &[4], 5).unwrap(), 0.2);
        assert!(precision_at_k(&pred(&[4]), &[4], 0).is_err());
    }

    #[test]
    fn propensity_constants() {
        let p = PropensityModel::new(0.55, 1.5, 14146, [(7, 10)].into_iter().collect());
        let c = (14146f64.ln() - 1.0) * 2.5f64.powf(0.55);
        assert!((p.c - c).abs() < 1e-12);
        let q = 1.0 + c * 11.5f64.powf(-0.55);
        assert!((p.inverse_propensity(7) - q).abs() < 1e-12);
        // unknown label: N_j = 0
        let q0 = 1.0 + c * 1.5f64.powf(-0.55);
        assert!((p.inverse_propensity(99) - q0).abs() < 1e-12);
    }

    #[test]
    fn psp_reduces_to_precision_when_c_is_zero() {
        // ln N = 1 makes C vanish
        let n = std::f64::consts::E;
        let p = PropensityModel {
            a: 0.55,
            b: 1.5,
            c: (n.ln() - 1.0) * 2.5f64.powf(0.55),
            num_examples: 3,
            counts: HashMap::new(),
        };
        assert!(p.c.abs() < 1e-15);
        let pr = pred(&[1, 3, 5]);
        let a = psp_at_k(&pr, &[1, 5], 3, &p).unwrap();
        let b = precision_at_k(&pr, &[1, 5], 3).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn psp_at_least_precision() {
        let prop = PropensityModel::new(0.5, 0.4, 1000, [(1, 500), (3, 2)].into_iter().collect());
        let pr = pred(&[1, 3, 5]);
        let truth = [1, 3];
        for k in 1..=3 {
            assert!(
                psp_at_k(&pr, &truth, k, &prop).unwrap() >= precision_at_k(&pr, &truth, k).unwrap()
            );
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_reduction(0.5, 0.125), Some(2.0));
        assert_eq!(entropy_reduction(0.3, 0.3), Some(0.0));
        assert_eq!(entropy_reduction(0.0, 0.3), None);
        assert_eq!(entropy_reduction(0.3, 0.0), None);
    }

    #[test]
    fn constant_predictor_tracks_mode() {
        let mut c = ConstantPredictor::default();
        assert_eq!(c.predict(), None);
        c.observe(5);
        c.observe(3);
        assert_eq!(c.predict(), Some(3));
        c.observe(5);
        assert_eq!(c.predict(), Some(5));
    }

    fn model() -> OpltModel {
        OpltModel::init(
            LearnerConfig::default(),
            PolicyConfig {
                preleaf_arity: 10,
                ..PolicyConfig::default()
            },
            AuxRetention::All,
        )
        .unwrap()
    }

    #[test]
    fn repeated_pair_is_learned() {
        let x = SparseVector::from_pairs(vec![(0, 1.0)]).unwrap();
        let data: Vec<Example> = (0..50).map(|_| Example::new(x.clone(), vec![4])).collect();
        let curve = progressive_validate(&mut model(), &data, &[1, 10, 50]).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].accuracy, 0.0);
        assert_eq!(curve[2].accuracy, 49.0 / 50.0);
    }

    #[test]
    fn baseline_on_uniform_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data: Vec<Example> = (0..20000)
            .map(|i| {
                let x = SparseVector::from_pairs(vec![(i % 97, 1.0)]).unwrap();
                Example::new(x, vec![rng.gen_range(0..10)])
            })
            .collect();
        let curve = progressive_validate(&mut model(), &data, &[]).unwrap();
        let last = curve.last().unwrap();
        assert_eq!(last.examples, 20000);
        assert!((last.baseline_accuracy - 0.1).abs() < 0.02);
    }

    #[test]
    fn accuracy_is_exact_hit_ratio() {
        let data: Vec<Example> = (0..30u32)
            .map(|i| {
                Example::new(
                    SparseVector::from_pairs(vec![(i % 3, 1.0)]).unwrap(),
                    vec![i % 3],
                )
            })
            .collect();
        let cps: Vec<usize> = (1..=30).collect();
        let mut m = model();
        let curve = progressive_validate(&mut m, &data, &cps).unwrap();
        // independent replay counting hits
        let mut check = model();
        let mut hits = 0;
        for (t, ex) in data.iter().enumerate() {
            if check.predict_class(&ex.features) == Some(ex.labels()[0]) {
                hits += 1;
            }
            check.train_example(ex).unwrap();
            assert_eq!(curve[t].accuracy, hits as f64 / (t + 1) as f64);
        }
    }

    #[test]
    fn multilabel_rejected() {
        let x = SparseVector::from_pairs(vec![(0, 1.0)]).unwrap();
        let data = vec![Example::new(x, vec![1, 2])];
        assert!(progressive_validate(&mut model(), &data, &[]).is_err());
    }

    #[test]
    fn checkpoint_grid_matches_axis() {
        assert_eq!(
            checkpoint_grid(10000, 5000, 30000),
            vec![10000, 15000, 20000, 25000, 30000]
        );
    }

    #[test]
    fn csv_formats() {
        let mut buf = Vec::new();
        write_curve_csv(
            &mut buf,
            &[
                CurvePoint {
                    examples: 10,
                    accuracy: 0.5,
                    baseline_accuracy: 0.125,
                    bits: Some(2.0),
                },
                CurvePoint {
                    examples: 20,
                    accuracy: 0.0,
                    baseline_accuracy: 0.1,
                    bits: None,
                },
            ],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,accuracy,bits\n10,0.500000,2.000000\n20,0.000000,\n"
        );
        let report = EvalReport {
            precision: vec![(3, 0.7774)],
            psp: vec![],
            examples: 1,
            mean_predict_ms: 0.0,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,k,value\nP,3,0.777400\n"
        );
    }
}
