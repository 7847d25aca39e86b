use std::fmt::Write as _;

use crate::arch::Model;
use crate::data::{ClassLabel, JujubeGroup, FRAMES_PER_JUJUBE, NUM_CLASSES};
use crate::error::{precondition, Result};
use crate::layers::Module;
use crate::ops::softmax;

use super::argmax;

/// How five frame results combine into one verdict.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AggregationRule {
    /// Sum of the softmax vectors.
    #[default]
    ScoreSum,
    /// Most frequent frame argmax.
    MajorityVote,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JujubeVerdict {
    pub jujube_id: u64,
    pub predicted: ClassLabel,
    pub truth: ClassLabel,
    /// Summed softmax under [`AggregationRule::ScoreSum`], vote counts under
    /// [`AggregationRule::MajorityVote`].
    pub scores: [f64; NUM_CLASSES],
    pub frame_predictions: [ClassLabel; FRAMES_PER_JUJUBE],
}

/// Largest entry; exact ties go to the more severe (lower-index) class.
pub fn severity_argmax(scores: &[f64; NUM_CLASSES]) -> ClassLabel {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    ClassLabel::ALL[best]
}

/// Combines per-frame probability rows into a verdict under `rule`.
pub fn aggregate(
    probs: &[[f32; NUM_CLASSES]],
    rule: AggregationRule,
) -> ([f64; NUM_CLASSES], ClassLabel) {
    let mut scores = [0.0f64; NUM_CLASSES];
    for row in probs {
        match rule {
            AggregationRule::ScoreSum => {
                for c in 0..NUM_CLASSES {
                    scores[c] += row[c] as f64;
                }
            }
            AggregationRule::MajorityVote => scores[argmax(row)] += 1.0,
        }
    }
    (scores, severity_argmax(&scores))
}

/// One batch-of-five eval forward over the group's frames.
pub fn grade_jujube(
    model: &Model<f32>,
    group: &JujubeGroup,
    rule: AggregationRule,
) -> Result<JujubeVerdict> {
    if group.frames.len() != FRAMES_PER_JUJUBE {
        return precondition(
            "grade_jujube",
            format!(
                "jujube {} has {} frames, expected {FRAMES_PER_JUJUBE}",
                group.jujube_id,
                group.frames.len()
            ),
        );
    }
    if model.plan().num_classes != NUM_CLASSES {
        return precondition(
            "grade_jujube",
            format!(
                "model has {} classes, grading needs {NUM_CLASSES}",
                model.plan().num_classes
            ),
        );
    }
    let probs = softmax(&model.forward_eval(&group.batch()?)?);
    let rows: Vec<[f32; NUM_CLASSES]> = (0..FRAMES_PER_JUJUBE)
        .map(|i| probs.sample(i).try_into().expect("four classes"))
        .collect();
    let (scores, predicted) = aggregate(&rows, rule);
    let mut frame_predictions = [ClassLabel::Invalid; FRAMES_PER_JUJUBE];
    for (slot, row) in frame_predictions.iter_mut().zip(&rows) {
        *slot = ClassLabel::ALL[argmax(row)];
    }
    Ok(JujubeVerdict {
        jujube_id: group.jujube_id,
        predicted,
        truth: group.label,
        scores,
        frame_predictions,
    })
}

pub fn grade_all(
    model: &Model<f32>,
    groups: &[JujubeGroup],
    rule: AggregationRule,
) -> Result<Vec<JujubeVerdict>> {
    groups
        .iter()
        .map(|g| grade_jujube(model, g, rule))
        .collect()
}

pub fn jujube_accuracy(verdicts: &[JujubeVerdict]) -> f64 {
    let ok = verdicts.iter().filter(|v| v.predicted == v.truth).count();
    ok as f64 / verdicts.len().max(1) as f64
}

/// `jujube_id,truth,predicted,score_*,frames` lines.
pub fn verdicts_csv(verdicts: &[JujubeVerdict]) -> String {
    let mut s = String::from(
        "jujube_id,truth,predicted,score_invalid,score_rotten,score_wizened,score_normal,frames\n",
    );
    for v in verdicts {
        let frames: Vec<&str> = v.frame_predictions.iter().map(|c| c.name()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            v.jujube_id,
            v.truth,
            v.predicted,
            v.scores[0],
            v.scores[1],
            v.scores[2],
            v.scores[3],
            frames.join("|")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_of_score_sums() {
        assert_eq!(severity_argmax(&[0.9, 2.1, 1.0, 1.0]), ClassLabel::Rotten);
    }

    #[test]
    fn exact_ties_prefer_severity() {
        assert_eq!(severity_argmax(&[0.0, 1.0, 1.0, 1.0]), ClassLabel::Rotten);
        assert_eq!(severity_argmax(&[2.0, 1.0, 0.0, 2.0]), ClassLabel::Invalid);
        let probs = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        assert_eq!(
            aggregate(&probs, AggregationRule::MajorityVote).1,
            ClassLabel::Wizened
        );
    }

    #[test]
    fn unanimity_wins_under_both_rules() {
        let probs = [[0.1, 0.1, 0.2, 0.6]; 5];
        for rule in [AggregationRule::ScoreSum, AggregationRule::MajorityVote] {
            assert_eq!(aggregate(&probs, rule).1, ClassLabel::Normal);
        }
    }
}
